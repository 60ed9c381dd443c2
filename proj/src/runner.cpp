#include "biascascade/runner.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <ctime>
#include <exception>
#include <mutex>
#include <set>
#include <thread>

#include <json.hpp>

#include "biascascade/io.hpp"

namespace biascascade::runner {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

std::string dump(const json& j) { return j.dump(-1, ' ', false, json::error_handler_t::replace); }

std::string now_iso() {
  using namespace std::chrono;
  const auto now = system_clock::now();
  const auto secs = system_clock::to_time_t(now);
  const auto ms = duration_cast<milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday,
                tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms));
  return buf;
}

json probs_json(const agents::InformationState& s) {
  json a = json::array();
  for (double p : s.distribution.probs()) a.push_back(p);
  return a;
}

agents::InformationState state_from_json(const json& j) {
  std::vector<double> probs;
  for (const auto& p : j.at("probs")) probs.push_back(p.get<double>());
  return {metrics::ChoiceDistribution(std::move(probs)), j.at("rationale").get<std::string>()};
}

json outcome_json(const NodeKey& key, const NodeOutcome& o) {
  json j{{"scenario_id", key.first}, {"node_id", key.second}, {"status", o.ok() ? "ok" : "failed"}};
  if (o.ok()) {
    j["probs"] = probs_json(*o.state);
    j["rationale"] = o.state->rationale;
  } else {
    j["error"] = o.error;
  }
  j["degraded"] = o.degraded;
  j["missing_predecessors"] = o.missing_predecessors;
  return j;
}

json transcript_json(const TranscriptRecord& t) {
  json j{{"scenario_id", t.scenario_id}, {"node_id", t.node_id}, {"attempt", t.attempt},
         {"system", t.system},           {"user", t.user},       {"raw", t.raw}};
  if (t.state) {
    j["status"] = "parsed";
    j["probs"] = probs_json(*t.state);
    j["rationale"] = t.state->rationale;
  } else {
    j["status"] = "error";
    j["error"] = t.error;
  }
  j["terminal"] = t.terminal;
  j["started_at"] = t.started_at;
  j["finished_at"] = t.finished_at;
  return j;
}

json failure_json(const FailureRecord& f) {
  return json{{"scenario_id", f.scenario_id}, {"node_id", f.node_id}, {"attempts", f.attempts}, {"error", f.error}};
}

template <typename F>
void for_each_record(const fs::path& path, F&& f) {
  if (!fs::exists(path)) return;
  const auto text = io::read_file(path);
  const auto lines = io::split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    try {
      f(json::parse(lines[i].text));
    } catch (const std::exception& e) {
      // A final line without its newline is an interrupted append; drop it.
      if (i + 1 == lines.size() && !text.ends_with('\n')) return;
      throw RunError(RunError::Kind::Corrupt,
                     path.filename().string() + " line " + std::to_string(lines[i].number) + ": " + e.what());
    }
  }
}

std::map<NodeKey, NodeOutcome> read_states(const fs::path& dir) {
  std::map<NodeKey, NodeOutcome> states;
  for_each_record(dir / kStatesFile, [&](const json& j) {
    NodeOutcome o;
    if (j.at("status").get<std::string>() == "ok") {
      o.state = state_from_json(j);
    } else {
      o.error = j.at("error").get<std::string>();
    }
    o.degraded = j.value("degraded", false);
    if (j.contains("missing_predecessors")) o.missing_predecessors = j["missing_predecessors"].get<std::vector<int>>();
    states[{j.at("scenario_id").get<int>(), j.at("node_id").get<int>()}] = std::move(o);
  });
  return states;
}

std::vector<TranscriptRecord> read_transcripts(const fs::path& dir) {
  std::vector<TranscriptRecord> out;
  for_each_record(dir / kTranscriptsFile, [&](const json& j) {
    TranscriptRecord t;
    t.scenario_id = j.at("scenario_id").get<int>();
    t.node_id = j.at("node_id").get<int>();
    t.attempt = j.at("attempt").get<int>();
    t.system = j.at("system").get<std::string>();
    t.user = j.at("user").get<std::string>();
    t.raw = j.at("raw").get<std::string>();
    if (j.at("status").get<std::string>() == "parsed") {
      t.state = state_from_json(j);
    } else {
      t.error = j.at("error").get<std::string>();
    }
    t.terminal = j.at("terminal").get<bool>();
    t.started_at = j.at("started_at").get<std::string>();
    t.finished_at = j.at("finished_at").get<std::string>();
    out.push_back(std::move(t));
  });
  return out;
}

std::vector<FailureRecord> read_failures(const fs::path& dir) {
  std::map<NodeKey, FailureRecord> by_key;
  for_each_record(dir / kFailuresFile, [&](const json& j) {
    FailureRecord f{j.at("scenario_id").get<int>(), j.at("node_id").get<int>(), j.at("attempts").get<int>(),
                    j.at("error").get<std::string>()};
    by_key[{f.scenario_id, f.node_id}] = f;
  });
  std::vector<FailureRecord> out;
  for (auto& [k, f] : by_key) out.push_back(std::move(f));
  return out;
}

// Rewrites states.jsonl and failures.jsonl sorted by (scenario, node) so the
// finished files do not depend on worker interleaving.
void write_canonical(const fs::path& dir, const RunArtifact& art) {
  std::string states;
  for (const auto& [key, o] : art.states) states += dump(outcome_json(key, o)) + "\n";
  io::write_file_atomic(dir / kStatesFile, states);
  std::string failures;
  for (const auto& f : art.failures) failures += dump(failure_json(f)) + "\n";
  io::write_file_atomic(dir / kFailuresFile, failures);
}

// Rewrites any file whose last append was cut short so new records start on a
// fresh line.
void repair_tails(const fs::path& dir, const RunArtifact& art) {
  auto partial = [&](const char* name) {
    const auto path = dir / name;
    if (!fs::exists(path)) return false;
    const auto text = io::read_file(path);
    return !text.empty() && !text.ends_with('\n');
  };
  if (partial(kStatesFile) || partial(kFailuresFile)) write_canonical(dir, art);
  if (partial(kTranscriptsFile)) {
    std::string text;
    for (const auto& t : art.transcripts) text += dump(transcript_json(t)) + "\n";
    io::write_file_atomic(dir / kTranscriptsFile, text);
  }
}

std::string error_text(const std::exception& e) {
  if (const auto* p = dynamic_cast<const agents::ParseError*>(&e)) return std::string(p->tag()) + ": " + p->what();
  if (const auto* b = dynamic_cast<const agents::BackendError*>(&e)) {
    static constexpr const char* kTags[] = {"config", "transport", "status", "empty_candidates", "malformed_response",
                                            "missing_fixture"};
    return std::string(kTags[static_cast<int>(b->kind())]) + ": " + b->what();
  }
  return std::string("error: ") + e.what();
}

class Executor {
 public:
  Executor(const ExperimentConfig& config, RunArtifact& art, fs::path dir)
      : config_(config), art_(art), dir_(std::move(dir)) {
    std::set<fs::path> fixtures;
    bool needs_http = false;
    for (const auto& node : art_.graph.nodes) {
      const auto& spec = config_.backend_for(node.node_id);
      if (spec.kind() == agents::BackendKind::Replay) fixtures.insert(spec.fixture_path());
      needs_http |= spec.kind() == agents::BackendKind::Http;
    }
    for (const auto& path : fixtures) fixtures_.emplace(path, agents::ReplayFixture::load(path));
    if (needs_http) endpoint_ = agents::HttpEndpoint::from_env();
  }

  void run(const std::vector<const bench::BenchmarkQuestion*>& work) {
    const std::size_t workers =
        std::max<std::size_t>(1, std::min<std::size_t>(static_cast<std::size_t>(config_.concurrency_limit), work.size()));
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mu;
    auto body = [&] {
      for (std::size_t i = next++; i < work.size(); i = next++) {
        try {
          run_scenario(*work[i]);
        } catch (...) {
          std::lock_guard lock(failure_mu);
          if (!failure) failure = std::current_exception();
          next = work.size();
        }
      }
    };
    if (workers == 1) {
      body();
    } else {
      std::vector<std::jthread> pool;
      for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(body);
    }
    if (failure) std::rethrow_exception(failure);
    art_.invocations += invocations_.load();
  }

 private:
  void run_scenario(const bench::BenchmarkQuestion& question) {
    const int sid = question.scenario_id;
    for (int node_id : art_.graph.execution_order()) {
      std::vector<int> preds;
      agents::PromptContext ctx;
      std::vector<metrics::ChoiceDistribution> pred_dists;
      NodeOutcome outcome;
      {
        std::lock_guard lock(mu_);
        if (art_.states.contains({sid, node_id})) continue;
        const auto all_preds = art_.graph.predecessors(node_id);
        for (int p : all_preds) {
          const auto& o = art_.states.at({sid, p});
          if (o.ok()) {
            preds.push_back(p);
          } else {
            outcome.missing_predecessors.push_back(p);
          }
        }
        const auto labels = contribution_labels(art_.graph, preds);
        for (std::size_t i = 0; i < preds.size(); ++i) {
          const auto& state = *art_.states.at({sid, preds[i]}).state;
          ctx.contributions.push_back({art_.graph.node(preds[i])->role, labels[i], state.rationale});
          pred_dists.push_back(state.distribution);
        }
      }
      outcome.degraded = !outcome.missing_predecessors.empty();
      ctx.question = question;
      ctx.perturbation = config_.perturbation;
      ctx.role = art_.graph.node(node_id)->role;
      const auto prompt = agents::render_prompt(ctx);
      const auto& spec = config_.backend_for(node_id);

      int attempts = 0;
      for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
        ++attempts;
        TranscriptRecord rec{sid, node_id, attempt, prompt.system, prompt.user};
        rec.started_at = now_iso();
        try {
          invoke(spec, sid, node_id, attempt, prompt, pred_dists, rec);
        } catch (const agents::ParseError& e) {
          rec.raw = e.raw();
          rec.error = error_text(e);
        } catch (const agents::BackendError& e) {
          rec.error = error_text(e);
        }
        rec.finished_at = now_iso();
        rec.terminal = rec.state.has_value() || attempt == config_.max_retries;
        if (rec.state) outcome.state = rec.state;
        if (!rec.state) outcome.error = rec.error;
        append_transcript(rec);
        if (rec.terminal) break;
      }
      if (outcome.ok()) outcome.error.clear();
      record_outcome(sid, node_id, outcome, attempts);
    }
  }

  void invoke(const agents::BackendSpec& spec, int sid, int node_id, int attempt, const agents::Prompt& prompt,
              const std::vector<metrics::ChoiceDistribution>& pred_dists, TranscriptRecord& rec) {
    ++invocations_;
    switch (spec.kind()) {
      case agents::BackendKind::Http:
        rec.raw = agents::invoke_http(spec, *endpoint_, prompt, config_.temperature);
        rec.state = agents::parse_state(rec.raw);
        break;
      case agents::BackendKind::Replay:
        rec.raw = agents::invoke_replay(fixtures_.at(spec.fixture_path()), sid, node_id);
        rec.state = agents::parse_state(rec.raw);
        break;
      case agents::BackendKind::Synthetic: {
        // Seed derived per (scenario, node, attempt) so results do not depend
        // on scheduling.
        std::uint64_t seed = io::mix_seed(spec.params().seed, static_cast<std::uint64_t>(sid));
        seed = io::mix_seed(seed, static_cast<std::uint64_t>(node_id));
        seed = io::mix_seed(seed, static_cast<std::uint64_t>(attempt));
        std::mt19937_64 rng(seed);
        rec.state = agents::synthetic_step(spec.params(), pred_dists, rng);
        rec.raw = agents::format_answer(*rec.state);
        break;
      }
    }
  }

  void append_transcript(const TranscriptRecord& rec) {
    const auto line = dump(transcript_json(rec));
    std::lock_guard lock(mu_);
    io::append_line(dir_ / kTranscriptsFile, line);
    art_.transcripts.push_back(rec);
  }

  void record_outcome(int sid, int node_id, const NodeOutcome& outcome, int attempts) {
    const NodeKey key{sid, node_id};
    std::lock_guard lock(mu_);
    io::append_line(dir_ / kStatesFile, dump(outcome_json(key, outcome)));
    if (!outcome.ok()) {
      FailureRecord f{sid, node_id, attempts, outcome.error};
      io::append_line(dir_ / kFailuresFile, dump(failure_json(f)));
      art_.failures.push_back(std::move(f));
    }
    art_.states[key] = outcome;
  }

  const ExperimentConfig& config_;
  RunArtifact& art_;
  fs::path dir_;
  std::map<fs::path, agents::ReplayFixture> fixtures_;
  std::optional<agents::HttpEndpoint> endpoint_;
  std::mutex mu_;
  std::atomic<std::size_t> invocations_{0};
};

bench::BenchmarkSet load_valid_benchmark(const ExperimentConfig& config) {
  bench::BenchmarkSet set;
  try {
    set = bench::load_benchmark(config.benchmark_path);
  } catch (const bench::BenchError& e) {
    throw RunError(RunError::Kind::InvalidBenchmark, e.what());
  }
  const auto report = bench::validate_benchmark(set);
  if (config.require_full_benchmark ? !report.ok() : !report.questions_ok()) {
    std::string failed;
    for (const auto& c : report.checks) {
      if (!c.passed) failed += " " + c.name;
    }
    throw RunError(RunError::Kind::InvalidBenchmark, "benchmark failed validation:" + failed);
  }
  return set;
}

topology::TopologyGraph build_valid_graph(const ExperimentConfig& config) {
  topology::TopologyGraph graph;
  try {
    graph = build_topology(config.topology);
  } catch (const Error& e) {
    throw RunError(RunError::Kind::InvalidTopology, e.what());
  }
  const auto report = topology::validate_graph(graph);
  if (!report.ok()) throw RunError(RunError::Kind::InvalidTopology, "topology failed validation");
  for (const auto& [id, spec] : config.node_backends) {
    if (!graph.node(id)) {
      throw RunError(RunError::Kind::MissingBackend, "backend override for unknown node " + std::to_string(id));
    }
  }
  return graph;
}

}  // namespace

const NodeOutcome* RunArtifact::outcome(int scenario_id, int node_id) const {
  auto it = states.find({scenario_id, node_id});
  return it == states.end() ? nullptr : &it->second;
}

bool RunArtifact::complete() const {
  for (int s : scenario_ids) {
    for (const auto& n : graph.nodes) {
      if (!states.contains({s, n.node_id})) return false;
    }
  }
  return true;
}

std::size_t RunArtifact::failure_count() const {
  return static_cast<std::size_t>(
      std::count_if(states.begin(), states.end(), [](const auto& kv) { return !kv.second.ok(); }));
}

std::vector<std::string> contribution_labels(const topology::TopologyGraph& graph, const std::vector<int>& preds) {
  static constexpr const char* kOrdinals[] = {"First", "Second", "Third", "Fourth", "Fifth",
                                              "Sixth", "Seventh", "Eighth", "Ninth", "Tenth"};
  std::vector<std::string> labels;
  for (int p : preds) {
    const auto& role = graph.node(p)->role;
    labels.push_back(role.kind() == topology::RoleKind::Identical ? "Agent " + std::to_string(p)
                                                                   : agents::contribution_label(role));
  }
  std::map<std::string, int> total, seen;
  for (const auto& l : labels) ++total[l];
  for (auto& l : labels) {
    if (total[l] < 2) continue;
    const int i = seen[l]++;
    l = (i < 10 ? std::string(kOrdinals[i]) : std::to_string(i + 1) + "th") + " " + l;
  }
  return labels;
}

RunArtifact run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  const auto bench = load_valid_benchmark(config);
  RunArtifact art;
  art.config = config;
  art.config_snapshot = config.source_text.empty() ? to_config_text(config) : config.source_text;
  art.graph = build_valid_graph(config);
  for (const auto& q : bench.questions) art.scenario_ids.push_back(q.scenario_id);

  const fs::path dir = config.out_dir;
  if (dir.empty()) throw ConfigError("out_dir is not set");
  const auto snapshot_path = dir / kSnapshotFile;
  if (fs::exists(snapshot_path)) {
    if (!options.resume) {
      throw RunError(RunError::Kind::OutDirCollision,
                     dir.string() + " already holds a run; pass resume to continue it");
    }
    if (io::read_file(snapshot_path) != art.config_snapshot) {
      throw RunError(RunError::Kind::SnapshotMismatch, "config differs from the snapshot in " + dir.string());
    }
    art.states = read_states(dir);
    art.transcripts = read_transcripts(dir);
    art.failures = read_failures(dir);
    repair_tails(dir, art);
  } else {
    fs::create_directories(dir);
    io::write_file_atomic(snapshot_path, art.config_snapshot);
  }

  std::vector<const bench::BenchmarkQuestion*> work;
  if (options.scenario_order) {
    for (int id : *options.scenario_order) {
      const auto* q = bench.find(id);
      if (!q) throw RunError(RunError::Kind::InvalidBenchmark, "scenario order names unknown id " + std::to_string(id));
      work.push_back(q);
    }
  } else {
    for (const auto& q : bench.questions) work.push_back(&q);
  }
  if (options.stop_after_scenarios && *options.stop_after_scenarios < work.size()) {
    work.resize(*options.stop_after_scenarios);
  }

  Executor(config, art, dir).run(work);
  write_canonical(dir, art);
  return art;
}

RunArtifact resume(const fs::path& out_dir, const RunOptions& options, const std::optional<std::string>& expected_config) {
  const auto snapshot_path = out_dir / kSnapshotFile;
  if (!fs::exists(snapshot_path)) {
    throw RunError(RunError::Kind::MissingSnapshot, "no " + std::string(kSnapshotFile) + " in " + out_dir.string());
  }
  const auto snapshot = io::read_file(snapshot_path);
  if (expected_config && *expected_config != snapshot) {
    throw RunError(RunError::Kind::SnapshotMismatch, "config differs from the snapshot in " + out_dir.string());
  }
  auto config = parse_config(snapshot);
  if (fs::weakly_canonical(config.out_dir) != fs::weakly_canonical(out_dir)) {
    throw RunError(RunError::Kind::SnapshotMismatch, "snapshot out_dir does not name " + out_dir.string());
  }
  auto opts = options;
  opts.resume = true;
  return run_experiment(config, opts);
}

RunArtifact load_run(const fs::path& out_dir) {
  const auto snapshot_path = out_dir / kSnapshotFile;
  if (!fs::exists(snapshot_path)) {
    throw RunError(RunError::Kind::MissingSnapshot, "no " + std::string(kSnapshotFile) + " in " + out_dir.string());
  }
  RunArtifact art;
  art.config_snapshot = io::read_file(snapshot_path);
  art.config = parse_config(art.config_snapshot);
  art.graph = build_valid_graph(art.config);
  art.states = read_states(out_dir);
  art.transcripts = read_transcripts(out_dir);
  art.failures = read_failures(out_dir);
  try {
    for (const auto& q : bench::load_benchmark(art.config.benchmark_path).questions) art.scenario_ids.push_back(q.scenario_id);
  } catch (const bench::BenchError&) {
    // Benchmark moved since the run: fall back to the ids present in the states.
    std::set<int> ids;
    for (const auto& [key, o] : art.states) ids.insert(key.first);
    art.scenario_ids.assign(ids.begin(), ids.end());
  }
  return art;
}

}  // namespace biascascade::runner
