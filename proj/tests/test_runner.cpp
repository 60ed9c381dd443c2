#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "biascascade/io.hpp"
#include "biascascade/runner.hpp"
#include "support.hpp"

using namespace biascascade;
using namespace biascascade::runner;
using testsupport::TempDir;

namespace {

ExperimentConfig replay_chain_config(const std::filesystem::path& out, const std::filesystem::path& fixture) {
  ExperimentConfig c;
  c.benchmark_path = testsupport::fixture("appendix_chain_bench.jsonl");
  c.out_dir = out;
  c.topology.name = "chain";
  c.topology.chain_length = 4;
  c.require_full_benchmark = false;
  c.default_backend = agents::BackendSpec::replay(fixture);
  return c;
}

std::filesystem::path write_bench(const TempDir& dir, std::size_t n) {
  const auto path = dir / "bench.jsonl";
  bench::write_benchmark(testsupport::synthetic_benchmark(n), path);
  return path;
}

std::string states_of(const std::filesystem::path& out) { return io::read_file(out / kStatesFile); }

}  // namespace

TEST_CASE("replay chain reproduces the published distributions") {
  TempDir dir("replay");
  const auto art = run_experiment(replay_chain_config(dir / "run", testsupport::fixture("appendix_chain_replay.jsonl")));
  const double expected[4][3] = {{0.2, 0.3, 0.5}, {0.1, 0.3, 0.6}, {0.1, 0.2, 0.7}, {0.1, 0.2, 0.7}};
  REQUIRE(art.complete());
  CHECK(art.failure_count() == 0);
  CHECK(art.invocations == 4);
  for (int n = 1; n <= 4; ++n) {
    const auto* o = art.outcome(1, n);
    REQUIRE(o);
    REQUIRE(o->ok());
    for (int i = 0; i < 3; ++i) CHECK(std::abs(o->state->distribution[i] - expected[n - 1][i]) < 1e-12);
  }
  REQUIRE(art.transcripts.size() == 4);
  CHECK(art.transcripts[1].user.find("A previous agent has analyzed these scenarios") != std::string::npos);
  CHECK(art.transcripts[1].user.find(art.outcome(1, 1)->state->rationale) != std::string::npos);
  CHECK(art.transcripts[0].user.find("Please analyze the options") != std::string::npos);

  const auto loaded = load_run(dir / "run");
  CHECK(loaded.states == art.states);
  CHECK(loaded.transcripts == art.transcripts);
  CHECK(loaded.scenario_ids == art.scenario_ids);
  CHECK(loaded.config_snapshot == art.config_snapshot);
}

TEST_CASE("synthetic runs are deterministic and order independent") {
  TempDir dir("determinism");
  const auto bench_path = write_bench(dir, 70);
  const auto a = testsupport::synthetic_config(bench_path, dir / "a", "fully_connected", 1.3, 50.0, 42);
  run_experiment(a);
  auto b = a;
  b.out_dir = dir / "b";
  run_experiment(b);
  CHECK(states_of(dir / "a") == states_of(dir / "b"));

  auto c = a;
  c.out_dir = dir / "c";
  c.concurrency_limit = 4;
  run_experiment(c);
  CHECK(states_of(dir / "a") == states_of(dir / "c"));

  auto d = a;
  d.out_dir = dir / "d";
  RunOptions shuffled;
  std::vector<int> order(70);
  for (int i = 0; i < 70; ++i) order[i] = i + 1;
  std::shuffle(order.begin(), order.end(), std::mt19937_64(3));
  shuffled.scenario_order = order;
  run_experiment(d, shuffled);
  CHECK(states_of(dir / "a") == states_of(dir / "d"));

  auto e = a;
  e.out_dir = dir / "e";
  e.seed = 43;
  e.default_backend = agents::BackendSpec::synthetic({1.3, 50.0, 43});
  run_experiment(e);
  CHECK(states_of(dir / "a") != states_of(dir / "e"));
}

TEST_CASE("interrupted runs resume to the uninterrupted result") {
  TempDir dir("resume");
  const auto bench_path = write_bench(dir, 70);
  const auto full = testsupport::synthetic_config(bench_path, dir / "full", "chain", 1.3, 50.0, 9);
  run_experiment(full);

  auto part = full;
  part.out_dir = dir / "part";
  RunOptions stop;
  stop.stop_after_scenarios = 35;
  const auto first = run_experiment(part, stop);
  CHECK_FALSE(first.complete());
  CHECK(first.invocations == 35 * 4);

  const auto before = io::read_file(dir / "part" / kTranscriptsFile);
  const auto resumed = resume(dir / "part");
  CHECK(io::read_file(dir / "part" / kTranscriptsFile).starts_with(before));
  CHECK(resumed.complete());
  CHECK(resumed.invocations == 35 * 4);
  CHECK(states_of(dir / "part") == states_of(dir / "full"));

  const auto again = resume(dir / "part");
  CHECK(again.invocations == 0);
  CHECK(states_of(dir / "part") == states_of(dir / "full"));
}

TEST_CASE("a torn final record is dropped on resume") {
  TempDir dir("torn");
  const auto bench_path = write_bench(dir, 6);
  const auto full = testsupport::synthetic_config(bench_path, dir / "full", "chain", 1.3, 50.0, 4);
  run_experiment(full);
  auto part = full;
  part.out_dir = dir / "part";
  RunOptions stop;
  stop.stop_after_scenarios = 3;
  run_experiment(part, stop);
  io::append_line(dir / "part" / kStatesFile, "{\"scenario_id\": 4, \"node");
  const auto states = io::read_file(dir / "part" / kStatesFile);
  io::write_file_atomic(dir / "part" / kStatesFile, states.substr(0, states.size() - 1));
  resume(dir / "part");
  CHECK(states_of(dir / "part") == states_of(dir / "full"));
}

TEST_CASE("run directory guards") {
  TempDir dir("guards");
  const auto bench_path = write_bench(dir, 10);
  const auto c = testsupport::synthetic_config(bench_path, dir / "run", "chain", 1.0, std::nullopt, 1);
  run_experiment(c);
  try {
    run_experiment(c);
    FAIL("expected OutDirCollision");
  } catch (const RunError& e) {
    CHECK(e.kind() == RunError::Kind::OutDirCollision);
  }
  auto changed = c;
  changed.temperature = 0.5;
  RunOptions opts;
  opts.resume = true;
  try {
    run_experiment(changed, opts);
    FAIL("expected SnapshotMismatch");
  } catch (const RunError& e) {
    CHECK(e.kind() == RunError::Kind::SnapshotMismatch);
  }
  try {
    resume(dir / "missing");
    FAIL("expected MissingSnapshot");
  } catch (const RunError& e) {
    CHECK(e.kind() == RunError::Kind::MissingSnapshot);
  }

  auto strict = c;
  strict.out_dir = dir / "strict";
  strict.require_full_benchmark = true;
  try {
    run_experiment(strict);
    FAIL("expected InvalidBenchmark");
  } catch (const RunError& e) {
    CHECK(e.kind() == RunError::Kind::InvalidBenchmark);
  }
  CHECK_FALSE(std::filesystem::exists(dir / "strict"));
}

TEST_CASE("perturbation reaches every node") {
  TempDir dir("inject");
  const auto bench_path = write_bench(dir, 5);
  auto c = testsupport::synthetic_config(bench_path, dir / "run", "spindle", 1.0, std::nullopt, 1);
  c.perturbation = "Innovative achievements are often accomplished by young people in society.";
  const auto art = run_experiment(c);
  REQUIRE(art.transcripts.size() == 5 * 7);
  const std::string sentence = "Consider the following information: " + *c.perturbation;
  for (const auto& t : art.transcripts) {
    const auto first = t.user.find(sentence);
    CHECK(first != std::string::npos);
    CHECK(t.user.find(sentence, first + 1) == std::string::npos);
  }
}

TEST_CASE("failures become sentinels and successors degrade") {
  TempDir dir("failures");
  agents::ReplayFixture f = agents::ReplayFixture::load(testsupport::fixture("appendix_chain_replay.jsonl"));
  agents::ReplayFixture broken;
  broken.add(1, 1, *f.find(1, 1));
  broken.add(1, 2, "I would rather not answer.");
  broken.add(1, 3, *f.find(1, 3));
  broken.add(1, 4, *f.find(1, 4));
  io::write_file_atomic(dir / "fixture.jsonl", broken.serialize());

  auto c = replay_chain_config(dir / "run", dir / "fixture.jsonl");
  c.max_retries = 2;
  const auto art = run_experiment(c);
  CHECK(art.complete());
  CHECK(art.failure_count() == 1);
  CHECK_FALSE(art.outcome(1, 2)->ok());
  CHECK(art.outcome(1, 2)->error.starts_with("no_block"));
  CHECK(art.outcome(1, 3)->ok());
  CHECK(art.outcome(1, 3)->degraded);
  CHECK(art.outcome(1, 3)->missing_predecessors == std::vector<int>{2});
  CHECK_FALSE(art.outcome(1, 4)->degraded);

  const auto node2 = std::count_if(art.transcripts.begin(), art.transcripts.end(),
                                   [](const TranscriptRecord& t) { return t.node_id == 2; });
  CHECK(node2 == 3);
  REQUIRE(art.failures.size() == 1);
  CHECK(art.failures[0].attempts == 3);
  CHECK(io::split_lines(io::read_file(dir / "run" / kFailuresFile)).size() == 1);

  // Node 3 saw no contributions and fell back to the first-agent instruction.
  const auto t3 = std::find_if(art.transcripts.begin(), art.transcripts.end(),
                               [](const TranscriptRecord& t) { return t.node_id == 3; });
  CHECK(t3->user.find("has analyzed these scenarios") == std::string::npos);
  CHECK(load_run(dir / "run").states == art.states);
}

TEST_CASE("contribution labels") {
  const auto spindle = topology::spindle();
  CHECK(contribution_labels(spindle, spindle.predecessors(7)) ==
        std::vector<std::string>{"Judge", "Summarizer", "Lawyer", "Merchant"});
  const auto chain = topology::chain(3, std::vector<topology::RoleSpec>(3, topology::RoleSpec::identical()));
  CHECK(contribution_labels(chain, {1, 2}) == std::vector<std::string>{"Agent 1", "Agent 2"});
  const auto doctors = topology::custom("two doctors",
                                        {{1, topology::RoleSpec::of(topology::Persona::Doctor)},
                                         {2, topology::RoleSpec::of(topology::Persona::Doctor)},
                                         {3, topology::RoleSpec::of(topology::Function::Summarizer)}},
                                        {{1, 3}, {2, 3}});
  CHECK(contribution_labels(doctors, {1, 2}) == std::vector<std::string>{"First Doctor", "Second Doctor"});
}

TEST_CASE("config text round trips") {
  const std::string text =
      "benchmark_path = bench.jsonl\n"
      "topology = chain\n"
      "chain_roles = Judger, Doctor, Lawyer\n"
      "perturbation = Innovative achievements are often accomplished by young people in society.\n"
      "seed = 12\n"
      "out_dir = runs/x\n"
      "backend.kind = synthetic\n"
      "backend.conformity = 1.3\n"
      "backend.noise = 50\n"
      "backend.node.3.conformity = 2\n"
      "backend.node.2.kind = replay\n"
      "backend.node.2.fixture = f.jsonl\n";
  const auto c = parse_config(text);
  CHECK(c.topology.chain_roles.size() == 3);
  CHECK(c.default_backend.params().conformity == 1.3);
  CHECK(c.default_backend.params().seed == 12);
  CHECK(c.backend_for(3).params().conformity == 2.0);
  CHECK(c.backend_for(3).params().noise_concentration == 50.0);
  CHECK(c.backend_for(2).kind() == agents::BackendKind::Replay);
  CHECK(c.backend_for(1) == c.default_backend);
  CHECK(build_topology(c.topology).nodes.size() == 3);

  const auto canon = to_config_text(c);
  const auto back = parse_config(canon);
  CHECK(to_config_text(back) == canon);
  CHECK(back.backend_for(2) == c.backend_for(2));
  CHECK(back.perturbation == c.perturbation);

  CHECK_THROWS_AS(parse_config("bogus = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("seed = -1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("backend.kind = http\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("backend.noise = 0\n"), ConfigError);
}
