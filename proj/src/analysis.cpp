#include "biascascade/analysis.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>

#include <json.hpp>

#include "biascascade/io.hpp"

namespace biascascade::analysis {

using json = nlohmann::ordered_json;
using metrics::GiniConvention;
using metrics::Metric;

namespace {

void require_complete(const runner::RunArtifact& run) {
  if (!run.complete()) throw AnalysisError(AnalysisError::Kind::Incomplete, "run is incomplete; resume it first");
}

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string num(const std::optional<double>& x) { return x ? num(*x) : std::string(); }

json num_json(const std::optional<double>& x) { return x ? json(*x) : json(nullptr); }

double value_at(const LayerSeries& series, std::size_t i) {
  if (i >= series.values.size()) {
    throw AnalysisError(AnalysisError::Kind::IndexOutOfRange, "layer index " + std::to_string(i) + " out of range");
  }
  if (!series.values[i]) {
    throw AnalysisError(AnalysisError::Kind::MissingValue, "layer " + std::to_string(i) + " has no surviving states");
  }
  return *series.values[i];
}

double baseline(const LayerSeries& series) {
  const double b = value_at(series, 0);
  if (!(b > kZeroBaseline)) {
    throw AnalysisError(AnalysisError::Kind::ZeroBaseline, "first-layer mean bias is zero; the run is degenerate");
  }
  return b;
}

struct Variant {
  Metric metric;
  GiniConvention convention;
};

constexpr Variant kVariants[] = {{Metric::Gini, GiniConvention::Population},
                                 {Metric::Gini, GiniConvention::SampleCorrected},
                                 {Metric::Variance, GiniConvention::Population},
                                 {Metric::Entropy, GiniConvention::Population}};

std::string convention_column(const Variant& v) {
  return v.metric == Metric::Gini ? std::string(metrics::to_string(v.convention)) : std::string();
}

void write(const std::filesystem::path& path, const std::string& text) {
  try {
    io::write_file_atomic(path, text);
  } catch (const Error& e) {
    throw AnalysisError(AnalysisError::Kind::Unwritable, e.what());
  }
}

}  // namespace

std::vector<std::vector<int>> measured_layers(const topology::TopologyGraph& graph) {
  if (graph.checkpoints.empty()) return topology::layering(graph);
  std::vector<std::vector<int>> layers;
  for (int c : graph.checkpoints) layers.push_back({c});
  return layers;
}

LayerSeries layer_mean_bias(const runner::RunArtifact& run, Metric metric, GiniConvention convention) {
  require_complete(run);
  LayerSeries series{metric, convention, {}, {}};
  for (const auto& layer : measured_layers(run.graph)) {
    double sum = 0.0;
    std::size_t states = 0, scenarios = 0;
    for (int s : run.scenario_ids) {
      bool contributed = false;
      for (int n : layer) {
        const auto* o = run.outcome(s, n);
        if (!o || !o->ok()) continue;
        sum += metrics::evaluate(metric, o->state->distribution, convention);
        ++states;
        contributed = true;
      }
      scenarios += contributed;
    }
    series.values.push_back(states ? std::optional(sum / static_cast<double>(states)) : std::nullopt);
    series.counts.push_back(scenarios);
  }
  return series;
}

LayerSeries relative_series(const LayerSeries& series) {
  const double b = baseline(series);
  LayerSeries out = series;
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    if (i == 0) {
      out.values[0] = 1.0;
    } else if (out.values[i]) {
      out.values[i] = *out.values[i] / b;
    }
  }
  return out;
}

double amplification_alpha(const LayerSeries& series, std::size_t i) {
  if (i == 0) throw AnalysisError(AnalysisError::Kind::IndexOutOfRange, "alpha is defined from layer 1");
  const double num_v = value_at(series, i);
  const double den = value_at(series, i - 1);
  if (!(den > kZeroBaseline)) {
    throw AnalysisError(AnalysisError::Kind::ZeroDenominator, "layer " + std::to_string(i - 1) + " mean bias is zero");
  }
  return num_v / den;
}

double amplification_beta(const LayerSeries& series, std::size_t i) {
  const double b = baseline(series);
  if (i == 0) return 1.0;
  return value_at(series, i) / b;
}

double local_gain(const runner::RunArtifact& run, int scenario_id, int node_id, Metric metric,
                  GiniConvention convention) {
  if (!run.graph.node(node_id)) {
    throw AnalysisError(AnalysisError::Kind::UnknownNode, "no node " + std::to_string(node_id));
  }
  const auto preds = run.graph.predecessors(node_id);
  if (preds.empty()) {
    throw AnalysisError(AnalysisError::Kind::SourceNode, "node " + std::to_string(node_id) + " has no predecessors");
  }
  const auto* self = run.outcome(scenario_id, node_id);
  if (!self || !self->ok()) {
    throw AnalysisError(AnalysisError::Kind::MissingValue, "node " + std::to_string(node_id) + " has no state");
  }
  double sum = 0.0;
  std::size_t n = 0;
  for (int p : preds) {
    const auto* o = run.outcome(scenario_id, p);
    if (!o || !o->ok()) continue;
    sum += metrics::evaluate(metric, o->state->distribution, convention);
    ++n;
  }
  if (n == 0) {
    throw AnalysisError(AnalysisError::Kind::MissingValue, "all predecessors of node " + std::to_string(node_id) + " failed");
  }
  const double mean = sum / static_cast<double>(n);
  if (!(mean > kZeroBaseline)) {
    throw AnalysisError(AnalysisError::Kind::ZeroPredecessorBias, "predecessor bias of node " + std::to_string(node_id) + " is zero");
  }
  return metrics::evaluate(metric, self->state->distribution, convention) / mean;
}

std::vector<NodeMean> per_node(const runner::RunArtifact& run, Metric metric, GiniConvention convention) {
  require_complete(run);
  std::vector<NodeMean> out;
  for (int id : run.graph.execution_order()) {
    NodeMean m{id, run.graph.node(id)->layer, std::nullopt, 0};
    double sum = 0.0;
    for (int s : run.scenario_ids) {
      const auto* o = run.outcome(s, id);
      if (!o || !o->ok()) continue;
      sum += metrics::evaluate(metric, o->state->distribution, convention);
      ++m.count;
    }
    if (m.count) m.value = sum / static_cast<double>(m.count);
    out.push_back(m);
  }
  return out;
}

std::size_t PreferenceTally::chosen() const {
  std::size_t n = 0;
  for (const auto& [k, v] : gender) n += v;
  return n;
}

PreferenceTally preference_tally(const runner::RunArtifact& run, const bench::BenchmarkSet& bench) {
  require_complete(run);
  PreferenceTally tally;
  for (int a : bench::kAges) tally.age[a] = 0;
  for (auto g : bench::kGenders) tally.gender[g] = 0;
  for (auto r : bench::kRaces) tally.race[r] = 0;

  for (int s : run.scenario_ids) {
    const auto* question = bench.find(s);
    if (!question) {
      throw AnalysisError(AnalysisError::Kind::UnknownScenario, "scenario " + std::to_string(s) + " is not in the benchmark");
    }
    const auto* o = run.outcome(s, run.graph.final_node);
    if (!o || !o->ok()) {
      tally.excluded.push_back(s);
      continue;
    }
    const auto probs = o->state->distribution.probs();
    const double best = *std::max_element(probs.begin(), probs.end());
    if (std::count(probs.begin(), probs.end(), best) > 1) {
      ++tally.ties;
      continue;
    }
    const auto idx = static_cast<std::size_t>(std::find(probs.begin(), probs.end(), best) - probs.begin());
    const auto& profile = question->options.at(idx).profile;
    ++tally.age[profile.age];
    ++tally.gender[profile.gender];
    ++tally.race[profile.race];
  }
  return tally;
}

void emit_report(const runner::RunArtifact& run, const std::filesystem::path& dir, const ReportOptions& options) {
  require_complete(run);
  try {
    std::filesystem::create_directories(dir);
  } catch (const std::filesystem::filesystem_error& e) {
    throw AnalysisError(AnalysisError::Kind::Unwritable, e.what());
  }

  json report{{"topology", run.graph.name},
              {"scenarios", run.scenario_ids.size()},
              {"failures", run.failure_count()},
              {"layers", json::array()}};

  std::ostringstream layers;
  layers << "layer,metric,convention,mean,count\n";
  for (const auto& v : kVariants) {
    const auto series = layer_mean_bias(run, v.metric, v.convention);
    json entry{{"metric", metrics::to_string(v.metric)},
               {"convention", convention_column(v)},
               {"mean", json::array()},
               {"count", series.counts}};
    for (std::size_t i = 0; i < series.values.size(); ++i) {
      layers << i << ',' << metrics::to_string(v.metric) << ',' << convention_column(v) << ','
             << num(series.values[i]) << ',' << series.counts[i] << '\n';
      entry["mean"].push_back(num_json(series.values[i]));
    }
    report["layers"].push_back(std::move(entry));
  }
  write(dir / "layers.csv", layers.str());

  const auto series = layer_mean_bias(run, options.metric, options.convention);
  std::ostringstream amp;
  amp << "i,alpha,beta\n";
  json amp_json{{"metric", metrics::to_string(options.metric)},
                {"convention", convention_column({options.metric, options.convention})},
                {"degenerate", false},
                {"alpha", json::array()},
                {"beta", json::array()}};
  const bool degenerate = series.values.empty() || !series.values[0] || !(*series.values[0] > kZeroBaseline);
  for (std::size_t i = 0; i < series.values.size(); ++i) {
    std::optional<double> alpha, beta;
    if (!degenerate) {
      try {
        beta = amplification_beta(series, i);
        if (i > 0) alpha = amplification_alpha(series, i);
      } catch (const AnalysisError&) {
        // Missing or zero layers leave blank cells.
      }
    }
    amp << i << ',' << num(alpha) << ',' << num(beta) << '\n';
    amp_json["alpha"].push_back(num_json(alpha));
    amp_json["beta"].push_back(num_json(beta));
  }
  amp_json["degenerate"] = degenerate;
  report["amplification"] = std::move(amp_json);
  write(dir / "amplification.csv", amp.str());

  std::ostringstream nodes;
  nodes << "node,layer,role,metric,convention,mean,count\n";
  report["nodes"] = json::array();
  for (const auto& v : kVariants) {
    for (const auto& m : per_node(run, v.metric, v.convention)) {
      const auto role = run.graph.node(m.node_id)->role.name();
      nodes << m.node_id << ',' << m.layer << ',' << role << ',' << metrics::to_string(v.metric) << ','
            << convention_column(v) << ',' << num(m.value) << ',' << m.count << '\n';
      report["nodes"].push_back(json{{"node", m.node_id},
                                     {"layer", m.layer},
                                     {"role", role},
                                     {"metric", metrics::to_string(v.metric)},
                                     {"convention", convention_column(v)},
                                     {"mean", num_json(m.value)},
                                     {"count", m.count}});
    }
  }
  write(dir / "nodes.csv", nodes.str());

  if (options.bench) {
    const auto tally = preference_tally(run, *options.bench);
    std::ostringstream t;
    t << "attribute,value,count\n";
    json tj{{"age", json::object()}, {"gender", json::object()}, {"race", json::object()}};
    for (const auto& [a, c] : tally.age) {
      t << "age," << a << ',' << c << '\n';
      tj["age"][std::to_string(a)] = c;
    }
    for (const auto& [g, c] : tally.gender) {
      t << "gender," << bench::to_string(g) << ',' << c << '\n';
      tj["gender"][std::string(bench::to_string(g))] = c;
    }
    for (const auto& [r, c] : tally.race) {
      t << "race," << bench::to_string(r) << ',' << c << '\n';
      tj["race"][std::string(bench::to_string(r))] = c;
    }
    t << "ties,," << tally.ties << '\n';
    t << "excluded,," << tally.excluded.size() << '\n';
    tj["ties"] = tally.ties;
    tj["excluded"] = tally.excluded;
    write(dir / "tally.csv", t.str());
    report["tally"] = std::move(tj);
  }

  write(dir / "report.json", report.dump(2) + "\n");
}

}  // namespace biascascade::analysis
