#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "biascascade/bench.hpp"
#include "biascascade/error.hpp"
#include "biascascade/metrics.hpp"
#include "biascascade/runner.hpp"

namespace biascascade::analysis {

class AnalysisError : public Error {
 public:
  enum class Kind { Incomplete, ZeroBaseline, ZeroDenominator, MissingValue, IndexOutOfRange, SourceNode,
                    ZeroPredecessorBias, UnknownNode, UnknownScenario, Unwritable };

  AnalysisError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

// Baselines at or below this are treated as zero.
inline constexpr double kZeroBaseline = 1e-12;

struct LayerSeries {
  metrics::Metric metric = metrics::Metric::Gini;
  metrics::GiniConvention convention = metrics::GiniConvention::Population;
  std::vector<std::optional<double>> values;  // nullopt: every state of the layer failed
  std::vector<std::size_t> counts;            // scenarios with at least one state in the layer

  bool operator==(const LayerSeries&) const = default;
};

// Node groups measured by the series: checkpoints when the topology has them,
// otherwise the longest-path layers.
std::vector<std::vector<int>> measured_layers(const topology::TopologyGraph& graph);

LayerSeries layer_mean_bias(const runner::RunArtifact& run, metrics::Metric metric,
                            metrics::GiniConvention convention = metrics::GiniConvention::Population);

LayerSeries relative_series(const LayerSeries& series);
double amplification_alpha(const LayerSeries& series, std::size_t i);
double amplification_beta(const LayerSeries& series, std::size_t i);

double local_gain(const runner::RunArtifact& run, int scenario_id, int node_id, metrics::Metric metric,
                  metrics::GiniConvention convention = metrics::GiniConvention::Population);

struct NodeMean {
  int node_id = 0;
  int layer = 0;
  std::optional<double> value;
  std::size_t count = 0;
};

std::vector<NodeMean> per_node(const runner::RunArtifact& run, metrics::Metric metric,
                               metrics::GiniConvention convention = metrics::GiniConvention::Population);

struct PreferenceTally {
  std::map<int, std::size_t> age;
  std::map<bench::Gender, std::size_t> gender;
  std::map<bench::Race, std::size_t> race;
  std::size_t ties = 0;
  std::vector<int> excluded;  // scenarios whose final node failed

  std::size_t chosen() const;
};

PreferenceTally preference_tally(const runner::RunArtifact& run, const bench::BenchmarkSet& bench);

struct ReportOptions {
  metrics::Metric metric = metrics::Metric::Gini;
  metrics::GiniConvention convention = metrics::GiniConvention::Population;
  const bench::BenchmarkSet* bench = nullptr;  // tally.csv is written only when set
};

// Writes layers.csv, amplification.csv, nodes.csv, tally.csv and report.json
// into dir.
void emit_report(const runner::RunArtifact& run, const std::filesystem::path& dir, const ReportOptions& options = {});

}  // namespace biascascade::analysis
