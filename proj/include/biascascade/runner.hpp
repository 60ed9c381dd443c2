#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "biascascade/agents.hpp"
#include "biascascade/bench.hpp"
#include "biascascade/config.hpp"
#include "biascascade/error.hpp"
#include "biascascade/topology.hpp"

namespace biascascade::runner {

class RunError : public Error {
 public:
  enum class Kind { InvalidBenchmark, InvalidTopology, MissingBackend, OutDirCollision, MissingSnapshot,
                    SnapshotMismatch, Corrupt };

  RunError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

// Run directory file names.
inline constexpr const char* kSnapshotFile = "config.snapshot";
inline constexpr const char* kTranscriptsFile = "transcripts.jsonl";
inline constexpr const char* kStatesFile = "states.jsonl";
inline constexpr const char* kFailuresFile = "failures.jsonl";

struct TranscriptRecord {
  int scenario_id = 0;
  int node_id = 0;
  int attempt = 0;
  std::string system;
  std::string user;
  std::string raw;
  std::optional<agents::InformationState> state;
  std::string error;  // "<tag>: <message>" when the attempt failed
  bool terminal = false;
  std::string started_at;
  std::string finished_at;

  bool operator==(const TranscriptRecord&) const = default;
};

// Terminal result for one (scenario, node): a state or a failure sentinel.
struct NodeOutcome {
  std::optional<agents::InformationState> state;
  std::string error;
  bool degraded = false;  // some predecessor failed and its rationale was omitted
  std::vector<int> missing_predecessors;

  bool ok() const noexcept { return state.has_value(); }
  bool operator==(const NodeOutcome&) const = default;
};

struct FailureRecord {
  int scenario_id = 0;
  int node_id = 0;
  int attempts = 0;
  std::string error;

  bool operator==(const FailureRecord&) const = default;
};

using NodeKey = std::pair<int, int>;  // (scenario_id, node_id)

struct RunArtifact {
  std::string config_snapshot;
  ExperimentConfig config;
  topology::TopologyGraph graph;
  std::vector<int> scenario_ids;  // benchmark order
  std::map<NodeKey, NodeOutcome> states;
  std::vector<TranscriptRecord> transcripts;
  std::vector<FailureRecord> failures;
  // Backend invocations made by this process; not persisted.
  std::size_t invocations = 0;

  const NodeOutcome* outcome(int scenario_id, int node_id) const;
  bool complete() const;
  std::size_t failure_count() const;
};

struct RunOptions {
  bool resume = false;
  // Process only the first N scenarios in benchmark order, simulating an
  // interrupted run.
  std::optional<std::size_t> stop_after_scenarios;
  // Alternative scenario processing order (a permutation of scenario ids).
  std::optional<std::vector<int>> scenario_order;
};

RunArtifact run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

// Continues the run in out_dir from its config snapshot. When expected_config
// is given, it must match the snapshot verbatim.
RunArtifact resume(const std::filesystem::path& out_dir, const RunOptions& options = {},
                   const std::optional<std::string>& expected_config = std::nullopt);

// Reconstructs an artifact from the files of a run directory.
RunArtifact load_run(const std::filesystem::path& out_dir);

// Labels for a node's contributions: role labels, with ordinals when two
// contributors share a label ("First Summarizer", "Second Summarizer").
std::vector<std::string> contribution_labels(const topology::TopologyGraph& graph, const std::vector<int>& preds);

}  // namespace biascascade::runner
