#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "biascascade/error.hpp"

namespace biascascade::topology {

class TopologyError : public Error {
 public:
  enum class Kind { RoleCountMismatch, InvalidArgument, Cycle, UnknownNode, UnknownRole };

  TopologyError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

enum class RoleKind { Identical, Persona, Function };
enum class Persona { Doctor, Lawyer, Engineer, Merchant };
enum class Function { Judger, Analyst, Reflector, Summarizer };

class RoleSpec {
 public:
  static RoleSpec identical() { return RoleSpec(RoleKind::Identical, std::nullopt, std::nullopt); }
  static RoleSpec of(Persona p) { return RoleSpec(RoleKind::Persona, p, std::nullopt); }
  static RoleSpec of(Function f) { return RoleSpec(RoleKind::Function, std::nullopt, f); }
  // Accepts "Identical", a persona name, or a function name.
  static RoleSpec parse(std::string_view name);

  RoleKind kind() const noexcept { return kind_; }
  std::optional<Persona> persona() const noexcept { return persona_; }
  std::optional<Function> function() const noexcept { return function_; }

  bool is(Function f) const noexcept { return function_ == f; }
  bool is(Persona p) const noexcept { return persona_ == p; }

  // "Identical", "Doctor", "Judger", ...
  std::string name() const;

  bool operator==(const RoleSpec&) const = default;

 private:
  RoleSpec(RoleKind kind, std::optional<Persona> p, std::optional<Function> f)
      : kind_(kind), persona_(p), function_(f) {}

  RoleKind kind_;
  std::optional<Persona> persona_;
  std::optional<Function> function_;
};

struct AgentNode {
  int node_id = 0;
  RoleSpec role = RoleSpec::identical();
  int layer = 0;
  std::string backend_key;

  bool operator==(const AgentNode&) const = default;
};

using Edge = std::pair<int, int>;

struct TopologyGraph {
  std::string name;
  std::vector<AgentNode> nodes;
  std::vector<Edge> edges;
  int final_node = 0;
  // Measurement points for analysis. Empty means every layer is measured.
  std::vector<int> checkpoints;

  const AgentNode* node(int id) const;
  // Sorted by (layer, node_id).
  std::vector<int> predecessors(int id) const;
  std::vector<int> successors(int id) const;
  // All node ids sorted by (layer, node_id): a valid execution order.
  std::vector<int> execution_order() const;

  bool operator==(const TopologyGraph&) const = default;
};

// Role list size must equal n. Node ids 1..n, node i+1 in layer i.
TopologyGraph chain(int n, const std::vector<RoleSpec>& roles);

// Seven agents with the edge set of the spindle prompts:
// Judger(1) feeds Doctor(2), Engineer(3), Summarizer(4) and Summarizer(7);
// Summarizer(4) feeds Lawyer(5), Merchant(6) and Summarizer(7).
TopologyGraph spindle();

// Judger -> {Doctor, Engineer, Lawyer, Merchant} -> Summarizer.
TopologyGraph parallel();

// Complete DAG over Judger, Doctor, Engineer, Lawyer, Merchant, Summarizer.
TopologyGraph fully_connected();

// Serially connects `rounds` copies of fully_connected(); each unit's Judger
// receives the previous unit's Summarizer. Checkpoints are the first Judger
// and every unit's Summarizer.
TopologyGraph iterate_units(int rounds);

// Generic builder for explicit node/edge lists. Layers and the final node are
// derived; throws on cycles or dangling edges.
TopologyGraph custom(std::string name, std::vector<std::pair<int, RoleSpec>> nodes,
                     std::vector<Edge> edges);

// Longest-path layer partition; throws TopologyError(Cycle) on a cycle.
std::vector<std::vector<int>> layering(const TopologyGraph& g);

struct GraphCheck {
  std::string name;
  bool passed = true;
  std::vector<int> offending_nodes;
};

struct GraphReport {
  std::vector<GraphCheck> checks;

  bool ok() const;
  const GraphCheck* find(std::string_view name) const;
};

// Checks: unique-ids, edge-endpoints, acyclic, layer-monotone,
// layer-longest-path, reachability, single-sink, checkpoints.
GraphReport validate_graph(const TopologyGraph& g);

}  // namespace biascascade::topology
