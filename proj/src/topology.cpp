#include "biascascade/topology.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <set>

namespace biascascade::topology {

namespace {

constexpr std::pair<Persona, std::string_view> kPersonaNames[] = {
    {Persona::Doctor, "Doctor"},
    {Persona::Lawyer, "Lawyer"},
    {Persona::Engineer, "Engineer"},
    {Persona::Merchant, "Merchant"},
};

constexpr std::pair<Function, std::string_view> kFunctionNames[] = {
    {Function::Judger, "Judger"},
    {Function::Analyst, "Analyst"},
    {Function::Reflector, "Reflector"},
    {Function::Summarizer, "Summarizer"},
};

// Longest-path depth per node id via Kahn's algorithm. Returns nullopt if a
// cycle prevents every node from being ordered.
std::optional<std::map<int, int>> longest_path_layers(const std::vector<int>& ids,
                                                      const std::vector<Edge>& edges) {
  std::map<int, int> indegree, depth;
  std::map<int, std::vector<int>> out;
  for (int id : ids) {
    indegree[id] = 0;
    depth[id] = 0;
  }
  for (const auto& [u, v] : edges) {
    if (!indegree.contains(u) || !indegree.contains(v)) continue;
    out[u].push_back(v);
    ++indegree[v];
  }
  std::deque<int> ready;
  for (const auto& [id, d] : indegree) {
    if (d == 0) ready.push_back(id);
  }
  std::size_t visited = 0;
  while (!ready.empty()) {
    int u = ready.front();
    ready.pop_front();
    ++visited;
    for (int v : out[u]) {
      depth[v] = std::max(depth[v], depth[u] + 1);
      if (--indegree[v] == 0) ready.push_back(v);
    }
  }
  if (visited != ids.size()) return std::nullopt;
  return depth;
}

std::vector<int> node_ids(const TopologyGraph& g) {
  std::vector<int> ids;
  ids.reserve(g.nodes.size());
  for (const auto& n : g.nodes) ids.push_back(n.node_id);
  return ids;
}

// Assigns layers from the edge set and picks the unique sink as final node.
void finalize(TopologyGraph& g) {
  auto layers = longest_path_layers(node_ids(g), g.edges);
  if (!layers) throw TopologyError(TopologyError::Kind::Cycle, "topology '" + g.name + "' has a cycle");
  for (auto& n : g.nodes) n.layer = layers->at(n.node_id);
  std::set<int> has_out;
  for (const auto& e : g.edges) has_out.insert(e.first);
  for (const auto& n : g.nodes) {
    if (!has_out.contains(n.node_id)) g.final_node = n.node_id;
  }
}

AgentNode make_node(int id, RoleSpec role) { return AgentNode{id, role, 0, "default"}; }

// The five-member order shared by parallel and fully-connected units.
std::vector<RoleSpec> unit_roles() {
  return {RoleSpec::of(Function::Judger),  RoleSpec::of(Persona::Doctor),
          RoleSpec::of(Persona::Engineer), RoleSpec::of(Persona::Lawyer),
          RoleSpec::of(Persona::Merchant), RoleSpec::of(Function::Summarizer)};
}

}  // namespace

RoleSpec RoleSpec::parse(std::string_view name) {
  if (name == "Identical") return identical();
  for (const auto& [p, n] : kPersonaNames) {
    if (n == name) return of(p);
  }
  for (const auto& [f, n] : kFunctionNames) {
    if (n == name) return of(f);
  }
  throw TopologyError(TopologyError::Kind::UnknownRole, "unknown role: " + std::string(name));
}

std::string RoleSpec::name() const {
  if (persona_) {
    for (const auto& [p, n] : kPersonaNames) {
      if (p == *persona_) return std::string(n);
    }
  }
  if (function_) {
    for (const auto& [f, n] : kFunctionNames) {
      if (f == *function_) return std::string(n);
    }
  }
  return "Identical";
}

const AgentNode* TopologyGraph::node(int id) const {
  for (const auto& n : nodes) {
    if (n.node_id == id) return &n;
  }
  return nullptr;
}

std::vector<int> TopologyGraph::predecessors(int id) const {
  std::vector<const AgentNode*> preds;
  for (const auto& [u, v] : edges) {
    if (v == id) {
      if (const auto* n = node(u)) preds.push_back(n);
    }
  }
  std::sort(preds.begin(), preds.end(), [](const AgentNode* a, const AgentNode* b) {
    return std::pair(a->layer, a->node_id) < std::pair(b->layer, b->node_id);
  });
  std::vector<int> ids;
  for (const auto* n : preds) ids.push_back(n->node_id);
  return ids;
}

std::vector<int> TopologyGraph::successors(int id) const {
  std::vector<int> out;
  for (const auto& [u, v] : edges) {
    if (u == id) out.push_back(v);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<int> TopologyGraph::execution_order() const {
  std::vector<const AgentNode*> sorted;
  for (const auto& n : nodes) sorted.push_back(&n);
  std::sort(sorted.begin(), sorted.end(), [](const AgentNode* a, const AgentNode* b) {
    return std::pair(a->layer, a->node_id) < std::pair(b->layer, b->node_id);
  });
  std::vector<int> ids;
  for (const auto* n : sorted) ids.push_back(n->node_id);
  return ids;
}

TopologyGraph chain(int n, const std::vector<RoleSpec>& roles) {
  if (n < 1) throw TopologyError(TopologyError::Kind::InvalidArgument, "chain length must be >= 1");
  if (roles.size() != static_cast<std::size_t>(n)) {
    throw TopologyError(TopologyError::Kind::RoleCountMismatch,
                        "chain of " + std::to_string(n) + " needs " + std::to_string(n) + " roles, got " +
                            std::to_string(roles.size()));
  }
  TopologyGraph g;
  g.name = "chain";
  for (int i = 0; i < n; ++i) {
    g.nodes.push_back(make_node(i + 1, roles[static_cast<std::size_t>(i)]));
    if (i > 0) g.edges.emplace_back(i, i + 1);
  }
  finalize(g);
  return g;
}

TopologyGraph spindle() {
  TopologyGraph g;
  g.name = "spindle";
  g.nodes = {make_node(1, RoleSpec::of(Function::Judger)),     make_node(2, RoleSpec::of(Persona::Doctor)),
             make_node(3, RoleSpec::of(Persona::Engineer)),    make_node(4, RoleSpec::of(Function::Summarizer)),
             make_node(5, RoleSpec::of(Persona::Lawyer)),      make_node(6, RoleSpec::of(Persona::Merchant)),
             make_node(7, RoleSpec::of(Function::Summarizer))};
  g.edges = {{1, 2}, {1, 3}, {1, 4}, {2, 4}, {3, 4}, {4, 5}, {4, 6}, {1, 7}, {4, 7}, {5, 7}, {6, 7}};
  finalize(g);
  return g;
}

TopologyGraph parallel() {
  TopologyGraph g;
  g.name = "parallel";
  const auto roles = unit_roles();
  for (std::size_t i = 0; i < roles.size(); ++i) g.nodes.push_back(make_node(static_cast<int>(i) + 1, roles[i]));
  for (int mid = 2; mid <= 5; ++mid) g.edges.emplace_back(1, mid);
  for (int mid = 2; mid <= 5; ++mid) g.edges.emplace_back(mid, 6);
  finalize(g);
  return g;
}

TopologyGraph fully_connected() {
  TopologyGraph g;
  g.name = "fully_connected";
  const auto roles = unit_roles();
  const int n = static_cast<int>(roles.size());
  for (int i = 0; i < n; ++i) g.nodes.push_back(make_node(i + 1, roles[static_cast<std::size_t>(i)]));
  for (int i = 1; i <= n; ++i) {
    for (int j = i + 1; j <= n; ++j) g.edges.emplace_back(i, j);
  }
  finalize(g);
  return g;
}

TopologyGraph iterate_units(int rounds) {
  if (rounds < 1) throw TopologyError(TopologyError::Kind::InvalidArgument, "rounds must be >= 1");
  const auto unit = fully_connected();
  const int unit_size = static_cast<int>(unit.nodes.size());
  TopologyGraph g;
  g.name = "iterated";
  for (int r = 0; r < rounds; ++r) {
    const int offset = r * unit_size;
    for (const auto& n : unit.nodes) g.nodes.push_back(make_node(n.node_id + offset, n.role));
    for (const auto& [u, v] : unit.edges) g.edges.emplace_back(u + offset, v + offset);
    if (r > 0) g.edges.emplace_back(offset, offset + 1);  // previous Summarizer -> this Judger
    if (r == 0) g.checkpoints.push_back(1);
    g.checkpoints.push_back(offset + unit_size);
  }
  finalize(g);
  return g;
}

TopologyGraph custom(std::string name, std::vector<std::pair<int, RoleSpec>> nodes, std::vector<Edge> edges) {
  TopologyGraph g;
  g.name = std::move(name);
  std::set<int> ids;
  for (const auto& [id, role] : nodes) {
    if (!ids.insert(id).second) {
      throw TopologyError(TopologyError::Kind::InvalidArgument, "duplicate node id " + std::to_string(id));
    }
    g.nodes.push_back(make_node(id, role));
  }
  for (const auto& [u, v] : edges) {
    if (!ids.contains(u) || !ids.contains(v)) {
      throw TopologyError(TopologyError::Kind::UnknownNode,
                          "edge " + std::to_string(u) + "->" + std::to_string(v) + " references unknown node");
    }
  }
  g.edges = std::move(edges);
  finalize(g);
  return g;
}

std::vector<std::vector<int>> layering(const TopologyGraph& g) {
  auto layers = longest_path_layers(node_ids(g), g.edges);
  if (!layers) throw TopologyError(TopologyError::Kind::Cycle, "cannot layer a cyclic graph");
  int depth = 0;
  for (const auto& [id, d] : *layers) depth = std::max(depth, d);
  std::vector<std::vector<int>> partition(g.nodes.empty() ? 0 : static_cast<std::size_t>(depth) + 1);
  for (const auto& [id, d] : *layers) partition[static_cast<std::size_t>(d)].push_back(id);
  return partition;
}

bool GraphReport::ok() const {
  return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
}

const GraphCheck* GraphReport::find(std::string_view name) const {
  for (const auto& c : checks) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

GraphReport validate_graph(const TopologyGraph& g) {
  GraphReport report;
  auto add = [&report](GraphCheck c) {
    c.passed = c.offending_nodes.empty();
    report.checks.push_back(std::move(c));
  };

  std::set<int> ids;
  GraphCheck unique{"unique-ids"};
  for (const auto& n : g.nodes) {
    if (!ids.insert(n.node_id).second) unique.offending_nodes.push_back(n.node_id);
  }
  add(unique);

  GraphCheck endpoints{"edge-endpoints"};
  for (const auto& [u, v] : g.edges) {
    if (!ids.contains(u)) endpoints.offending_nodes.push_back(u);
    if (!ids.contains(v)) endpoints.offending_nodes.push_back(v);
  }
  add(endpoints);

  const auto layers = longest_path_layers(node_ids(g), g.edges);
  GraphCheck acyclic{"acyclic"};
  if (!layers) {
    // Nodes that Kahn's algorithm cannot order lie on or behind a cycle.
    std::map<int, int> indegree;
    std::map<int, std::vector<int>> out;
    for (int id : ids) indegree[id] = 0;
    for (const auto& [u, v] : g.edges) {
      if (ids.contains(u) && ids.contains(v)) {
        out[u].push_back(v);
        ++indegree[v];
      }
    }
    std::deque<int> ready;
    for (const auto& [id, d] : indegree) {
      if (d == 0) ready.push_back(id);
    }
    while (!ready.empty()) {
      int u = ready.front();
      ready.pop_front();
      for (int v : out[u]) {
        if (--indegree[v] == 0) ready.push_back(v);
      }
    }
    for (const auto& [id, d] : indegree) {
      if (d > 0) acyclic.offending_nodes.push_back(id);
    }
  }
  add(acyclic);

  GraphCheck monotone{"layer-monotone"};
  for (const auto& [u, v] : g.edges) {
    const auto* a = g.node(u);
    const auto* b = g.node(v);
    if (a && b && a->layer >= b->layer) monotone.offending_nodes.push_back(v);
  }
  add(monotone);

  GraphCheck longest{"layer-longest-path"};
  if (layers) {
    for (const auto& n : g.nodes) {
      if (layers->at(n.node_id) != n.layer) longest.offending_nodes.push_back(n.node_id);
    }
  }
  add(longest);

  // Every non-source node must be reachable from a source; with more than one
  // node, an isolated node also counts as unreachable.
  GraphCheck reach{"reachability"};
  {
    std::map<int, int> indeg, outdeg;
    std::map<int, std::vector<int>> out;
    for (const auto& [u, v] : g.edges) {
      ++outdeg[u];
      ++indeg[v];
      out[u].push_back(v);
    }
    std::set<int> seen;
    std::deque<int> frontier;
    for (int id : ids) {
      bool source = indeg[id] == 0;
      bool isolated = source && outdeg[id] == 0 && ids.size() > 1;
      if (source && !isolated) {
        seen.insert(id);
        frontier.push_back(id);
      }
    }
    if (ids.size() == 1) seen.insert(*ids.begin());
    while (!frontier.empty()) {
      int u = frontier.front();
      frontier.pop_front();
      for (int v : out[u]) {
        if (seen.insert(v).second) frontier.push_back(v);
      }
    }
    for (int id : ids) {
      if (!seen.contains(id)) reach.offending_nodes.push_back(id);
    }
  }
  add(reach);

  GraphCheck sink{"single-sink"};
  {
    std::set<int> has_out;
    for (const auto& e : g.edges) has_out.insert(e.first);
    std::vector<int> sinks;
    for (int id : ids) {
      if (!has_out.contains(id)) sinks.push_back(id);
    }
    if (sinks.size() != 1) {
      sink.offending_nodes = sinks.empty() ? std::vector<int>{g.final_node} : sinks;
    } else if (sinks.front() != g.final_node) {
      sink.offending_nodes = {g.final_node};
    }
  }
  add(sink);

  GraphCheck checkpoints{"checkpoints"};
  for (int c : g.checkpoints) {
    if (!ids.contains(c)) checkpoints.offending_nodes.push_back(c);
  }
  add(checkpoints);
  return report;
}

}  // namespace biascascade::topology
