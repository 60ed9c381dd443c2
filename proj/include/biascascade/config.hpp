#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "biascascade/agents.hpp"
#include "biascascade/error.hpp"
#include "biascascade/topology.hpp"

namespace biascascade::runner {

class ConfigError : public Error {
 public:
  using Error::Error;
};

struct TopologySpec {
  std::string name = "chain";  // chain | spindle | parallel | fully_connected | iterated | custom
  std::vector<topology::RoleSpec> chain_roles;
  int chain_length = 0;  // 0: derived from chain_roles, or 4 when no roles are given
  int rounds = 4;
  std::vector<std::pair<int, topology::RoleSpec>> custom_nodes;
  std::vector<topology::Edge> custom_edges;
};

topology::TopologyGraph build_topology(const TopologySpec& spec);

// Flat key-value experiment description. Keys:
//   benchmark_path, topology, chain_roles, chain_length, rounds, nodes, edges,
//   temperature, perturbation, seed, max_retries, concurrency_limit, out_dir,
//   require_full_benchmark,
//   backend.{kind,model,fixture,conformity,noise,seed},
//   backend.node.<id>.{kind,model,fixture,conformity,noise,seed}
struct ExperimentConfig {
  std::filesystem::path benchmark_path;
  TopologySpec topology;
  agents::BackendSpec default_backend = agents::BackendSpec::synthetic({});
  std::map<int, agents::BackendSpec> node_backends;
  double temperature = 1.0;
  std::optional<std::string> perturbation;
  std::uint64_t seed = 0;
  int max_retries = 3;
  int concurrency_limit = 1;
  std::filesystem::path out_dir;
  // When false, only question-level benchmark checks gate the run, so
  // subsets or larger synthetic sets can be executed.
  bool require_full_benchmark = true;

  // Verbatim text this config was parsed from, if any.
  std::string source_text;

  const agents::BackendSpec& backend_for(int node_id) const;
};

ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);

// Canonical text form; parse_config(to_config_text(c)) reproduces c.
std::string to_config_text(const ExperimentConfig& config);

}  // namespace biascascade::runner
