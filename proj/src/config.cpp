#include "biascascade/config.hpp"

#include <cstdlib>
#include <set>
#include <sstream>

#include "biascascade/io.hpp"

namespace biascascade::runner {

namespace {

using KeyMap = std::map<std::string, std::string>;

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (start <= s.size()) {
    auto end = s.find(sep, start);
    if (end == std::string_view::npos) end = s.size();
    auto part = trim(s.substr(start, end - start));
    if (!part.empty()) parts.push_back(std::move(part));
    start = end + 1;
  }
  return parts;
}

double to_double(const std::string& key, const std::string& value) {
  char* end = nullptr;
  const double x = std::strtod(value.c_str(), &end);
  if (value.empty() || *end != '\0') throw ConfigError("config key '" + key + "' expects a number, got '" + value + "'");
  return x;
}

long long to_int(const std::string& key, const std::string& value) {
  char* end = nullptr;
  const long long x = std::strtoll(value.c_str(), &end, 10);
  if (value.empty() || *end != '\0') {
    throw ConfigError("config key '" + key + "' expects an integer, got '" + value + "'");
  }
  return x;
}

std::uint64_t to_u64(const std::string& key, const std::string& value) {
  char* end = nullptr;
  const unsigned long long x = std::strtoull(value.c_str(), &end, 10);
  if (value.empty() || *end != '\0' || value.front() == '-') {
    throw ConfigError("config key '" + key + "' expects a non-negative integer, got '" + value + "'");
  }
  return x;
}

bool to_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ConfigError("config key '" + key + "' expects true/false, got '" + value + "'");
}

const std::set<std::string> kBackendFields{"kind", "model", "fixture", "conformity", "gamma", "noise", "kappa", "seed"};

agents::BackendSpec make_backend(const KeyMap& keys, std::uint64_t default_seed, const std::string& where) {
  auto get = [&](const std::string& k) -> std::optional<std::string> {
    auto it = keys.find(k);
    return it == keys.end() ? std::nullopt : std::optional(it->second);
  };
  const auto kind = get("kind").value_or("synthetic");
  if (kind == "http") {
    auto model = get("model");
    if (!model) throw ConfigError(where + ": http backend needs a model");
    return agents::BackendSpec::http(*model);
  }
  if (kind == "replay") {
    auto fixture = get("fixture");
    if (!fixture) throw ConfigError(where + ": replay backend needs a fixture");
    return agents::BackendSpec::replay(*fixture);
  }
  if (kind == "synthetic") {
    agents::SyntheticParams params;
    params.seed = default_seed;
    if (auto g = get("conformity") ? get("conformity") : get("gamma")) params.conformity = to_double(where, *g);
    if (auto k = get("noise") ? get("noise") : get("kappa"); k && *k != "noiseless") {
      params.noise_concentration = to_double(where, *k);
    }
    if (auto s = get("seed")) params.seed = to_u64(where, *s);
    try {
      return agents::BackendSpec::synthetic(params);
    } catch (const agents::BackendError& e) {
      throw ConfigError(where + ": " + e.what());
    }
  }
  throw ConfigError(where + ": unknown backend kind '" + kind + "'");
}

void emit_backend(std::ostringstream& out, const std::string& prefix, const agents::BackendSpec& spec) {
  out << prefix << "kind = " << agents::to_string(spec.kind()) << '\n';
  switch (spec.kind()) {
    case agents::BackendKind::Http:
      out << prefix << "model = " << spec.model_id() << '\n';
      break;
    case agents::BackendKind::Replay:
      out << prefix << "fixture = " << spec.fixture_path().string() << '\n';
      break;
    case agents::BackendKind::Synthetic: {
      const auto& p = spec.params();
      out << prefix << "conformity = " << io::format_double(p.conformity) << '\n';
      out << prefix << "noise = "
          << (p.noise_concentration ? io::format_double(*p.noise_concentration) : std::string("noiseless")) << '\n';
      out << prefix << "seed = " << p.seed << '\n';
      break;
    }
  }
}

}  // namespace

topology::TopologyGraph build_topology(const TopologySpec& spec) {
  if (spec.name == "chain") {
    auto roles = spec.chain_roles;
    int n = spec.chain_length;
    if (n == 0) n = roles.empty() ? 4 : static_cast<int>(roles.size());
    if (roles.empty()) roles.assign(static_cast<std::size_t>(std::max(n, 0)), topology::RoleSpec::identical());
    return topology::chain(n, roles);
  }
  if (spec.name == "spindle") return topology::spindle();
  if (spec.name == "parallel") return topology::parallel();
  if (spec.name == "fully_connected") return topology::fully_connected();
  if (spec.name == "iterated") return topology::iterate_units(spec.rounds);
  if (spec.name == "custom") return topology::custom("custom", spec.custom_nodes, spec.custom_edges);
  throw ConfigError("unknown topology '" + spec.name + "'");
}

const agents::BackendSpec& ExperimentConfig::backend_for(int node_id) const {
  auto it = node_backends.find(node_id);
  return it == node_backends.end() ? default_backend : it->second;
}

ExperimentConfig parse_config(std::string_view text) {
  ExperimentConfig config;
  config.source_text = std::string(text);
  KeyMap backend_keys;
  std::map<int, KeyMap> node_keys;

  for (const auto& line : io::split_lines(text)) {
    const auto content = trim(line.text);
    if (content.empty() || content.front() == '#') continue;
    const auto eq = content.find('=');
    const std::string where = "config line " + std::to_string(line.number);
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    const auto key = trim(std::string_view(content).substr(0, eq));
    const auto value = trim(std::string_view(content).substr(eq + 1));

    if (key == "benchmark_path" || key == "benchmark") {
      config.benchmark_path = value;
    } else if (key == "topology") {
      config.topology.name = value;
    } else if (key == "chain_roles") {
      config.topology.chain_roles.clear();
      for (const auto& r : split(value, ',')) config.topology.chain_roles.push_back(topology::RoleSpec::parse(r));
    } else if (key == "chain_length") {
      config.topology.chain_length = static_cast<int>(to_int(key, value));
    } else if (key == "rounds") {
      config.topology.rounds = static_cast<int>(to_int(key, value));
    } else if (key == "nodes") {
      for (const auto& item : split(value, ',')) {
        const auto colon = item.find(':');
        if (colon == std::string::npos) throw ConfigError(where + ": nodes entries are id:Role");
        config.topology.custom_nodes.emplace_back(static_cast<int>(to_int(key, trim(item.substr(0, colon)))),
                                                  topology::RoleSpec::parse(trim(item.substr(colon + 1))));
      }
    } else if (key == "edges") {
      for (const auto& item : split(value, ',')) {
        const auto arrow = item.find("->");
        if (arrow == std::string::npos) throw ConfigError(where + ": edges entries are from->to");
        config.topology.custom_edges.emplace_back(static_cast<int>(to_int(key, trim(item.substr(0, arrow)))),
                                                  static_cast<int>(to_int(key, trim(item.substr(arrow + 2)))));
      }
    } else if (key == "temperature") {
      config.temperature = to_double(key, value);
    } else if (key == "perturbation") {
      if (value.empty()) {
        config.perturbation.reset();
      } else {
        config.perturbation = value;
      }
    } else if (key == "seed") {
      config.seed = to_u64(key, value);
    } else if (key == "max_retries") {
      config.max_retries = static_cast<int>(to_int(key, value));
    } else if (key == "concurrency_limit") {
      config.concurrency_limit = static_cast<int>(to_int(key, value));
    } else if (key == "out_dir") {
      config.out_dir = value;
    } else if (key == "require_full_benchmark") {
      config.require_full_benchmark = to_bool(key, value);
    } else if (key.starts_with("backend.node.")) {
      const auto rest = key.substr(std::string_view("backend.node.").size());
      const auto dot = rest.find('.');
      if (dot == std::string::npos || !kBackendFields.contains(rest.substr(dot + 1))) {
        throw ConfigError(where + ": malformed key '" + key + "'");
      }
      node_keys[static_cast<int>(to_int(key, rest.substr(0, dot)))][rest.substr(dot + 1)] = value;
    } else if (key.starts_with("backend.") && kBackendFields.contains(key.substr(8))) {
      backend_keys[key.substr(8)] = value;
    } else {
      throw ConfigError(where + ": unknown key '" + key + "'");
    }
  }

  if (config.max_retries < 0) throw ConfigError("max_retries must be >= 0");
  if (config.concurrency_limit < 1) throw ConfigError("concurrency_limit must be >= 1");
  config.default_backend = make_backend(backend_keys, config.seed, "backend");
  for (const auto& [id, keys] : node_keys) {
    // Node overrides inherit unspecified fields from the default backend.
    const std::string default_kind = backend_keys.contains("kind") ? backend_keys.at("kind") : "synthetic";
    KeyMap merged = backend_keys;
    if (keys.contains("kind") && keys.at("kind") != default_kind) merged.clear();
    for (const auto& [k, v] : keys) merged[k] = v;
    config.node_backends.emplace(id, make_backend(merged, config.seed, "backend.node." + std::to_string(id)));
  }
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = io::read_file(path);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return parse_config(text);
}

std::string to_config_text(const ExperimentConfig& config) {
  std::ostringstream out;
  out << "benchmark_path = " << config.benchmark_path.string() << '\n';
  const auto& t = config.topology;
  out << "topology = " << t.name << '\n';
  if (t.name == "chain") {
    if (!t.chain_roles.empty()) {
      out << "chain_roles = ";
      for (std::size_t i = 0; i < t.chain_roles.size(); ++i) out << (i ? "," : "") << t.chain_roles[i].name();
      out << '\n';
    }
    if (t.chain_length) out << "chain_length = " << t.chain_length << '\n';
  }
  if (t.name == "iterated") out << "rounds = " << t.rounds << '\n';
  if (t.name == "custom") {
    out << "nodes = ";
    for (std::size_t i = 0; i < t.custom_nodes.size(); ++i) {
      out << (i ? "," : "") << t.custom_nodes[i].first << ':' << t.custom_nodes[i].second.name();
    }
    out << "\nedges = ";
    for (std::size_t i = 0; i < t.custom_edges.size(); ++i) {
      out << (i ? "," : "") << t.custom_edges[i].first << "->" << t.custom_edges[i].second;
    }
    out << '\n';
  }
  out << "temperature = " << io::format_double(config.temperature) << '\n';
  if (config.perturbation) {
    if (config.perturbation->find('\n') != std::string::npos) throw ConfigError("perturbation must be one line");
    out << "perturbation = " << *config.perturbation << '\n';
  }
  out << "seed = " << config.seed << '\n';
  out << "max_retries = " << config.max_retries << '\n';
  out << "concurrency_limit = " << config.concurrency_limit << '\n';
  out << "out_dir = " << config.out_dir.string() << '\n';
  out << "require_full_benchmark = " << (config.require_full_benchmark ? "true" : "false") << '\n';
  emit_backend(out, "backend.", config.default_backend);
  for (const auto& [id, spec] : config.node_backends) {
    emit_backend(out, "backend.node." + std::to_string(id) + ".", spec);
  }
  return out.str();
}

}  // namespace biascascade::runner
