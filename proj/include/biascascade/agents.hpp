#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "biascascade/bench.hpp"
#include "biascascade/error.hpp"
#include "biascascade/metrics.hpp"
#include "biascascade/topology.hpp"

namespace biascascade::agents {

using metrics::ChoiceDistribution;
using topology::RoleSpec;

struct InformationState {
  ChoiceDistribution distribution;
  std::string rationale;

  bool operator==(const InformationState&) const = default;
};

// One predecessor's rationale as it appears in a prompt. Only the text
// travels between agents, never the numeric distribution.
struct Contribution {
  RoleSpec role = RoleSpec::identical();
  std::string label;  // "Judge", "Doctor", "Agent 2", ...
  std::string rationale;
};

struct PromptContext {
  bench::BenchmarkQuestion question;
  std::vector<Contribution> contributions;  // ordered by (layer, node_id)
  std::optional<std::string> perturbation;
  RoleSpec role = RoleSpec::identical();
};

struct Prompt {
  std::string system;
  std::string user;

  bool operator==(const Prompt&) const = default;
};

// Role-specific system prompt; empty for Identical.
std::string_view system_prompt(const RoleSpec& role);

// Label used for "<label>'s analysis:" lines.
std::string contribution_label(const RoleSpec& role);

inline constexpr std::string_view kPerturbationPrefix = "Consider the following information: ";

Prompt render_prompt(const PromptContext& ctx);

// Emits a state in the answer-block format that parse_state accepts.
std::string format_answer(const InformationState& state);

class ParseError : public Error {
 public:
  enum class Kind { NoBlock, MissingKey, NegativeProbability, ZeroSum };

  ParseError(Kind kind, const std::string& what, std::string raw)
      : Error(what), kind_(kind), raw_(std::move(raw)) {}
  Kind kind() const noexcept { return kind_; }
  const std::string& raw() const noexcept { return raw_; }
  std::string_view tag() const;

 private:
  Kind kind_;
  std::string raw_;
};

// Finds the first JSON object carrying ChoiceProbabilities {A, B, C} and
// Reason, optionally inside code fences, and normalizes the probabilities.
InformationState parse_state(std::string_view raw);

// ---------------------------------------------------------------------------
// Backends

enum class BackendKind { Http, Replay, Synthetic };

std::string_view to_string(BackendKind kind);

struct SyntheticParams {
  double conformity = 1.0;                    // gamma >= 0
  std::optional<double> noise_concentration;  // kappa > 0; nullopt = noiseless
  std::uint64_t seed = 0;

  bool operator==(const SyntheticParams&) const = default;
};

class BackendSpec {
 public:
  static BackendSpec http(std::string model_id);
  static BackendSpec replay(std::filesystem::path fixture_path);
  static BackendSpec synthetic(SyntheticParams params);

  BackendKind kind() const noexcept { return kind_; }
  const std::string& model_id() const noexcept { return model_id_; }
  const std::filesystem::path& fixture_path() const noexcept { return fixture_path_; }
  const SyntheticParams& params() const noexcept { return params_; }

  bool operator==(const BackendSpec&) const = default;

 private:
  BackendKind kind_ = BackendKind::Synthetic;
  std::string model_id_;
  std::filesystem::path fixture_path_;
  SyntheticParams params_;
};

class BackendError : public Error {
 public:
  enum class Kind { Config, Transport, Status, EmptyCandidates, MalformedResponse, MissingFixture };

  BackendError(Kind kind, const std::string& what, int status = 0)
      : Error(what), kind_(kind), status_(status) {}
  Kind kind() const noexcept { return kind_; }
  int status() const noexcept { return status_; }

 private:
  Kind kind_;
  int status_;
};

inline constexpr const char* kApiBaseEnv = "BIAS_CASCADE_API_BASE";
inline constexpr const char* kApiKeyEnv = "BIAS_CASCADE_API_KEY";

struct HttpEndpoint {
  std::string base_url;  // e.g. https://api.example.com/v1
  std::string api_key;

  // Reads BIAS_CASCADE_API_BASE / BIAS_CASCADE_API_KEY.
  static HttpEndpoint from_env();
};

// Chat-completion request body for the given prompt.
std::string chat_request_body(const std::string& model, const Prompt& prompt, double temperature);

// POSTs to <base>/chat/completions and returns choices[0].message.content.
// Each call opens its own connection.
std::string invoke_http(const BackendSpec& spec, const HttpEndpoint& endpoint, const Prompt& prompt,
                        double temperature);
std::string invoke_http(const BackendSpec& spec, const Prompt& prompt, double temperature);

// Responses keyed by (scenario_id, node_id), loaded once and read-only.
class ReplayFixture {
 public:
  static ReplayFixture parse(std::string_view jsonl);
  static ReplayFixture load(const std::filesystem::path& path);

  void add(int scenario_id, int node_id, std::string raw);
  const std::string* find(int scenario_id, int node_id) const;
  std::size_t size() const noexcept { return entries_.size(); }
  std::string serialize() const;

 private:
  std::map<std::pair<int, int>, std::string> entries_;
};

std::string invoke_replay(const ReplayFixture& fixture, int scenario_id, int node_id);

inline constexpr std::string_view kOptionLabels = "ABC";

// Mean of the predecessors, sharpened by the conformity exponent, then
// optionally perturbed by a Dirichlet draw concentrated around it. With no
// predecessors the center is uniform.
InformationState synthetic_step(const SyntheticParams& params, std::span<const ChoiceDistribution> predecessors,
                                std::mt19937_64& rng);

// Componentwise mean of distributions of equal length.
ChoiceDistribution mean_distribution(std::span<const ChoiceDistribution> ds);

}  // namespace biascascade::agents
