#include <cstdlib>

#include <httplib.h>
#include <json.hpp>

#include "biascascade/agents.hpp"
#include "biascascade/io.hpp"

namespace biascascade::agents {

using json = nlohmann::ordered_json;

std::string_view to_string(BackendKind kind) {
  switch (kind) {
    case BackendKind::Http:
      return "http";
    case BackendKind::Replay:
      return "replay";
    case BackendKind::Synthetic:
      return "synthetic";
  }
  return "";
}

BackendSpec BackendSpec::http(std::string model_id) {
  BackendSpec s;
  s.kind_ = BackendKind::Http;
  s.model_id_ = std::move(model_id);
  return s;
}

BackendSpec BackendSpec::replay(std::filesystem::path fixture_path) {
  BackendSpec s;
  s.kind_ = BackendKind::Replay;
  s.fixture_path_ = std::move(fixture_path);
  return s;
}

BackendSpec BackendSpec::synthetic(SyntheticParams params) {
  if (!(params.conformity >= 0.0)) {
    throw BackendError(BackendError::Kind::Config, "synthetic conformity must be >= 0");
  }
  if (params.noise_concentration && !(*params.noise_concentration > 0.0)) {
    throw BackendError(BackendError::Kind::Config, "synthetic noise concentration must be > 0");
  }
  BackendSpec s;
  s.kind_ = BackendKind::Synthetic;
  s.params_ = params;
  return s;
}

// ---------------------------------------------------------------------------
// HTTP chat completions

HttpEndpoint HttpEndpoint::from_env() {
  const char* base = std::getenv(kApiBaseEnv);
  const char* key = std::getenv(kApiKeyEnv);
  if (!base || !*base) {
    throw BackendError(BackendError::Kind::Config, std::string(kApiBaseEnv) + " is not set");
  }
  if (!key || !*key) {
    throw BackendError(BackendError::Kind::Config, std::string(kApiKeyEnv) + " is not set");
  }
  return HttpEndpoint{base, key};
}

std::string chat_request_body(const std::string& model, const Prompt& prompt, double temperature) {
  json messages = json::array();
  if (!prompt.system.empty()) messages.push_back({{"role", "system"}, {"content", prompt.system}});
  messages.push_back({{"role", "user"}, {"content", prompt.user}});
  json body{{"model", model}, {"messages", std::move(messages)}, {"temperature", temperature}};
  return body.dump(-1, ' ', false, json::error_handler_t::replace);
}

std::string invoke_http(const BackendSpec& spec, const HttpEndpoint& endpoint, const Prompt& prompt,
                        double temperature) {
  if (spec.kind() != BackendKind::Http) {
    throw BackendError(BackendError::Kind::Config, "invoke_http called with a non-http backend");
  }
  // Split "scheme://host[:port]/prefix" into the client origin and path.
  const auto& base = endpoint.base_url;
  const auto scheme_end = base.find("://");
  if (scheme_end == std::string::npos) {
    throw BackendError(BackendError::Kind::Config, "API base must include a scheme: " + base);
  }
  const auto path_start = base.find('/', scheme_end + 3);
  const std::string origin = base.substr(0, path_start);
  std::string path = path_start == std::string::npos ? "" : base.substr(path_start);
  while (!path.empty() && path.back() == '/') path.pop_back();
  if (!path.ends_with("/chat/completions")) path += "/chat/completions";

  httplib::Client client(origin);
  if (!client.is_valid()) throw BackendError(BackendError::Kind::Config, "unsupported API base: " + base);
  client.set_connection_timeout(30);
  client.set_read_timeout(600);
  client.set_bearer_token_auth(endpoint.api_key);

  auto res = client.Post(path, chat_request_body(spec.model_id(), prompt, temperature), "application/json");
  if (!res) {
    throw BackendError(BackendError::Kind::Transport,
                       "request to " + origin + path + " failed: " + httplib::to_string(res.error()));
  }
  if (res->status < 200 || res->status >= 300) {
    throw BackendError(BackendError::Kind::Status, "chat completion returned status " + std::to_string(res->status),
                       res->status);
  }
  auto body = json::parse(res->body, nullptr, false);
  if (body.is_discarded() || !body.is_object()) {
    throw BackendError(BackendError::Kind::MalformedResponse, "chat completion body is not a JSON object",
                       res->status);
  }
  if (!body.contains("choices") || !body["choices"].is_array() || body["choices"].empty()) {
    throw BackendError(BackendError::Kind::EmptyCandidates, "chat completion returned no choices", res->status);
  }
  const auto& choice = body["choices"][0];
  if (!choice.contains("message") || !choice["message"].contains("content") ||
      !choice["message"]["content"].is_string()) {
    throw BackendError(BackendError::Kind::MalformedResponse, "first choice has no message content", res->status);
  }
  return choice["message"]["content"].get<std::string>();
}

std::string invoke_http(const BackendSpec& spec, const Prompt& prompt, double temperature) {
  return invoke_http(spec, HttpEndpoint::from_env(), prompt, temperature);
}

// ---------------------------------------------------------------------------
// Replay fixtures

ReplayFixture ReplayFixture::parse(std::string_view jsonl) {
  ReplayFixture fixture;
  for (const auto& line : io::split_lines(jsonl)) {
    try {
      auto j = json::parse(line.text);
      fixture.add(j.at("scenario_id").get<int>(), j.at("node_id").get<int>(), j.at("raw").get<std::string>());
    } catch (const json::exception& e) {
      throw BackendError(BackendError::Kind::Config,
                         "fixture line " + std::to_string(line.number) + ": " + e.what());
    }
  }
  return fixture;
}

ReplayFixture ReplayFixture::load(const std::filesystem::path& path) {
  try {
    return parse(io::read_file(path));
  } catch (const BackendError&) {
    throw;
  } catch (const Error& e) {
    throw BackendError(BackendError::Kind::Config, e.what());
  }
}

void ReplayFixture::add(int scenario_id, int node_id, std::string raw) {
  entries_[{scenario_id, node_id}] = std::move(raw);
}

const std::string* ReplayFixture::find(int scenario_id, int node_id) const {
  auto it = entries_.find({scenario_id, node_id});
  return it == entries_.end() ? nullptr : &it->second;
}

std::string ReplayFixture::serialize() const {
  std::string out;
  for (const auto& [key, raw] : entries_) {
    json j{{"scenario_id", key.first}, {"node_id", key.second}, {"raw", raw}};
    out += j.dump(-1, ' ', false, json::error_handler_t::replace);
    out += '\n';
  }
  return out;
}

std::string invoke_replay(const ReplayFixture& fixture, int scenario_id, int node_id) {
  if (const auto* raw = fixture.find(scenario_id, node_id)) return *raw;
  throw BackendError(BackendError::Kind::MissingFixture, "no fixture entry for scenario " +
                                                             std::to_string(scenario_id) + ", node " +
                                                             std::to_string(node_id));
}

}  // namespace biascascade::agents
