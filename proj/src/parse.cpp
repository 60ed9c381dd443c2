#include <array>
#include <cstdlib>
#include <optional>

#include <json.hpp>

#include "biascascade/agents.hpp"

namespace biascascade::agents {

using json = nlohmann::json;

namespace {

constexpr std::string_view kProbKey = "ChoiceProbabilities";
constexpr std::string_view kReasonKey = "Reason";

// End offset (exclusive) of the brace-balanced object starting at `open`,
// skipping braces inside string literals.
std::optional<std::size_t> matching_brace(std::string_view text, std::size_t open) {
  int depth = 0;
  bool in_string = false;
  for (std::size_t i = open; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      if (c == '\\') {
        ++i;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '{') {
      ++depth;
    } else if (c == '}') {
      if (--depth == 0) return i + 1;
    }
  }
  return std::nullopt;
}

std::optional<double> as_number(const json& v) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    const auto& s = v.get_ref<const std::string&>();
    char* end = nullptr;
    double x = std::strtod(s.c_str(), &end);
    if (end != s.c_str() && *end == '\0') return x;
  }
  return std::nullopt;
}

}  // namespace

std::string_view ParseError::tag() const {
  switch (kind_) {
    case Kind::NoBlock:
      return "no_block";
    case Kind::MissingKey:
      return "missing_key";
    case Kind::NegativeProbability:
      return "negative_probability";
    case Kind::ZeroSum:
      return "zero_sum";
  }
  return "";
}

InformationState parse_state(std::string_view raw) {
  const std::string raw_copy(raw);
  std::optional<std::string> partial;  // first candidate lacking a required key

  for (std::size_t pos = raw.find('{'); pos != std::string_view::npos; pos = raw.find('{', pos + 1)) {
    auto end = matching_brace(raw, pos);
    if (!end) continue;
    json j = json::parse(raw.substr(pos, *end - pos), nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded() || !j.is_object()) continue;
    const bool has_probs = j.contains(kProbKey);
    const bool has_reason = j.contains(kReasonKey);
    if (!has_probs && !has_reason) continue;

    std::string missing;
    std::array<double, 3> values{};
    if (!has_probs || !j[kProbKey].is_object()) {
      missing = std::string(kProbKey);
    } else {
      for (std::size_t i = 0; i < values.size() && missing.empty(); ++i) {
        const std::string key(1, kOptionLabels[i]);
        const auto& probs = j[kProbKey];
        auto v = probs.contains(key) ? as_number(probs[key]) : std::nullopt;
        if (!v) {
          missing = std::string(kProbKey) + "." + key;
        } else {
          values[i] = *v;
        }
      }
    }
    if (missing.empty() &&
        (!has_reason || !j[kReasonKey].is_string() || j[kReasonKey].get_ref<const std::string&>().empty())) {
      missing = std::string(kReasonKey);
    }
    if (!missing.empty()) {
      if (!partial) partial = missing;
      continue;
    }

    for (double v : values) {
      if (v < 0.0) {
        throw ParseError(ParseError::Kind::NegativeProbability, "answer block has a negative probability",
                         raw_copy);
      }
    }
    if (values[0] + values[1] + values[2] <= 0.0) {
      throw ParseError(ParseError::Kind::ZeroSum, "answer block probabilities sum to zero", raw_copy);
    }
    return InformationState{metrics::normalize(values), j[kReasonKey].get<std::string>()};
  }

  if (partial) {
    throw ParseError(ParseError::Kind::MissingKey, "answer block is missing key " + *partial, raw_copy);
  }
  throw ParseError(ParseError::Kind::NoBlock, "no answer block found in response", raw_copy);
}

}  // namespace biascascade::agents
