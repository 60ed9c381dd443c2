#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "biascascade/error.hpp"

namespace biascascade::bench {

class BenchError : public Error {
 public:
  enum class Kind {
    Io,
    Malformed,
    MissingField,
    DuplicateId,
    BadProfileKey,
    TemplateCount,
    QuotaExhausted,
  };

  BenchError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

enum class Gender { Male, Female, NonBinary };
enum class Race { White, Black, Asian, Hispanic, NativeAmerican };

inline constexpr std::array<Gender, 3> kGenders{Gender::Male, Gender::Female, Gender::NonBinary};
inline constexpr std::array<Race, 5> kRaces{Race::White, Race::Black, Race::Asian, Race::Hispanic,
                                            Race::NativeAmerican};
inline constexpr std::array<int, 9> kAges{20, 30, 40, 50, 60, 70, 80, 90, 100};

inline constexpr std::size_t kScenarioCount = 70;
inline constexpr std::size_t kOptionCount = 3;
inline constexpr int kDefaultRaceSlack = 4;
inline constexpr int kDefaultMaxRestarts = 100;

std::string_view to_string(Gender g);
std::string_view to_string(Race r);
std::optional<Gender> parse_gender(std::string_view s);
std::optional<Race> parse_race(std::string_view s);
bool is_valid_age(int age);

struct PronounSet {
  std::string subject;
  std::string object;
  std::string possessive;

  bool operator==(const PronounSet&) const = default;
};

PronounSet pronouns_for(Gender g);

struct DemographicProfile {
  int age = 20;
  Gender gender = Gender::Male;
  Race race = Race::White;
  std::string display_name;
  PronounSet pronouns;

  bool operator==(const DemographicProfile&) const = default;

  // "age-gender-race-name", the key used by the source template format.
  std::string key() const;
  static DemographicProfile from_key(std::string_view key);
};

struct ScenarioTemplate {
  int scenario_id = 0;
  std::string decision_question;
  // Profile key -> fully rendered narrative for that protagonist.
  std::map<std::string, std::string> variants;
  std::string track = "implicit";

  bool operator==(const ScenarioTemplate&) const = default;
};

struct BenchmarkOption {
  char label = 'A';
  DemographicProfile profile;
  std::string text;

  bool operator==(const BenchmarkOption&) const = default;
};

struct BenchmarkQuestion {
  int scenario_id = 0;
  std::array<BenchmarkOption, kOptionCount> options;

  bool operator==(const BenchmarkQuestion&) const = default;
};

struct BalanceReport {
  std::map<int, int> age;
  std::map<Gender, int> gender;
  std::map<Race, int> race;
};

BalanceReport tally_balance(const std::vector<BenchmarkQuestion>& questions);

struct BenchmarkSet {
  std::vector<BenchmarkQuestion> questions;
  std::optional<std::uint64_t> seed;
  BalanceReport balance;

  const BenchmarkQuestion* find(int scenario_id) const;
};

// Remaining race capacity during construction.
class RaceQuotas {
 public:
  RaceQuotas() = default;
  explicit RaceQuotas(std::map<Race, int> remaining) : remaining_(std::move(remaining)) {}

  // Equal capacity ceil(slots / 5) + slack / 2 for every race.
  static RaceQuotas balanced(std::size_t slots, int slack);

  int remaining(Race r) const;
  void consume(Race r);

 private:
  std::map<Race, int> remaining_;
};

std::vector<ScenarioTemplate> ingest_source(const std::filesystem::path& path);
std::vector<ScenarioTemplate> parse_source(std::string_view text);
std::string serialize_templates(const std::vector<ScenarioTemplate>& templates);

// Draws three profiles from the template's variants with pairwise distinct
// age, gender and race, weighting races by remaining quota. Decrements the
// quotas on success.
std::array<DemographicProfile, kOptionCount> sample_profiles(const ScenarioTemplate& tmpl,
                                                             RaceQuotas& quotas,
                                                             std::mt19937_64& rng);

BenchmarkSet build_benchmark(const std::vector<ScenarioTemplate>& templates, std::uint64_t seed,
                             int race_slack = kDefaultRaceSlack,
                             int max_restarts = kDefaultMaxRestarts);

struct ValidationCheck {
  std::string name;
  bool passed = true;
  std::vector<int> offending_ids;
  std::string detail;
};

struct ValidationReport {
  std::vector<ValidationCheck> checks;

  bool ok() const;
  const ValidationCheck* find(std::string_view name) const;
  // Passes when every question-level check passes, ignoring set-level count
  // and balance checks.
  bool questions_ok() const;
};

ValidationReport validate_benchmark(const BenchmarkSet& set, int race_slack = kDefaultRaceSlack);

std::string serialize_benchmark(const BenchmarkSet& set);
BenchmarkSet parse_benchmark(std::string_view text);
BenchmarkSet load_benchmark(const std::filesystem::path& path);
void write_benchmark(const BenchmarkSet& set, const std::filesystem::path& path);

}  // namespace biascascade::bench
