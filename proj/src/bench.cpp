#include "biascascade/bench.hpp"

#include <algorithm>
#include <charconv>
#include <set>

#include <json.hpp>

#include "biascascade/io.hpp"

namespace biascascade::bench {

using json = nlohmann::ordered_json;

namespace {

std::string dump(const json& j) { return j.dump(-1, ' ', false, json::error_handler_t::replace); }

json profile_to_json(const DemographicProfile& p) {
  return json{{"age", p.age},
              {"gender", to_string(p.gender)},
              {"race", to_string(p.race)},
              {"name", p.display_name},
              {"pronouns", json::array({p.pronouns.subject, p.pronouns.object, p.pronouns.possessive})}};
}

DemographicProfile profile_from_json(const json& j) {
  DemographicProfile p;
  p.age = j.at("age").get<int>();
  auto g = parse_gender(j.at("gender").get<std::string>());
  auto r = parse_race(j.at("race").get<std::string>());
  if (!g || !r) throw BenchError(BenchError::Kind::Malformed, "unknown gender or race in profile");
  p.gender = *g;
  p.race = *r;
  p.display_name = j.at("name").get<std::string>();
  const auto& pr = j.at("pronouns");
  if (!pr.is_array() || pr.size() != 3) {
    throw BenchError(BenchError::Kind::Malformed, "pronouns must be a 3-element array");
  }
  p.pronouns = {pr[0].get<std::string>(), pr[1].get<std::string>(), pr[2].get<std::string>()};
  return p;
}

// A narrative is taken to mention its protagonist when any token of the
// display name appears in it.
bool mentions_name(const std::string& narrative, const std::string& name) {
  std::size_t start = 0;
  while (start < name.size()) {
    auto end = name.find(' ', start);
    if (end == std::string::npos) end = name.size();
    if (end > start && narrative.find(name.substr(start, end - start)) != std::string::npos) {
      return true;
    }
    start = end + 1;
  }
  return false;
}

}  // namespace

std::string_view to_string(Gender g) {
  switch (g) {
    case Gender::Male:
      return "Male";
    case Gender::Female:
      return "Female";
    case Gender::NonBinary:
      return "NonBinary";
  }
  return "";
}

std::string_view to_string(Race r) {
  switch (r) {
    case Race::White:
      return "White";
    case Race::Black:
      return "Black";
    case Race::Asian:
      return "Asian";
    case Race::Hispanic:
      return "Hispanic";
    case Race::NativeAmerican:
      return "NativeAmerican";
  }
  return "";
}

std::optional<Gender> parse_gender(std::string_view s) {
  for (auto g : kGenders) {
    if (to_string(g) == s) return g;
  }
  return std::nullopt;
}

std::optional<Race> parse_race(std::string_view s) {
  for (auto r : kRaces) {
    if (to_string(r) == s) return r;
  }
  return std::nullopt;
}

bool is_valid_age(int age) { return std::find(kAges.begin(), kAges.end(), age) != kAges.end(); }

PronounSet pronouns_for(Gender g) {
  switch (g) {
    case Gender::Male:
      return {"he", "him", "his"};
    case Gender::Female:
      return {"she", "her", "her"};
    case Gender::NonBinary:
      return {"they", "them", "their"};
  }
  return {};
}

std::string DemographicProfile::key() const {
  return std::to_string(age) + "-" + std::string(to_string(gender)) + "-" + std::string(to_string(race)) +
         "-" + display_name;
}

DemographicProfile DemographicProfile::from_key(std::string_view key) {
  auto bad = [&](const std::string& why) {
    return BenchError(BenchError::Kind::BadProfileKey, "profile key '" + std::string(key) + "': " + why);
  };
  std::array<std::string_view, 3> parts;
  std::string_view rest = key;
  for (auto& part : parts) {
    auto dash = rest.find('-');
    if (dash == std::string_view::npos) throw bad("expected age-gender-race-name");
    part = rest.substr(0, dash);
    rest = rest.substr(dash + 1);
  }
  DemographicProfile p;
  auto [ptr, ec] = std::from_chars(parts[0].data(), parts[0].data() + parts[0].size(), p.age);
  if (ec != std::errc{} || ptr != parts[0].data() + parts[0].size()) throw bad("age is not an integer");
  if (!is_valid_age(p.age)) throw bad("age must be a decade in 20..100");
  auto g = parse_gender(parts[1]);
  if (!g) throw bad("unknown gender");
  auto r = parse_race(parts[2]);
  if (!r) throw bad("unknown race");
  if (rest.empty()) throw bad("empty name");
  p.gender = *g;
  p.race = *r;
  p.display_name = std::string(rest);
  p.pronouns = pronouns_for(p.gender);
  return p;
}

BalanceReport tally_balance(const std::vector<BenchmarkQuestion>& questions) {
  BalanceReport report;
  for (auto g : kGenders) report.gender[g] = 0;
  for (auto r : kRaces) report.race[r] = 0;
  for (const auto& q : questions) {
    for (const auto& o : q.options) {
      ++report.age[o.profile.age];
      ++report.gender[o.profile.gender];
      ++report.race[o.profile.race];
    }
  }
  return report;
}

const BenchmarkQuestion* BenchmarkSet::find(int scenario_id) const {
  for (const auto& q : questions) {
    if (q.scenario_id == scenario_id) return &q;
  }
  return nullptr;
}

RaceQuotas RaceQuotas::balanced(std::size_t slots, int slack) {
  const int base = static_cast<int>((slots + kRaces.size() - 1) / kRaces.size());
  std::map<Race, int> remaining;
  for (auto r : kRaces) remaining[r] = base + std::max(slack, 0) / 2;
  return RaceQuotas(std::move(remaining));
}

int RaceQuotas::remaining(Race r) const {
  auto it = remaining_.find(r);
  return it == remaining_.end() ? 0 : it->second;
}

void RaceQuotas::consume(Race r) {
  auto it = remaining_.find(r);
  if (it != remaining_.end() && it->second > 0) --it->second;
}

// ---------------------------------------------------------------------------
// Source templates

std::vector<ScenarioTemplate> parse_source(std::string_view text) {
  std::vector<ScenarioTemplate> out;
  std::set<int> seen;
  for (const auto& line : io::split_lines(text)) {
    const std::string where = "record on line " + std::to_string(line.number);
    json j;
    try {
      j = json::parse(line.text);
    } catch (const json::parse_error& e) {
      throw BenchError(BenchError::Kind::Malformed, where + ": " + e.what());
    }
    if (!j.is_object()) throw BenchError(BenchError::Kind::Malformed, where + ": not an object");
    for (const char* field : {"scenario_id", "decision_question", "variants"}) {
      if (!j.contains(field)) {
        throw BenchError(BenchError::Kind::MissingField, where + ": missing field '" + field + "'");
      }
    }
    ScenarioTemplate t;
    try {
      t.scenario_id = j.at("scenario_id").get<int>();
      t.decision_question = j.at("decision_question").get<std::string>();
      if (!j.at("variants").is_object()) throw BenchError(BenchError::Kind::Malformed, "variants");
      for (const auto& [key, narrative] : j.at("variants").items()) {
        t.variants.emplace(key, narrative.get<std::string>());
      }
    } catch (const json::exception& e) {
      throw BenchError(BenchError::Kind::Malformed, where + ": " + e.what());
    }
    if (j.contains("track")) t.track = j.at("track").get<std::string>();
    if (!seen.insert(t.scenario_id).second) {
      throw BenchError(BenchError::Kind::DuplicateId,
                       where + ": duplicate scenario_id " + std::to_string(t.scenario_id));
    }
    for (const auto& [key, narrative] : t.variants) {
      auto profile = DemographicProfile::from_key(key);
      if (narrative.empty() || !mentions_name(narrative, profile.display_name)) {
        throw BenchError(BenchError::Kind::Malformed,
                         where + ": variant '" + key + "' does not mention its protagonist");
      }
    }
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<ScenarioTemplate> ingest_source(const std::filesystem::path& path) {
  std::string text;
  try {
    text = io::read_file(path);
  } catch (const Error& e) {
    throw BenchError(BenchError::Kind::Io, e.what());
  }
  return parse_source(text);
}

std::string serialize_templates(const std::vector<ScenarioTemplate>& templates) {
  std::string out;
  for (const auto& t : templates) {
    json variants = json::object();
    for (const auto& [key, narrative] : t.variants) variants[key] = narrative;
    json j{{"scenario_id", t.scenario_id},
           {"decision_question", t.decision_question},
           {"variants", std::move(variants)},
           {"track", t.track}};
    out += dump(j);
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sampling

std::array<DemographicProfile, kOptionCount> sample_profiles(const ScenarioTemplate& tmpl,
                                                             RaceQuotas& quotas,
                                                             std::mt19937_64& rng) {
  std::vector<DemographicProfile> pool;
  pool.reserve(tmpl.variants.size());
  for (const auto& [key, narrative] : tmpl.variants) {
    auto p = DemographicProfile::from_key(key);
    if (quotas.remaining(p.race) > 0) pool.push_back(std::move(p));
  }

  constexpr int kAttempts = 64;
  for (int attempt = 0; attempt < kAttempts; ++attempt) {
    std::array<DemographicProfile, kOptionCount> chosen;
    std::size_t filled = 0;
    for (; filled < kOptionCount; ++filled) {
      std::vector<const DemographicProfile*> eligible;
      std::map<Race, int> per_race;
      for (const auto& p : pool) {
        bool clash = false;
        for (std::size_t i = 0; i < filled; ++i) {
          const auto& c = chosen[i];
          clash |= c.age == p.age || c.gender == p.gender || c.race == p.race;
        }
        if (clash) continue;
        eligible.push_back(&p);
        ++per_race[p.race];
      }
      if (eligible.empty()) break;
      // Race drawn in proportion to remaining quota, then uniform within race.
      std::vector<double> weights;
      weights.reserve(eligible.size());
      for (const auto* p : eligible) {
        weights.push_back(static_cast<double>(quotas.remaining(p->race)) / per_race[p->race]);
      }
      chosen[filled] = *eligible[io::weighted_index(rng, weights)];
    }
    if (filled == kOptionCount) {
      for (const auto& p : chosen) quotas.consume(p.race);
      return chosen;
    }
  }
  throw BenchError(BenchError::Kind::QuotaExhausted,
                   "no feasible distinct profile triple for scenario " + std::to_string(tmpl.scenario_id));
}

BenchmarkSet build_benchmark(const std::vector<ScenarioTemplate>& templates, std::uint64_t seed,
                             int race_slack, int max_restarts) {
  if (templates.size() != kScenarioCount) {
    throw BenchError(BenchError::Kind::TemplateCount, "expected " + std::to_string(kScenarioCount) +
                                                          " templates, got " +
                                                          std::to_string(templates.size()));
  }
  const std::size_t slots = templates.size() * kOptionCount;
  for (int restart = 0; restart <= max_restarts; ++restart) {
    std::mt19937_64 rng(io::mix_seed(seed, static_cast<std::uint64_t>(restart)));
    auto quotas = RaceQuotas::balanced(slots, race_slack);
    BenchmarkSet set;
    set.seed = seed;
    try {
      for (const auto& t : templates) {
        auto profiles = sample_profiles(t, quotas, rng);
        BenchmarkQuestion q;
        q.scenario_id = t.scenario_id;
        for (std::size_t i = 0; i < kOptionCount; ++i) {
          q.options[i] = {static_cast<char>('A' + i), profiles[i], t.variants.at(profiles[i].key())};
        }
        set.questions.push_back(std::move(q));
      }
    } catch (const BenchError& e) {
      if (e.kind() != BenchError::Kind::QuotaExhausted) throw;
      continue;
    }
    set.balance = tally_balance(set.questions);
    auto [lo, hi] = std::minmax_element(set.balance.race.begin(), set.balance.race.end(),
                                        [](const auto& a, const auto& b) { return a.second < b.second; });
    if (hi->second - lo->second <= race_slack) return set;
  }
  throw BenchError(BenchError::Kind::QuotaExhausted,
                   "race balance not reached after " + std::to_string(max_restarts) + " restarts");
}

// ---------------------------------------------------------------------------
// Validation

bool ValidationReport::ok() const {
  return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
}

const ValidationCheck* ValidationReport::find(std::string_view name) const {
  for (const auto& c : checks) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

bool ValidationReport::questions_ok() const {
  static const std::set<std::string> set_level{"count", "gender-balance", "race-balance"};
  return std::all_of(checks.begin(), checks.end(),
                     [](const auto& c) { return c.passed || set_level.contains(c.name); });
}

ValidationReport validate_benchmark(const BenchmarkSet& set, int race_slack) {
  ValidationReport report;
  const auto n = set.questions.size();

  ValidationCheck count{"count", n == kScenarioCount, {}, "count=" + std::to_string(n)};
  report.checks.push_back(count);

  ValidationCheck unique_ids{"unique-ids"};
  ValidationCheck labels{"labels"};
  ValidationCheck age_grid{"age-grid"};
  ValidationCheck text{"text-nonempty"};
  ValidationCheck age_distinct{"age-distinct"};
  ValidationCheck gender_distinct{"gender-distinct"};
  ValidationCheck race_distinct{"race-distinct"};
  std::set<int> ids;
  for (const auto& q : set.questions) {
    const auto id = q.scenario_id;
    if (!ids.insert(id).second) unique_ids.offending_ids.push_back(id);
    std::set<int> ages;
    std::set<Gender> genders;
    std::set<Race> races;
    bool bad_label = false, bad_age = false, bad_text = false;
    for (std::size_t i = 0; i < kOptionCount; ++i) {
      const auto& o = q.options[i];
      bad_label |= o.label != static_cast<char>('A' + i);
      bad_age |= !is_valid_age(o.profile.age);
      bad_text |= o.text.empty();
      ages.insert(o.profile.age);
      genders.insert(o.profile.gender);
      races.insert(o.profile.race);
    }
    if (bad_label) labels.offending_ids.push_back(id);
    if (bad_age) age_grid.offending_ids.push_back(id);
    if (bad_text) text.offending_ids.push_back(id);
    if (ages.size() != kOptionCount) age_distinct.offending_ids.push_back(id);
    if (genders.size() != kOptionCount) gender_distinct.offending_ids.push_back(id);
    if (races.size() != kOptionCount) race_distinct.offending_ids.push_back(id);
  }
  for (auto* c : {&unique_ids, &labels, &age_grid, &text, &age_distinct, &gender_distinct, &race_distinct}) {
    c->passed = c->offending_ids.empty();
    report.checks.push_back(std::move(*c));
  }

  const auto balance = tally_balance(set.questions);
  ValidationCheck gender_balance{"gender-balance"};
  std::string detail;
  for (const auto& [g, c] : balance.gender) {
    gender_balance.passed &= static_cast<std::size_t>(c) == n;
    detail += std::string(to_string(g)) + "=" + std::to_string(c) + " ";
  }
  gender_balance.detail = detail;
  report.checks.push_back(gender_balance);

  ValidationCheck race_balance{"race-balance"};
  int lo = balance.race.begin()->second, hi = lo;
  detail.clear();
  for (const auto& [r, c] : balance.race) {
    lo = std::min(lo, c);
    hi = std::max(hi, c);
    detail += std::string(to_string(r)) + "=" + std::to_string(c) + " ";
  }
  race_balance.passed = hi - lo <= race_slack;
  race_balance.detail = detail + "spread=" + std::to_string(hi - lo);
  report.checks.push_back(race_balance);
  return report;
}

// ---------------------------------------------------------------------------
// Benchmark format

std::string serialize_benchmark(const BenchmarkSet& set) {
  std::string out;
  for (const auto& q : set.questions) {
    json options = json::array();
    for (const auto& o : q.options) {
      options.push_back(json{{"label", std::string(1, o.label)},
                             {"profile", profile_to_json(o.profile)},
                             {"text", o.text}});
    }
    out += dump(json{{"scenario_id", q.scenario_id}, {"options", std::move(options)}});
    out += '\n';
  }
  return out;
}

BenchmarkSet parse_benchmark(std::string_view text) {
  BenchmarkSet set;
  for (const auto& line : io::split_lines(text)) {
    const std::string where = "benchmark line " + std::to_string(line.number);
    try {
      auto j = json::parse(line.text);
      BenchmarkQuestion q;
      q.scenario_id = j.at("scenario_id").get<int>();
      const auto& options = j.at("options");
      if (!options.is_array() || options.size() != kOptionCount) {
        throw BenchError(BenchError::Kind::Malformed, where + ": options must have 3 entries");
      }
      for (std::size_t i = 0; i < kOptionCount; ++i) {
        const auto label = options[i].at("label").get<std::string>();
        q.options[i].label = label.size() == 1 ? label[0] : '?';
        q.options[i].profile = profile_from_json(options[i].at("profile"));
        q.options[i].text = options[i].at("text").get<std::string>();
      }
      set.questions.push_back(std::move(q));
    } catch (const json::exception& e) {
      throw BenchError(BenchError::Kind::Malformed, where + ": " + e.what());
    }
  }
  set.balance = tally_balance(set.questions);
  return set;
}

BenchmarkSet load_benchmark(const std::filesystem::path& path) {
  std::string text;
  try {
    text = io::read_file(path);
  } catch (const Error& e) {
    throw BenchError(BenchError::Kind::Io, e.what());
  }
  return parse_benchmark(text);
}

void write_benchmark(const BenchmarkSet& set, const std::filesystem::path& path) {
  io::write_file_atomic(path, serialize_benchmark(set));
}

}  // namespace biascascade::bench
