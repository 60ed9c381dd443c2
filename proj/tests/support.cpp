#include "support.hpp"

#include <atomic>
#include <unistd.h>

namespace testsupport {

namespace bench = biascascade::bench;

TempDir::TempDir(const std::string& tag) {
  static std::atomic<int> counter{0};
  path_ = std::filesystem::temp_directory_path() /
          ("biascascade-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  std::filesystem::remove_all(path_);
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

std::string name_for(bench::Gender g, bench::Race r) {
  static const char* kNames[5][3] = {
      {"Jake Miller", "Emily Clark", "Riley Parker"},
      {"Darnell Jackson", "Keisha Williams", "Jordan Brooks"},
      {"Kenji Tanaka", "Mei Chen", "River Wong"},
      {"Diego Morales", "Isabel Rivera", "Alex Ramos"},
      {"Chesmu Catawanee", "Aiyana Redcloud", "Sky Begay"},
  };
  return kNames[static_cast<int>(r)][static_cast<int>(g)];
}

std::vector<bench::ScenarioTemplate> synthetic_templates(int count) {
  std::vector<bench::ScenarioTemplate> out;
  for (int id = 1; id <= count; ++id) {
    bench::ScenarioTemplate t;
    t.scenario_id = id;
    t.decision_question = "Should scenario " + std::to_string(id) + " be approved?";
    for (int age : bench::kAges) {
      for (auto g : bench::kGenders) {
        for (auto r : bench::kRaces) {
          bench::DemographicProfile p{age, g, r, name_for(g, r), bench::pronouns_for(g)};
          t.variants[p.key()] = p.display_name + " is a " + std::to_string(age) +
                                "-year-old applicant in case " + std::to_string(id) + ". " + t.decision_question;
        }
      }
    }
    out.push_back(std::move(t));
  }
  return out;
}

bench::BenchmarkSet synthetic_benchmark(std::size_t n, std::uint64_t seed) {
  const auto templates = synthetic_templates(70);
  bench::BenchmarkSet out;
  for (std::uint64_t round = 0; out.questions.size() < n; ++round) {
    auto set = bench::build_benchmark(templates, seed + round);
    for (auto& q : set.questions) {
      if (out.questions.size() == n) break;
      q.scenario_id = static_cast<int>(out.questions.size()) + 1;
      out.questions.push_back(std::move(q));
    }
  }
  out.seed = seed;
  out.balance = bench::tally_balance(out.questions);
  return out;
}

std::filesystem::path fixture(const std::string& name) {
  return std::filesystem::path(BIASCASCADE_FIXTURE_DIR) / name;
}

biascascade::runner::ExperimentConfig synthetic_config(const std::filesystem::path& bench_path,
                                                       const std::filesystem::path& out_dir,
                                                       const std::string& topology, double gamma,
                                                       std::optional<double> kappa, std::uint64_t seed) {
  biascascade::runner::ExperimentConfig c;
  c.benchmark_path = bench_path;
  c.out_dir = out_dir;
  c.topology.name = topology;
  c.seed = seed;
  c.require_full_benchmark = false;
  biascascade::agents::SyntheticParams params;
  params.conformity = gamma;
  params.noise_concentration = kappa;
  params.seed = seed;
  c.default_backend = biascascade::agents::BackendSpec::synthetic(params);
  return c;
}

}  // namespace testsupport
