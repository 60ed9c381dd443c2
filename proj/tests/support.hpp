#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "biascascade/bench.hpp"
#include "biascascade/config.hpp"

namespace testsupport {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

std::string name_for(biascascade::bench::Gender g, biascascade::bench::Race r);

// count templates, each with all 135 age x gender x race variants.
std::vector<biascascade::bench::ScenarioTemplate> synthetic_templates(int count = 70);

// n questions with valid per-question invariants, ids 1..n. n == 70 yields a
// fully balanced set.
biascascade::bench::BenchmarkSet synthetic_benchmark(std::size_t n, std::uint64_t seed = 7);

std::filesystem::path fixture(const std::string& name);

// Synthetic-backend config over the given benchmark and topology.
biascascade::runner::ExperimentConfig synthetic_config(const std::filesystem::path& bench,
                                                       const std::filesystem::path& out_dir,
                                                       const std::string& topology, double gamma,
                                                       std::optional<double> kappa, std::uint64_t seed);

}  // namespace testsupport
