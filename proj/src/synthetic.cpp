#include <algorithm>
#include <random>

#include "biascascade/agents.hpp"

namespace biascascade::agents {

ChoiceDistribution mean_distribution(std::span<const ChoiceDistribution> ds) {
  if (ds.size() == 1) return ds.front();
  std::vector<double> sum(ds.front().size(), 0.0);
  for (const auto& d : ds) {
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += d[i];
  }
  for (auto& x : sum) x /= static_cast<double>(ds.size());
  return ChoiceDistribution(std::move(sum));
}

InformationState synthetic_step(const SyntheticParams& params, std::span<const ChoiceDistribution> predecessors,
                                std::mt19937_64& rng) {
  const ChoiceDistribution center = predecessors.empty()
                                        ? ChoiceDistribution::uniform(kOptionLabels.size())
                                        : metrics::sharpen(mean_distribution(predecessors), params.conformity);

  ChoiceDistribution out = center;
  if (params.noise_concentration) {
    // Dirichlet(kappa * center) via normalized Gamma draws; zero components stay zero.
    std::vector<double> draws(center.size(), 0.0);
    for (std::size_t i = 0; i < draws.size(); ++i) {
      const double alpha = *params.noise_concentration * center[i];
      if (alpha > 0.0) draws[i] = std::gamma_distribution<double>(alpha, 1.0)(rng);
    }
    double total = 0.0;
    for (double x : draws) total += x;
    if (total > 0.0) out = metrics::normalize(draws);
  }

  const auto probs = out.probs();
  const auto best = static_cast<std::size_t>(std::max_element(probs.begin(), probs.end()) - probs.begin());
  std::string rationale = "I concur that option ";
  rationale += kOptionLabels[std::min(best, kOptionLabels.size() - 1)];
  rationale += " is strongest.";
  return InformationState{std::move(out), std::move(rationale)};
}

}  // namespace biascascade::agents
