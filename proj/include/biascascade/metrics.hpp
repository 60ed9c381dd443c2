#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "biascascade/error.hpp"

namespace biascascade::metrics {

// Sum-to-one tolerance for a valid distribution.
inline constexpr double kSumTolerance = 1e-9;

class MetricError : public Error {
 public:
  enum class Kind { TooFewEntries, NegativeEntry, ZeroSum, NotNormalized, UnknownName };

  MetricError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

// Probability vector over k >= 2 options. Construction enforces the simplex
// invariants, so every instance is a valid distribution.
class ChoiceDistribution {
 public:
  // Validates entries >= 0 and |sum - 1| <= kSumTolerance; does not rescale.
  explicit ChoiceDistribution(std::vector<double> probs);

  static ChoiceDistribution uniform(std::size_t k = 3);

  std::span<const double> probs() const noexcept { return probs_; }
  std::size_t size() const noexcept { return probs_.size(); }
  double operator[](std::size_t i) const { return probs_[i]; }

  bool operator==(const ChoiceDistribution&) const = default;

 private:
  std::vector<double> probs_;
};

enum class GiniConvention {
  Population,       // cumulative-sum form, divisor k; max (k-1)/k
  SampleCorrected,  // rank-weighted form, divisor k-1; max 1
};

enum class Metric { Gini, Variance, Entropy };

struct BiasVector {
  std::vector<double> deltas;
};

// Rescales non-negative raw scores to sum to one.
ChoiceDistribution normalize(std::span<const double> raw);

double gini(const ChoiceDistribution& p, GiniConvention convention = GiniConvention::Population);

// Population variance of the entries about 1/k.
double variance(const ChoiceDistribution& p);

// Shannon entropy in bits, with 0 log 0 = 0.
double entropy(const ChoiceDistribution& p);

BiasVector bias_vector(const ChoiceDistribution& p);

// q proportional to p^gamma. gamma == 1 returns p unchanged.
ChoiceDistribution sharpen(const ChoiceDistribution& p, double gamma);

// Dispatch used by the analysis layer. Convention only affects Gini.
double evaluate(Metric metric, const ChoiceDistribution& p, GiniConvention convention);

std::string_view to_string(GiniConvention convention);
std::string_view to_string(Metric metric);
GiniConvention parse_convention(std::string_view name);
Metric parse_metric(std::string_view name);

}  // namespace biascascade::metrics
