#include "biascascade/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace biascascade::metrics {

namespace {

// Metrics iterate over the sorted entries so that the floating-point
// summation order, and hence the result, is independent of option order.
std::vector<double> sorted_copy(const ChoiceDistribution& p) {
  std::vector<double> v(p.probs().begin(), p.probs().end());
  std::sort(v.begin(), v.end());
  return v;
}

}  // namespace

ChoiceDistribution::ChoiceDistribution(std::vector<double> probs) : probs_(std::move(probs)) {
  if (probs_.size() < 2) {
    throw MetricError(MetricError::Kind::TooFewEntries, "distribution needs at least 2 entries");
  }
  double sum = 0.0;
  for (double x : probs_) {
    if (!(x >= 0.0) || !std::isfinite(x)) {
      throw MetricError(MetricError::Kind::NegativeEntry, "distribution entry is negative or not finite");
    }
    sum += x;
  }
  if (std::abs(sum - 1.0) > kSumTolerance) {
    throw MetricError(MetricError::Kind::NotNormalized,
                      "distribution entries sum to " + std::to_string(sum) + ", expected 1");
  }
}

ChoiceDistribution ChoiceDistribution::uniform(std::size_t k) {
  return ChoiceDistribution(std::vector<double>(k, 1.0 / static_cast<double>(k)));
}

ChoiceDistribution normalize(std::span<const double> raw) {
  if (raw.size() < 2) {
    throw MetricError(MetricError::Kind::TooFewEntries, "normalize needs at least 2 entries");
  }
  double sum = 0.0;
  for (double x : raw) {
    if (!(x >= 0.0) || !std::isfinite(x)) {
      throw MetricError(MetricError::Kind::NegativeEntry, "normalize: negative or non-finite entry");
    }
    sum += x;
  }
  if (sum <= 0.0) {
    throw MetricError(MetricError::Kind::ZeroSum, "normalize: entries sum to zero");
  }
  std::vector<double> out(raw.size());
  std::transform(raw.begin(), raw.end(), out.begin(), [sum](double x) { return x / sum; });
  return ChoiceDistribution(std::move(out));
}

double gini(const ChoiceDistribution& p, GiniConvention convention) {
  const auto v = sorted_copy(p);
  const auto k = static_cast<double>(v.size());
  double g = 0.0;
  switch (convention) {
    case GiniConvention::Population: {
      // G = (k + 1 - 2 * sum_i S_i / S_k) / k over cumulative sums S_i.
      double cumulative = 0.0;
      double sum_of_cumulative = 0.0;
      for (double x : v) {
        cumulative += x;
        sum_of_cumulative += cumulative;
      }
      g = (k + 1.0 - 2.0 * sum_of_cumulative / cumulative) / k;
      break;
    }
    case GiniConvention::SampleCorrected: {
      // G = sum_l (2l - k - 1) p_(l) / (k - 1), ranks l = 1..k.
      double weighted = 0.0;
      for (std::size_t i = 0; i < v.size(); ++i) {
        weighted += (2.0 * static_cast<double>(i + 1) - k - 1.0) * v[i];
      }
      g = weighted / (k - 1.0);
      break;
    }
  }
  return std::max(g, 0.0);
}

double variance(const ChoiceDistribution& p) {
  const auto v = sorted_copy(p);
  const double mean = 1.0 / static_cast<double>(v.size());
  double acc = 0.0;
  for (double x : v) acc += (x - mean) * (x - mean);
  return acc / static_cast<double>(v.size());
}

double entropy(const ChoiceDistribution& p) {
  double h = 0.0;
  for (double x : sorted_copy(p)) {
    if (x > 0.0) h -= x * std::log2(x);
  }
  return std::max(h, 0.0);
}

BiasVector bias_vector(const ChoiceDistribution& p) {
  const double u = 1.0 / static_cast<double>(p.size());
  BiasVector b;
  b.deltas.reserve(p.size());
  for (double x : p.probs()) b.deltas.push_back(x - u);
  return b;
}

ChoiceDistribution sharpen(const ChoiceDistribution& p, double gamma) {
  if (gamma == 1.0) return p;
  std::vector<double> powered(p.size());
  std::transform(p.probs().begin(), p.probs().end(), powered.begin(),
                 [gamma](double x) { return x > 0.0 ? std::pow(x, gamma) : 0.0; });
  return normalize(powered);
}

double evaluate(Metric metric, const ChoiceDistribution& p, GiniConvention convention) {
  switch (metric) {
    case Metric::Gini:
      return gini(p, convention);
    case Metric::Variance:
      return variance(p);
    case Metric::Entropy:
      return entropy(p);
  }
  return 0.0;
}

std::string_view to_string(GiniConvention convention) {
  return convention == GiniConvention::Population ? "population" : "sample_corrected";
}

std::string_view to_string(Metric metric) {
  switch (metric) {
    case Metric::Gini:
      return "gini";
    case Metric::Variance:
      return "variance";
    case Metric::Entropy:
      return "entropy";
  }
  return "";
}

GiniConvention parse_convention(std::string_view name) {
  if (name == "population") return GiniConvention::Population;
  if (name == "sample_corrected" || name == "sample-corrected" || name == "sample") {
    return GiniConvention::SampleCorrected;
  }
  throw MetricError(MetricError::Kind::UnknownName, "unknown Gini convention: " + std::string(name));
}

Metric parse_metric(std::string_view name) {
  if (name == "gini") return Metric::Gini;
  if (name == "variance") return Metric::Variance;
  if (name == "entropy") return Metric::Entropy;
  throw MetricError(MetricError::Kind::UnknownName, "unknown metric: " + std::string(name));
}

}  // namespace biascascade::metrics
