// Acceptance checks 1-12. Prints one PASS/FAIL line per criterion; exits
// non-zero when any criterion fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>

#include "biascascade/agents.hpp"
#include "biascascade/analysis.hpp"
#include "biascascade/bench.hpp"
#include "biascascade/io.hpp"
#include "biascascade/metrics.hpp"
#include "biascascade/runner.hpp"
#include "biascascade/topology.hpp"
#include "support.hpp"

using namespace biascascade;
using metrics::ChoiceDistribution;
using metrics::GiniConvention;
using metrics::Metric;
using testsupport::TempDir;

namespace {

using Clock = std::chrono::steady_clock;

struct Result {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
};

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

std::vector<double> random_simplex(std::mt19937_64& rng) {
  std::exponential_distribution<double> e(1.0);
  std::vector<double> x{e(rng), e(rng), e(rng)};
  const double s = x[0] + x[1] + x[2];
  for (auto& v : x) v /= s;
  return x;
}

runner::ExperimentConfig replay_chain(const std::filesystem::path& out) {
  runner::ExperimentConfig c;
  c.benchmark_path = testsupport::fixture("appendix_chain_bench.jsonl");
  c.out_dir = out;
  c.topology.name = "chain";
  c.topology.chain_length = 4;
  c.require_full_benchmark = false;
  c.default_backend = agents::BackendSpec::replay(testsupport::fixture("appendix_chain_replay.jsonl"));
  return c;
}

bool ratios_agree(const runner::RunArtifact& run) {
  const auto pop = analysis::layer_mean_bias(run, Metric::Gini, GiniConvention::Population);
  const auto sc = analysis::layer_mean_bias(run, Metric::Gini, GiniConvention::SampleCorrected);
  const auto rp = analysis::relative_series(pop);
  const auto rs = analysis::relative_series(sc);
  for (std::size_t i = 0; i < pop.values.size(); ++i) {
    if (std::abs(*rp.values[i] - *rs.values[i]) > 1e-12) return false;
    if (std::abs(analysis::amplification_beta(pop, i) - analysis::amplification_beta(sc, i)) > 1e-12) return false;
    if (i > 0 && std::abs(analysis::amplification_alpha(pop, i) - analysis::amplification_alpha(sc, i)) > 1e-12) {
      return false;
    }
  }
  return true;
}

Result ac1() {
  Result r;
  const auto t = Clock::now();
  const double a = metrics::gini(ChoiceDistribution({0.6, 0.2, 0.2}), GiniConvention::Population);
  const double b = metrics::gini(ChoiceDistribution({0.7, 0.2, 0.1}), GiniConvention::Population);
  const double elapsed = seconds_since(t);
  r.require(std::abs(a - 0.267) <= 5e-4, "gini(0.6,0.2,0.2)=" + fmt(a));
  r.require(std::abs(b - 0.400) <= 5e-4, "gini(0.7,0.2,0.1)=" + fmt(b));
  r.require(elapsed < 1e-3, "runtime " + fmt(elapsed) + "s");
  if (r.pass) r.detail = "0.2667 and 0.4000";
  return r;
}

Result ac2(const std::filesystem::path& work) {
  Result r;
  std::mt19937_64 rng(2);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const ChoiceDistribution p(random_simplex(rng));
    worst = std::max(worst, std::abs(metrics::gini(p, GiniConvention::SampleCorrected) -
                                     1.5 * metrics::gini(p, GiniConvention::Population)));
  }
  r.require(worst <= 1e-12, "max deviation " + fmt(worst));
  r.require(ratios_agree(runner::run_experiment(replay_chain(work / "ac2-replay"))), "replay run ratios differ");
  bench::write_benchmark(testsupport::synthetic_benchmark(70), work / "ac2.jsonl");
  const auto syn = runner::run_experiment(
      testsupport::synthetic_config(work / "ac2.jsonl", work / "ac2-syn", "fully_connected", 1.3, 50.0, 2));
  r.require(ratios_agree(syn), "synthetic run ratios differ");
  if (r.pass) r.detail = "max |SC - 1.5 Pop| = " + fmt(worst);
  return r;
}

Result ac3() {
  Result r;
  const auto u = ChoiceDistribution::uniform(3);
  const ChoiceDistribution d({1.0, 0.0, 0.0});
  r.require(metrics::gini(u, GiniConvention::Population) == 0.0, "uniform population gini");
  r.require(metrics::gini(u, GiniConvention::SampleCorrected) == 0.0, "uniform sample gini");
  r.require(metrics::variance(u) == 0.0, "uniform variance");
  r.require(std::abs(metrics::entropy(u) - std::log2(3.0)) <= 1e-9, "uniform entropy");
  r.require(std::abs(metrics::gini(d, GiniConvention::SampleCorrected) - 1.0) <= 1e-12, "deterministic sample gini");
  r.require(std::abs(metrics::gini(d, GiniConvention::Population) - 2.0 / 3.0) <= 1e-12,
            "deterministic population gini");
  r.require(metrics::entropy(d) == 0.0, "deterministic entropy");
  return r;
}

Result ac4() {
  Result r;
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 100.0);
  double sum_dev = 0.0, ratio_dev = 0.0;
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> raw{u(rng), u(rng), u(rng)};
    const auto p = metrics::normalize(raw);
    sum_dev = std::max(sum_dev, std::abs(p[0] + p[1] + p[2] - 1.0));
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) {
        const double want = raw[a] / raw[b];
        ratio_dev = std::max(ratio_dev, std::abs(p[a] / p[b] - want) / std::max(1.0, want));
      }
    }
  }
  r.require(sum_dev <= 1e-12, "sum deviation " + fmt(sum_dev));
  r.require(ratio_dev <= 1e-9, "ratio deviation " + fmt(ratio_dev));
  auto kind_of = [](std::vector<double> v) {
    try {
      metrics::normalize(v);
    } catch (const metrics::MetricError& e) {
      return static_cast<int>(e.kind());
    }
    return -1;
  };
  r.require(kind_of({0, 0, 0}) == static_cast<int>(metrics::MetricError::Kind::ZeroSum), "zero sum not rejected");
  r.require(kind_of({0.5, -0.1, 0.6}) == static_cast<int>(metrics::MetricError::Kind::NegativeEntry),
            "negative entry not rejected");
  return r;
}

Result ac5(const std::filesystem::path& work) {
  Result r;
  const auto t = Clock::now();
  const auto run = runner::run_experiment(replay_chain(work / "ac5"));
  const double elapsed = seconds_since(t);
  const double probs[4][3] = {{0.2, 0.3, 0.5}, {0.1, 0.3, 0.6}, {0.1, 0.2, 0.7}, {0.1, 0.2, 0.7}};
  for (int n = 1; n <= 4; ++n) {
    const auto* o = run.outcome(1, n);
    bool ok = o && o->ok();
    for (int i = 0; ok && i < 3; ++i) ok = std::abs(o->state->distribution[i] - probs[n - 1][i]) <= 1e-12;
    r.require(ok, "node " + std::to_string(n) + " distribution");
  }
  const auto s = analysis::layer_mean_bias(run, Metric::Gini, GiniConvention::Population);
  const double gini[4] = {0.2, 0.3333, 0.4, 0.4};
  for (int i = 0; i < 4; ++i) {
    r.require(s.values[i] && std::abs(*s.values[i] - gini[i]) <= 1e-4, "layer " + std::to_string(i) + " gini");
  }
  const auto rel = analysis::relative_series(s);
  for (int i = 1; i < 4; ++i) r.require(*rel.values[i] >= *rel.values[i - 1], "relative series decreases");
  r.require(std::abs(*rel.values[3] - 2.0) <= 1e-3, "beta_3=" + fmt(*rel.values[3]));
  r.require(elapsed < 1.0, "runtime " + fmt(elapsed) + "s");
  if (r.pass) r.detail = "beta_3=" + fmt(*rel.values[3]) + " in " + fmt(elapsed) + "s";
  return r;
}

Result ac6() {
  Result r;
  auto shape = [&](const topology::TopologyGraph& g, std::size_t nodes, std::size_t edges, const std::string& name) {
    r.require(g.nodes.size() == nodes && g.edges.size() == edges, name + " shape");
    r.require(topology::validate_graph(g).ok(), name + " invalid");
  };
  shape(topology::chain(4, std::vector<topology::RoleSpec>(4, topology::RoleSpec::identical())), 4, 3, "chain(4)");
  const auto sp = topology::spindle();
  shape(sp, 7, 11, "spindle");
  r.require(sp.predecessors(4) == std::vector<int>{1, 2, 3}, "spindle preds(4)");
  r.require(sp.predecessors(7) == std::vector<int>{1, 4, 5, 6}, "spindle preds(7)");
  shape(topology::parallel(), 6, 8, "parallel");
  shape(topology::fully_connected(), 6, 15, "fully_connected");
  const auto it = topology::iterate_units(4);
  shape(it, 24, 63, "iterate_units(4)");
  r.require(it.checkpoints.size() == 5, "iterate_units(4) checkpoints");
  return r;
}

Result ac7(const std::filesystem::path& work) {
  Result r;
  const auto t = Clock::now();
  bench::write_benchmark(testsupport::synthetic_benchmark(70), work / "ac7.jsonl");
  const auto fc = runner::run_experiment(
      testsupport::synthetic_config(work / "ac7.jsonl", work / "ac7-fc", "fully_connected", 1.3, 50.0, 7));
  const auto fs = analysis::layer_mean_bias(fc, Metric::Gini);
  const double beta = analysis::amplification_beta(fs, fs.values.size() - 1);
  r.require(beta > 1.0, "fully_connected beta=" + fmt(beta));

  auto cc = testsupport::synthetic_config(work / "ac7.jsonl", work / "ac7-chain", "chain", 1.3, 50.0, 7);
  cc.topology.chain_length = 4;
  const auto ch = analysis::layer_mean_bias(runner::run_experiment(cc), Metric::Gini);
  std::string series;
  for (std::size_t i = 0; i < ch.values.size(); ++i) {
    series += (i ? "," : "") + fmt(*ch.values[i]);
    if (i > 0) r.require(*ch.values[i] > *ch.values[i - 1], "chain series not increasing");
  }
  r.require(ch.values.size() == 4, "chain layers");
  const double elapsed = seconds_since(t);
  r.require(elapsed < 10.0, "runtime " + fmt(elapsed) + "s");
  if (r.pass) r.detail = "beta=" + fmt(beta) + ", chain gini " + series;
  return r;
}

Result ac8(const std::filesystem::path& work) {
  Result r;
  bench::write_benchmark(testsupport::synthetic_benchmark(70), work / "ac8a.jsonl");
  const auto quiet = runner::run_experiment(
      testsupport::synthetic_config(work / "ac8a.jsonl", work / "ac8-quiet", "fully_connected", 1.0, std::nullopt, 8));
  const auto qs = analysis::layer_mean_bias(quiet, Metric::Gini);
  for (const auto& v : qs.values) r.require(v && *v == 0.0, "noiseless layer gini " + fmt(v.value_or(-1)));
  bool degenerate = false;
  try {
    analysis::relative_series(qs);
  } catch (const analysis::AnalysisError& e) {
    degenerate = e.kind() == analysis::AnalysisError::Kind::ZeroBaseline;
  }
  r.require(degenerate, "zero baseline not reported");

  bench::write_benchmark(testsupport::synthetic_benchmark(500), work / "ac8b.jsonl");
  const auto noisy = runner::run_experiment(
      testsupport::synthetic_config(work / "ac8b.jsonl", work / "ac8-noisy", "fully_connected", 1.0, 50.0, 8));
  const auto ns = analysis::layer_mean_bias(noisy, Metric::Gini);
  const double beta = analysis::amplification_beta(ns, ns.values.size() - 1);
  r.require(beta >= 0.9 && beta <= 1.1, "noisy final beta=" + fmt(beta) + " outside [0.9, 1.1]");
  if (r.pass) r.detail = "noisy final beta=" + fmt(beta);
  return r;
}

Result ac9() {
  Result r;
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> g(1.0, 4.0);
  int violations = 0;
  for (int i = 0; i < 1000; ++i) {
    const ChoiceDistribution p(random_simplex(rng));
    const auto q = metrics::sharpen(p, g(rng));
    for (auto c : {GiniConvention::Population, GiniConvention::SampleCorrected}) {
      violations += metrics::gini(q, c) < metrics::gini(p, c) - 1e-12;
    }
    violations += metrics::entropy(q) > metrics::entropy(p) + 1e-12;
  }
  r.require(violations == 0, std::to_string(violations) + " violations");
  return r;
}

Result ac10() {
  Result r;
  const auto templates = testsupport::synthetic_templates(70);
  const auto set = bench::build_benchmark(templates, 7);
  r.require(set.questions.size() == 70, "question count");
  std::size_t profiles = 0;
  for (const auto& q : set.questions) profiles += q.options.size();
  r.require(profiles == 210, "profile count");
  for (auto g : bench::kGenders) r.require(set.balance.gender.at(g) == 70, "gender balance");
  int lo = 1 << 30, hi = 0;
  for (auto race : bench::kRaces) {
    lo = std::min(lo, set.balance.race.at(race));
    hi = std::max(hi, set.balance.race.at(race));
  }
  r.require(hi - lo <= 4, "race spread " + std::to_string(hi - lo));
  r.require(bench::validate_benchmark(set).ok(), "validation");
  r.require(bench::serialize_benchmark(bench::build_benchmark(templates, 7)) == bench::serialize_benchmark(set),
            "rebuild differs");
  if (r.pass) r.detail = "race spread " + std::to_string(hi - lo);
  return r;
}

Result ac11(const std::filesystem::path& work) {
  Result r;
  auto c = testsupport::synthetic_config(testsupport::fixture("appendix_chain_bench.jsonl"), work / "ac11", "chain",
                                         1.0, std::nullopt, 11);
  c.topology.chain_roles = {topology::RoleSpec::of(topology::Function::Judger),
                            topology::RoleSpec::of(topology::Persona::Doctor),
                            topology::RoleSpec::of(topology::Persona::Lawyer),
                            topology::RoleSpec::of(topology::Function::Summarizer)};
  const auto plain = runner::run_experiment(c);
  auto user_of = [](const runner::RunArtifact& run, int node) {
    for (const auto& t : run.transcripts) {
      if (t.node_id == node) return t.user;
    }
    return std::string();
  };
  r.require(user_of(plain, 1).find("Please judge which protagonist should be prioritized") != std::string::npos,
            "first agent anchor");
  r.require(user_of(plain, 2).find("A judge has analyzed these scenarios") != std::string::npos,
            "second agent anchor");
  c.out_dir = work / "ac11-perturbed";
  c.perturbation = "Innovative achievements are often accomplished by young people in society.";
  const auto perturbed = runner::run_experiment(c);
  const std::string anchor =
      "Consider the following information: Innovative achievements are often accomplished by young people in society.";
  for (int n = 1; n <= 4; ++n) {
    r.require(user_of(perturbed, n).find(anchor) != std::string::npos, "perturbation anchor at node " + std::to_string(n));
  }
  return r;
}

Result ac12(const std::filesystem::path& work) {
  Result r;
  bench::write_benchmark(testsupport::synthetic_benchmark(70), work / "ac12.jsonl");
  const auto base = testsupport::synthetic_config(work / "ac12.jsonl", work / "ac12-a", "spindle", 1.3, 50.0, 12);
  runner::run_experiment(base);
  auto twice = base;
  twice.out_dir = work / "ac12-b";
  runner::run_experiment(twice);
  const auto a = io::read_file(work / "ac12-a" / runner::kStatesFile);
  r.require(a == io::read_file(work / "ac12-b" / runner::kStatesFile), "repeat run differs");

  auto part = base;
  part.out_dir = work / "ac12-c";
  runner::RunOptions half;
  half.stop_after_scenarios = 35;
  runner::run_experiment(part, half);
  runner::resume(work / "ac12-c");
  r.require(a == io::read_file(work / "ac12-c" / runner::kStatesFile), "resumed run differs");
  return r;
}

}  // namespace

int main() {
  TempDir work("acceptance");
  const std::vector<std::function<Result()>> criteria{
      ac1,
      [&] { return ac2(work.path()); },
      ac3,
      ac4,
      [&] { return ac5(work.path()); },
      ac6,
      [&] { return ac7(work.path()); },
      [&] { return ac8(work.path()); },
      ac9,
      ac10,
      [&] { return ac11(work.path()); },
      [&] { return ac12(work.path()); },
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Result r;
    try {
      r = criteria[i]();
    } catch (const std::exception& e) {
      r.pass = false;
      r.detail = std::string("exception: ") + e.what();
    }
    failed += !r.pass;
    std::printf("AC%zu %s%s%s\n", i + 1, r.pass ? "PASS" : "FAIL", r.detail.empty() ? "" : "  ", r.detail.c_str());
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
