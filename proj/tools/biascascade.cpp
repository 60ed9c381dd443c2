#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "biascascade/analysis.hpp"
#include "biascascade/bench.hpp"
#include "biascascade/config.hpp"
#include "biascascade/io.hpp"
#include "biascascade/metrics.hpp"
#include "biascascade/runner.hpp"

namespace bc = biascascade;

namespace {

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    out.push_back(std::stod(item, &used));
    if (used != item.size()) throw bc::Error("bad number '" + item + "' in --dist");
  }
  return out;
}

std::string show(const std::optional<double>& x) { return x ? bc::io::format_double(*x) : "NA"; }

int build_bench(const std::string& source, std::uint64_t seed, int slack, const std::string& out) {
  const auto templates = bc::bench::ingest_source(source);
  const auto set = bc::bench::build_benchmark(templates, seed, slack);
  bc::bench::write_benchmark(set, out);
  const auto balance = bc::bench::tally_balance(set.questions);
  std::cout << "wrote " << set.questions.size() << " questions to " << out << "\n";
  for (auto g : bc::bench::kGenders) std::cout << "  " << bc::bench::to_string(g) << ' ' << balance.gender.at(g) << "\n";
  for (auto r : bc::bench::kRaces) std::cout << "  " << bc::bench::to_string(r) << ' ' << balance.race.at(r) << "\n";
  return 0;
}

int validate_bench(const std::string& in, int slack) {
  const auto set = bc::bench::load_benchmark(in);
  const auto report = bc::bench::validate_benchmark(set, slack);
  for (const auto& c : report.checks) {
    std::cout << (c.passed ? "ok   " : "FAIL ") << c.name;
    if (!c.detail.empty()) std::cout << " (" << c.detail << ")";
    if (!c.offending_ids.empty()) {
      std::cout << " ids:";
      for (int id : c.offending_ids) std::cout << ' ' << id;
    }
    std::cout << "\n";
  }
  return report.ok() ? 0 : 1;
}

int metric(const std::string& dist, const std::string& kind, const std::string& convention) {
  const auto p = bc::metrics::normalize(parse_list(dist));
  const double v =
      bc::metrics::evaluate(bc::metrics::parse_metric(kind), p, bc::metrics::parse_convention(convention));
  std::printf("%.17g\n", v);
  return 0;
}

int run(const std::string& config_path, bool resume) {
  const auto config = bc::runner::load_config(config_path);
  bc::runner::RunOptions options;
  options.resume = resume;
  const auto art = bc::runner::run_experiment(config, options);
  std::cout << "run " << config.out_dir.string() << ": " << art.scenario_ids.size() << " scenarios, "
            << art.graph.nodes.size() << " nodes, " << art.invocations << " invocations, " << art.failure_count()
            << " failures\n";
  return art.failure_count() == 0 ? 0 : 1;
}

int report(const std::string& run_dir, const std::string& kind, const std::string& convention, const std::string& out,
           const std::string& bench_path) {
  const auto art = bc::runner::load_run(run_dir);
  bc::analysis::ReportOptions options;
  options.metric = bc::metrics::parse_metric(kind);
  options.convention = bc::metrics::parse_convention(convention);
  std::optional<bc::bench::BenchmarkSet> bench;
  if (!bench_path.empty()) {
    bench = bc::bench::load_benchmark(bench_path);
    options.bench = &*bench;
  }
  const auto series = bc::analysis::layer_mean_bias(art, options.metric, options.convention);
  std::cout << "layer,mean,count,beta\n";
  std::optional<bc::analysis::LayerSeries> rel;
  try {
    rel = bc::analysis::relative_series(series);
  } catch (const bc::analysis::AnalysisError& e) {
    std::cerr << "note: " << e.what() << "\n";
  }
  for (std::size_t i = 0; i < series.values.size(); ++i) {
    std::cout << i << ',' << show(series.values[i]) << ',' << series.counts[i] << ','
              << (rel ? show(rel->values[i]) : std::string("NA")) << "\n";
  }
  const std::filesystem::path dest = out.empty() ? std::filesystem::path(run_dir) / "report" : std::filesystem::path(out);
  bc::analysis::emit_report(art, dest, options);
  std::cerr << "report written to " << dest.string() << "\n";
  return 0;
}

int tally(const std::string& run_dir, const std::string& bench_path) {
  const auto art = bc::runner::load_run(run_dir);
  const auto set = bc::bench::load_benchmark(bench_path);
  const auto t = bc::analysis::preference_tally(art, set);
  std::cout << "attribute,value,count\n";
  for (const auto& [a, c] : t.age) std::cout << "age," << a << ',' << c << "\n";
  for (const auto& [g, c] : t.gender) std::cout << "gender," << bc::bench::to_string(g) << ',' << c << "\n";
  for (const auto& [r, c] : t.race) std::cout << "race," << bc::bench::to_string(r) << ',' << c << "\n";
  std::cout << "ties,," << t.ties << "\nexcluded,," << t.excluded.size() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"biascascade: bias amplification lab for multi-agent pipelines"};
  app.require_subcommand(1);

  std::string source, out, in, dist, kind = "gini", convention = "population", config, run_dir, bench_path;
  std::uint64_t seed = 0;
  int slack = bc::bench::kDefaultRaceSlack;
  bool resume = false;

  auto* build = app.add_subcommand("build-bench", "Sample a balanced benchmark from scenario templates");
  build->add_option("--source", source, "Template JSONL")->required();
  build->add_option("--seed", seed, "Sampling seed")->required();
  build->add_option("--race-slack", slack, "Allowed race count spread");
  build->add_option("--out", out, "Benchmark JSONL to write")->required();

  auto* validate = app.add_subcommand("validate-bench", "Check benchmark invariants");
  validate->add_option("--in", in, "Benchmark JSONL")->required();
  validate->add_option("--race-slack", slack, "Allowed race count spread");

  auto* met = app.add_subcommand("metric", "Evaluate a bias metric on one distribution");
  met->add_option("--dist", dist, "Comma separated probabilities")->required();
  met->add_option("--kind", kind, "gini | variance | entropy");
  met->add_option("--convention", convention, "population | sample_corrected");

  auto* runcmd = app.add_subcommand("run", "Execute an experiment");
  runcmd->add_option("--config", config, "Experiment config")->required();
  runcmd->add_flag("--resume", resume, "Continue an existing run directory");

  auto* rep = app.add_subcommand("report", "Layer series and amplification tables for a run");
  rep->add_option("--run", run_dir, "Run directory")->required();
  rep->add_option("--metric", kind, "gini | variance | entropy");
  rep->add_option("--convention", convention, "population | sample_corrected");
  rep->add_option("--out", out, "Report directory (default <run>/report)");
  rep->add_option("--bench", bench_path, "Benchmark, enables tally.csv");

  auto* tal = app.add_subcommand("tally", "Demographic preference tally of the final agent");
  tal->add_option("--run", run_dir, "Run directory")->required();
  tal->add_option("--bench", bench_path, "Benchmark JSONL")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*build) return build_bench(source, seed, slack, out);
    if (*validate) return validate_bench(in, slack);
    if (*met) return metric(dist, kind, convention);
    if (*runcmd) return run(config, resume);
    if (*rep) return report(run_dir, kind, convention, out, bench_path);
    if (*tal) return tally(run_dir, bench_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
