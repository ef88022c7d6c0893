// specgrad: run configured experiments, reproduce the benchmark tables, the
// subgradient rank blow-up example, and the built-in property suites.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "specgrad/checks.hpp"
#include "specgrad/harness.hpp"
#include "specgrad/subgradient.hpp"

namespace {

using namespace specgrad;

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;
constexpr int kExitNumerical = 3;

int emit_rows(const std::vector<ResultRow>& rows, const std::string& out) {
  if (out.empty() || out == "-") {
    write_csv(std::cout, rows);
    return 0;
  }
  std::ofstream f(out);
  if (!f) {
    std::cerr << "error: cannot write '" << out << "'\n";
    return kExitFailure;
  }
  write_csv(f, rows);
  std::cerr << "wrote " << rows.size() << " rows to " << out << "\n";
  return 0;
}

int cmd_solve(const std::string& path, const std::string& out_override, std::size_t jobs_override) {
  ExperimentConfig cfg;
  try {
    cfg = load_config(path);
    apply_seed_override(cfg);
  } catch (const InvalidInput& e) {
    std::cerr << "error: " << path << ": " << e.what() << "\n";
    return kExitUsage;
  }
  const std::string out = out_override.empty() ? cfg.output : out_override;
  const std::size_t jobs = jobs_override > 0 ? jobs_override : cfg.jobs;
  try {
    return emit_rows(run_experiments({cfg}, jobs, &std::cerr), out);
  } catch (const NumericalFailure& e) {
    std::cerr << "error: numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const InvalidInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}

int cmd_table(int table, const std::string& scale, std::size_t jobs, const std::string& out, std::size_t trials) {
  try {
    std::uint64_t seed = 0;
    if (const char* env = std::getenv("SPECGRAD_SEED")) seed = std::stoull(env);
    const auto configs = table_configs(table, parse_scale(scale), seed, trials);
    return emit_rows(run_experiments(configs, jobs, &std::cerr), out);
  } catch (const NumericalFailure& e) {
    std::cerr << "error: numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}

void print_spectrum(const Vector& v) {
  std::printf("  spectrum:");
  for (Index i = 0; i < v.size(); ++i) std::printf(" %.10g", v(i));
  std::printf("\n");
}

int cmd_negative_example(Index n, Index k, double eta, std::size_t perturbed, std::uint64_t seed) {
  try {
    const BlowupResult exact = rank_blowup_experiment(n, k, eta, VChoice::ExactZ, seed);
    std::printf("n = %ld, k = %ld, eta = %.10g\n", static_cast<long>(n), static_cast<long>(k), eta);
    std::printf("v = z: rank = %ld\n", static_cast<long>(exact.rank));
    print_spectrum(exact.spectrum);
    Index min_rank = exact.rank;
    for (std::size_t i = 0; i < perturbed; ++i) {
      const auto c = make_counterexample(n, k, eta, VChoice::Perturbed, mix_seed(seed, i));
      const BlowupResult res = rank_blowup_step(c);
      const double align = c.z.dot(c.v);
      std::printf("perturbed v #%zu (<z,v>^2 = %.10g): rank = %ld\n", i, align * align, static_cast<long>(res.rank));
      min_rank = std::min(min_rank, res.rank);
    }
    std::printf("rank = %ld\n", static_cast<long>(min_rank));
    return min_rank >= 2 ? 0 : kExitFailure;
  } catch (const InvalidInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}

int cmd_check(const std::string& suite, std::uint64_t seed) {
  std::vector<CheckOutcome> results;
  if (suite == "gradients") {
    results = check_gradient_suite(seed);
  } else if (suite == "projections") {
    results = check_projections(seed);
  } else if (suite == "certificates") {
    results = check_certificates(seed);
  } else {
    std::cerr << "error: unknown suite '" << suite << "' (expected gradients | projections | certificates)\n";
    return kExitUsage;
  }
  bool ok = true;
  for (const auto& r : results) {
    std::printf("%s  %-48s worst=%.3g tol=%.3g cases=%zu\n", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.worst,
                r.tolerance, r.cases);
    ok = ok && r.passed;
  }
  return ok ? 0 : kExitFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Low-rank extragradient solver for nonsmooth problems over the spectrahedron"};
  app.require_subcommand(1);

  std::string config_path, solve_out;
  std::size_t solve_jobs = 0;
  auto* solve = app.add_subcommand("solve", "Run the trials described by a JSON config");
  solve->add_option("config", config_path, "Experiment config (JSON)")->required();
  solve->add_option("--out", solve_out, "CSV output path (default: config 'output', else stdout)");
  solve->add_option("--jobs", solve_jobs, "Concurrent trials (default: config 'jobs')");

  int table_id = 1;
  std::string scale = "desk", table_out;
  std::size_t table_jobs = 1, table_trials = 10;
  auto* table = app.add_subcommand("table", "Reproduce one of the benchmark tables");
  table->add_option("id", table_id, "Table number")->required()->check(CLI::Range(1, 5));
  table->add_option("--scale", scale, "desk (n <= 200) or full")->check(CLI::IsMember({"desk", "full"}));
  table->add_option("--jobs", table_jobs, "Concurrent trials")->check(CLI::PositiveNumber);
  table->add_option("--out", table_out, "CSV output path (default: stdout)");
  table->add_option("--trials", table_trials, "Trials per row")->check(CLI::PositiveNumber);

  long neg_n = 8, neg_k = 2;
  double neg_eta = 0.5;
  std::size_t neg_perturbed = 5;
  std::uint64_t neg_seed = 0;
  auto* neg = app.add_subcommand("negative-example", "One subgradient step from a near-optimal rank-one point");
  neg->add_option("--n", neg_n, "Dimension")->required();
  neg->add_option("--k", neg_k, "Support size (k <= n/4)")->required();
  neg->add_option("--eta", neg_eta, "Step size (< 2/3)")->required();
  neg->add_option("--perturbed", neg_perturbed, "Additional perturbed starting vectors");
  neg->add_option("--seed", neg_seed, "Seed for the perturbations");

  std::string suite;
  std::uint64_t check_seed = 20240601;
  auto* check = app.add_subcommand("check", "Run a property suite");
  check->add_option("suite", suite, "gradients | projections | certificates")->required();
  check->add_option("--seed", check_seed, "Seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  if (*solve) return cmd_solve(config_path, solve_out, solve_jobs);
  if (*table) return cmd_table(table_id, scale, table_jobs, table_out, table_trials);
  if (*neg) return cmd_negative_example(neg_n, neg_k, neg_eta, neg_perturbed, neg_seed);
  if (*check) return cmd_check(suite, check_seed);
  return kExitUsage;
}
