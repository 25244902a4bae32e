// Command line front end: synthetic and real-data benchmarks, theory checks,
// and the closed-form oracle equivalence suite.
//
// Exit codes: 0 success, 1 invalid input, 2 solver non-convergence (or a
// failed check) in a fatal context.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <random>
#include <sstream>

#include "mtreg/experiments.hpp"
#include "mtreg/io.hpp"
#include "mtreg/linalg.hpp"
#include "mtreg/oracles.hpp"
#include "mtreg/regression.hpp"
#include "mtreg/theory.hpp"

namespace {

using namespace mtreg;

constexpr int kExitOk = 0;
constexpr int kExitInvalidInput = 1;
constexpr int kExitSolverFailure = 2;

std::vector<Method> parse_methods(const std::string& csv) {
  std::vector<Method> methods;
  std::stringstream stream(csv);
  std::string token;
  while (std::getline(stream, token, ',')) {
    if (!token.empty()) methods.push_back(parse_method(token));
  }
  if (methods.empty()) throw std::invalid_argument("empty method list");
  return methods;
}

std::vector<int> parse_int_list(const std::string& csv) {
  std::vector<int> values;
  std::stringstream stream(csv);
  std::string token;
  while (std::getline(stream, token, ',')) {
    if (!token.empty()) values.push_back(std::stoi(token));
  }
  return values;
}

LambdaMode parse_lambda_mode(const std::string& text) {
  LambdaMode mode;
  if (text == "cv") {
    mode.cross_validate = true;
    return mode;
  }
  if (text.rfind("fixed:", 0) == 0) {
    mode.cross_validate = false;
    mode.fixed_value = std::stod(text.substr(6));
    if (mode.fixed_value < 0.0) {
      throw std::invalid_argument("--lambda fixed value must be >= 0");
    }
    return mode;
  }
  throw std::invalid_argument("--lambda must be 'cv' or 'fixed:<value>'");
}

std::map<std::string, std::filesystem::path> parse_external(
    const std::vector<std::string>& entries) {
  std::map<std::string, std::filesystem::path> external;
  for (const std::string& entry : entries) {
    const auto eq = entry.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == entry.size()) {
      throw std::invalid_argument("--external expects label=path, got '" +
                                  entry + "'");
    }
    external[entry.substr(0, eq)] = entry.substr(eq + 1);
  }
  return external;
}

std::string lambda_mode_string(const LambdaMode& mode) {
  if (mode.cross_validate) return "cv";
  std::ostringstream out;
  out << "fixed:" << mode.fixed_value;
  return out.str();
}

int run_bench_synth(const std::string& k_list, SyntheticConfig base,
                    BenchmarkOptions options, const std::string& out_path,
                    const std::string& csv_path) {
  const std::vector<int> ks = parse_int_list(k_list);
  if (ks.empty()) throw std::invalid_argument("--k needs at least one value");
  BenchmarkResult combined;
  for (int k : ks) {
    SyntheticConfig config = base;
    config.k = k;
    const BenchmarkResult result = run_benchmark(config, options);
    combined.rows.insert(combined.rows.end(), result.rows.begin(),
                         result.rows.end());
    combined.records.insert(combined.records.end(), result.records.begin(),
                            result.records.end());
  }
  std::cout << render_table(combined.rows, false);
  std::ostringstream echo;
  echo << "m=" << base.m << " d=" << base.d << " n=" << base.n << " k="
       << k_list << " overlap=" << base.overlap_fraction << " noise-var="
       << base.noise_variance << " corr=" << base.design_correlation
       << " runs=" << options.runs << " seed=" << base.seed;
  if (!out_path.empty()) {
    write_text_file(out_path,
                    benchmark_result_to_json(
                        combined, echo.str(),
                        lambda_mode_string(options.lambda_mode)));
    std::cout << "results written to " << out_path << "\n";
  }
  if (!csv_path.empty()) {
    write_text_file(csv_path, run_records_to_csv(combined.records));
    std::cout << "per-run metrics written to " << csv_path << "\n";
  }
  for (const MetricsRow& row : combined.rows) {
    if (row.runs == 0) {
      std::cerr << "method " << row.method << " failed on every run\n";
      return kExitSolverFailure;
    }
  }
  return kExitOk;
}

int run_bench_real(const std::string& manifest, RealDataOptions options,
                   const std::string& out_path, const std::string& csv_path) {
  const BenchmarkResult result = run_realdata(manifest, options);
  std::cout << render_table(result.rows, true);
  if (!out_path.empty()) {
    write_text_file(out_path, benchmark_result_to_json(
                                  result, "manifest=" + manifest,
                                  lambda_mode_string(options.lambda_mode)));
    std::cout << "results written to " << out_path << "\n";
  }
  if (!csv_path.empty()) {
    write_text_file(csv_path, run_records_to_csv(result.records));
  }
  for (const MetricsRow& row : result.rows) {
    if (row.runs == 0) {
      std::cerr << "method " << row.method << " failed\n";
      return kExitSolverFailure;
    }
  }
  return kExitOk;
}

int run_bench_fetch(const std::string& out_dir) {
  // The reference multi-task regression datasets are not redistributed here.
  // Emit pointers plus a manifest skeleton for hand-converted CSV files.
  std::cout
      << "Reference datasets and where to obtain them:\n"
      << "  sarcos   http://www.gaussianprocess.org/gpml/data/\n"
      << "           (sarcos_inv.mat / sarcos_inv_test.mat; 21 inputs, 7\n"
      << "            torque outputs -> 7 tasks)\n"
      << "  school   https://home.ttic.edu/~argyriou/code/\n"
      << "           (London schools exam scores; 139 tasks)\n"
      << "  computer https://home.ttic.edu/~argyriou/code/\n"
      << "           (conjoint survey of 180 respondents; 20 items each)\n"
      << "Convert each task to CSV with header f0..f{d-1},y (one CSV per\n"
      << "task, shared d), list them in a JSON manifest, and run\n"
      << "  mtreg bench real --manifest <manifest.json> --split 0.75 ...\n";
  if (!out_dir.empty()) {
    const std::filesystem::path dir(out_dir);
    write_text_file(dir / "manifest.template.json",
                    "{\n  \"name\": \"school\",\n  \"tasks\": [\n"
                    "    \"task0.csv\",\n    \"task1.csv\"\n  ]\n}\n");
    std::cout << "manifest template written to "
              << (dir / "manifest.template.json") << "\n";
  }
  return kExitOk;
}

int run_theory_bound(int d, double lambda, double sigma2, int trials,
                     std::uint64_t seed, const std::string& out_path) {
  if (d < 1) throw std::invalid_argument("--d must be >= 1");
  // Shipped example configuration, truncated or zero-padded to d:
  // true diagonal (1, 1, 0, ...), estimate (1.2, 0.8, 0.1, 0, ...).
  Vector bar = Vector::Zero(d);
  Vector hat = Vector::Zero(d);
  const double bar_pattern[] = {1.0, 1.0};
  const double hat_pattern[] = {1.2, 0.8, 0.1};
  for (int j = 0; j < d && j < 2; ++j) bar[j] = bar_pattern[j];
  for (int j = 0; j < d && j < 3; ++j) hat[j] = hat_pattern[j];

  const BoundReport report = prediction_bound_report(
      Matrix::Identity(d, d), DiagonalCovariance(hat),
      DiagonalCovariance(bar), lambda, sigma2, trials, seed);
  std::printf("mismatch omega    %.6e\n", report.mismatch_omega);
  std::printf("lower bound       %.6e\n", report.lower);
  std::printf("upper bound       %.6e\n", report.upper);
  std::printf("optimal term      %.6e\n", report.optimal_term);
  std::printf("mc error          %.6e +/- %.6e (stderr, %d trials)\n",
              report.mc_error_estimate, report.mc_stderr, report.mc_trials);
  std::printf("mc excess         %.6e\n",
              report.mc_error_estimate - report.optimal_term);
  std::printf("simplified upper  %.6e\n", report.simplified_upper);
  std::printf("sandwich          %s\n", report.sandwich_ok ? "ok" : "VIOLATED");
  std::printf("simplified bound  %s\n",
              report.simplified_ok ? "ok" : "VIOLATED");
  if (!out_path.empty()) {
    write_text_file(out_path, bound_report_to_json(report));
  }
  if (!report.sandwich_ok || !report.simplified_ok) {
    std::cerr << "bound check failed: either an implementation bug or "
                 "Monte-Carlo noise; rerun with a different --seed or more "
                 "--trials\n";
    return kExitSolverFailure;
  }
  return kExitOk;
}

int run_theory_sweep(const std::string& m_grid_csv, int d, int n, int s,
                     int seed_count, std::uint64_t seed, double noise_var,
                     const std::string& out_path) {
  if (d < 1 || n < 1) throw std::invalid_argument("--d and --n must be >= 1");
  if (s < 1 || s > d) throw std::invalid_argument("--s must be in [1, d]");
  const std::vector<int> m_grid = parse_int_list(m_grid_csv);
  if (m_grid.empty()) throw std::invalid_argument("--m-grid is empty");
  if (seed_count < 1) throw std::invalid_argument("--seeds must be >= 1");

  std::mt19937_64 rng(derive_seed(seed, 0xD351));
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix design(n, d);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < d; ++j) {
      design(i, j) = normal(rng) / std::sqrt(static_cast<double>(n));
    }
  }
  Vector omega = Vector::Zero(d);
  for (int j = 0; j < s; ++j) omega[j] = 1.0;

  std::vector<std::uint64_t> seeds;
  for (int i = 0; i < seed_count; ++i) seeds.push_back(derive_seed(seed, i + 1));
  SolverConfig config;
  config.lambda = noise_var;

  const auto rows = covariance_consistency_sweep(DiagonalCovariance(omega),
                                                 design, m_grid, seeds, config);
  std::printf("%8s  %-22s\n", "m", "median discrepancy");
  for (const auto& row : rows) {
    std::printf("%8d  %.6e\n", row.m, row.median_discrepancy);
  }
  bool decreasing = true;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    decreasing &= rows[i].median_discrepancy < rows[i - 1].median_discrepancy;
  }
  std::printf("monotone decreasing: %s\n", decreasing ? "yes" : "no");
  if (!out_path.empty()) {
    write_text_file(out_path, consistency_sweep_to_json(rows));
  }
  return kExitOk;
}

// Re-runs the closed-form equivalence suites end to end and prints one line
// per check.
int run_oracle_check() {
  std::mt19937_64 rng(20240611);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<Index> tasks(1, 20), dims(1, 10);
  std::uniform_real_distribution<double> penalties(0.05, 1.0);

  bool all_ok = true;
  auto verdict = [&](const char* name, bool ok) {
    std::printf("[%s] %s\n", ok ? "PASS" : "FAIL", name);
    all_ok &= ok;
  };

  double worst_scc = 0.0, worst_gl_omega = 0.0, worst_gl_beta = 0.0,
         worst_two_step = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    NormalMeansInstance instance;
    const Index m = tasks(rng), d = dims(rng);
    instance.responses.resize(m, d);
    for (Index l = 0; l < m; ++l)
      for (Index j = 0; j < d; ++j) instance.responses(l, j) = normal(rng);
    instance.lambda = penalties(rng);
    const MultiTaskDataset dataset =
        identity_design_dataset(instance.responses);

    SolverConfig config;
    config.lambda = instance.lambda * static_cast<double>(m);
    config.ridge_lambda = instance.lambda;
    const Vector fitted =
        fit_scc_diagonal(dataset, config).covariance.omega();
    worst_scc = std::max(worst_scc,
                         (fitted - scc_omega_closed_form(instance))
                             .cwiseAbs()
                             .maxCoeff());

    SolverConfig gl_config;
    gl_config.rel_tol = 1e-14;
    const GroupLassoResult gl = group_lasso_fit(
        dataset, std::sqrt(instance.lambda * static_cast<double>(m)),
        gl_config);
    const GroupLassoClosedForm closed = group_lasso_closed_form(instance);
    worst_gl_omega =
        std::max(worst_gl_omega,
                 (gl.implied_omega - closed.omega).cwiseAbs().maxCoeff());
    for (Index l = 0; l < m; ++l) {
      worst_gl_beta = std::max(
          worst_gl_beta, (gl.coefficients.betas[l] -
                          closed.betas.row(l).transpose())
                             .cwiseAbs()
                             .maxCoeff());
    }

    const TwoStepResult two_step =
        two_step_fit(dataset, config, CovarianceStructure::Diagonal);
    const Matrix expected = two_step_beta_closed_form(instance);
    for (Index l = 0; l < m; ++l) {
      worst_two_step = std::max(
          worst_two_step, (two_step.coefficients.betas[l] -
                           expected.row(l).transpose())
                              .cwiseAbs()
                              .maxCoeff());
    }
  }
  std::printf("  max |scc - closed form|       = %.3e\n", worst_scc);
  verdict("sparse diagonal covariance matches its closed form (1e-8)",
          worst_scc < 1e-8);
  std::printf("  max |gl omega - closed form|  = %.3e\n", worst_gl_omega);
  std::printf("  max |gl beta - closed form|   = %.3e\n", worst_gl_beta);
  verdict("group lasso matches its closed form (1e-6)",
          worst_gl_omega < 1e-6 && worst_gl_beta < 1e-6);
  std::printf("  max |two-step - closed form|  = %.3e\n", worst_two_step);
  verdict("two-step fit matches the shrinkage closed form (1e-8)",
          worst_two_step < 1e-8);

  bool underestimates = true;
  std::uniform_real_distribution<double> uniform(0.0, 4.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const double lambda = uniform(rng);
    const double t = lambda + uniform(rng);
    underestimates &= std::max(0.0, std::sqrt(lambda * t) - lambda) <=
                      t - lambda + 1e-12;
  }
  verdict("group-lasso variance never exceeds the direct estimate",
          underestimates);

  return all_ok ? kExitOk : kExitSolverFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-task regression via covariance estimation"};
  app.require_subcommand(1);

  // ------------------------------------------------------------------ bench
  CLI::App* bench = app.add_subcommand("bench", "benchmark harness");
  bench->require_subcommand(1);

  CLI::App* synth = bench->add_subcommand("synth", "synthetic benchmark");
  SyntheticConfig synth_config;
  synth_config.m = 30;
  synth_config.d = 256;
  synth_config.n = 150;
  synth_config.noise_variance = 0.1;
  std::string synth_k = "50";
  std::string synth_methods = "scc,gl,glsls";
  std::string synth_lambda = "cv";
  std::string synth_out, synth_csv, synth_export;
  std::vector<std::string> synth_external;
  BenchmarkOptions synth_options;
  synth->add_option("--m", synth_config.m, "tasks");
  synth->add_option("--d", synth_config.d, "feature dimension");
  synth->add_option("--n", synth_config.n, "samples per task");
  synth->add_option("--k", synth_k, "support sizes (comma separated)");
  synth->add_option("--overlap", synth_config.overlap_fraction,
                    "fraction of the support shared across tasks");
  synth->add_option("--noise-var", synth_config.noise_variance,
                    "noise variance");
  synth->add_option("--corr", synth_config.design_correlation,
                    "pairwise design correlation");
  synth->add_option("--runs", synth_options.runs, "independent runs");
  synth->add_option("--methods", synth_methods,
                    "comma list of scc,gl,glsls,pfc,dlr");
  synth->add_option("--seed", synth_config.seed, "master seed");
  synth->add_option("--lambda", synth_lambda, "cv or fixed:<value>");
  synth->add_option("--threads", synth_options.threads,
                    "worker threads (0 = all cores)");
  synth->add_option("--grid-size", synth_options.grid_size,
                    "points in the tuning grid");
  synth->add_option("--out", synth_out, "results JSON path");
  synth->add_option("--csv", synth_csv, "per-run metrics CSV path");
  synth->add_flag("--standardize", synth_options.standardize_columns,
                  "scale design columns to unit norm before fitting");
  synth->add_option("--external", synth_external,
                    "label=dir with run_<i>.json coefficient files");
  synth->add_option("--export", synth_export,
                    "directory to export per-run datasets");

  CLI::App* real = bench->add_subcommand("real", "real-data benchmark");
  std::string real_manifest;
  RealDataOptions real_options;
  std::string real_methods = "scc,gl";
  std::string real_lambda = "cv";
  std::string real_out, real_csv;
  std::vector<std::string> real_external;
  real->add_option("--manifest", real_manifest, "dataset manifest JSON")
      ->required();
  real->add_option("--split", real_options.train_fraction,
                   "training fraction (per task, leading rows; >= 1 means "
                   "in-sample evaluation)");
  real->add_option("--methods", real_methods, "comma list of methods");
  real->add_option("--lambda", real_lambda, "cv or fixed:<value>");
  real->add_option("--grid-size", real_options.grid_size,
                   "points in the tuning grid");
  real->add_option("--out", real_out, "results JSON path");
  real->add_option("--csv", real_csv, "per-method metrics CSV path");
  real->add_flag("--standardize", real_options.standardize_columns,
                 "scale design columns to unit norm before fitting");
  real->add_option("--external", real_external,
                   "label=coefficients.json to tabulate");

  CLI::App* fetch = bench->add_subcommand(
      "fetch", "where to obtain the reference datasets");
  std::string fetch_out;
  fetch->add_option("--out", fetch_out, "directory for a manifest template");

  // ----------------------------------------------------------------- theory
  CLI::App* theory = app.add_subcommand("theory", "numerical theory checks");
  theory->require_subcommand(1);

  CLI::App* thm41 = theory->add_subcommand(
      "thm41", "prediction-error bound sandwich (Monte-Carlo)");
  int bound_d = 5;
  double bound_lambda = 0.25, bound_sigma2 = 0.25;
  int bound_trials = 100000;
  std::uint64_t bound_seed = 1;
  std::string bound_out;
  thm41->add_option("--d", bound_d, "dimension of the identity-design example");
  thm41->add_option("--lambda", bound_lambda, "ridge weight (>= sigma2)");
  thm41->add_option("--sigma2", bound_sigma2, "noise variance");
  thm41->add_option("--trials", bound_trials, "Monte-Carlo trials");
  thm41->add_option("--seed", bound_seed, "RNG seed");
  thm41->add_option("--out", bound_out, "report JSON path");

  CLI::App* thm42 = theory->add_subcommand(
      "thm42", "covariance consistency trend over the task count");
  std::string sweep_m_grid = "10,50,200";
  int sweep_d = 32, sweep_n = 16, sweep_s = 4, sweep_seeds = 10;
  std::uint64_t sweep_seed = 0;
  double sweep_noise = 0.25;
  std::string sweep_out;
  thm42->add_option("--m-grid", sweep_m_grid, "task counts (increasing)");
  thm42->add_option("--d", sweep_d, "feature dimension");
  thm42->add_option("--n", sweep_n, "samples per task");
  thm42->add_option("--s", sweep_s, "true support size");
  thm42->add_option("--seeds", sweep_seeds, "number of seeds");
  thm42->add_option("--seed", sweep_seed, "master seed");
  thm42->add_option("--noise-var", sweep_noise, "noise variance");
  thm42->add_option("--out", sweep_out, "report JSON path");

  // ----------------------------------------------------------------- oracle
  CLI::App* oracle = app.add_subcommand("oracle", "closed-form oracle checks");
  oracle->require_subcommand(1);
  oracle->add_subcommand("check", "run all oracle equivalence suites");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      synth_options.methods = parse_methods(synth_methods);
      synth_options.lambda_mode = parse_lambda_mode(synth_lambda);
      synth_options.external = parse_external(synth_external);
      if (!synth_export.empty()) synth_options.export_dir = synth_export;
      return run_bench_synth(synth_k, synth_config, synth_options, synth_out,
                             synth_csv);
    }
    if (real->parsed()) {
      real_options.methods = parse_methods(real_methods);
      real_options.lambda_mode = parse_lambda_mode(real_lambda);
      real_options.external = parse_external(real_external);
      return run_bench_real(real_manifest, real_options, real_out, real_csv);
    }
    if (fetch->parsed()) {
      return run_bench_fetch(fetch_out);
    }
    if (thm41->parsed()) {
      return run_theory_bound(bound_d, bound_lambda, bound_sigma2,
                              bound_trials, bound_seed, bound_out);
    }
    if (thm42->parsed()) {
      return run_theory_sweep(sweep_m_grid, sweep_d, sweep_n, sweep_s,
                              sweep_seeds, sweep_seed, sweep_noise, sweep_out);
    }
    if (oracle->parsed()) {
      return run_oracle_check();
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kExitInvalidInput;
  } catch (const std::runtime_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalidInput;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitSolverFailure;
  }
  return kExitInvalidInput;
}
