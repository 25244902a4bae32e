#include "mtreg/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "mtreg/io.hpp"
#include "mtreg/linalg.hpp"

namespace mtreg {

namespace {

using nlohmann::json;

struct Split {
  MultiTaskDataset train;
  MultiTaskDataset holdout;
  Index holdout_rows = 0;
};

// Per-task random row holdout; every task keeps at least one training row.
Split make_holdout_split(const MultiTaskDataset& dataset, double fraction,
                         std::mt19937_64& rng) {
  Split split;
  split.train.dimension = dataset.dimension;
  split.holdout.dimension = dataset.dimension;
  for (const TaskData& task : dataset.tasks) {
    const Index n = task.design.rows();
    Index h = static_cast<Index>(std::lround(fraction * static_cast<double>(n)));
    h = std::min(h, n - 1);
    h = std::max<Index>(h, n >= 3 ? 1 : 0);
    std::vector<Index> order(n);
    std::iota(order.begin(), order.end(), Index{0});
    for (Index i = 0; i < n; ++i) {
      std::uniform_int_distribution<Index> pick(i, n - 1);
      std::swap(order[i], order[pick(rng)]);
    }
    TaskData train_task, holdout_task;
    train_task.design.resize(n - h, dataset.dimension);
    train_task.response.resize(n - h);
    holdout_task.design.resize(h, dataset.dimension);
    holdout_task.response.resize(h);
    for (Index i = 0; i < n - h; ++i) {
      train_task.design.row(i) = task.design.row(order[i]);
      train_task.response[i] = task.response[order[i]];
    }
    for (Index i = 0; i < h; ++i) {
      holdout_task.design.row(i) = task.design.row(order[n - h + i]);
      holdout_task.response[i] = task.response[order[n - h + i]];
    }
    split.holdout_rows += h;
    split.train.tasks.push_back(std::move(train_task));
    split.holdout.tasks.push_back(std::move(holdout_task));
  }
  return split;
}

double prediction_error(const CoefficientSet& coefficients,
                        const MultiTaskDataset& dataset) {
  double sum = 0.0;
  Index rows = 0;
  for (Index l = 0; l < dataset.num_tasks(); ++l) {
    const TaskData& task = dataset.tasks[l];
    if (task.design.rows() == 0) continue;
    sum += (task.response - task.design * coefficients.betas[l]).squaredNorm();
    rows += task.design.rows();
  }
  return rows > 0 ? sum / static_cast<double>(rows) : 0.0;
}

std::vector<double> log_grid(double max_value, double min_ratio, int size) {
  std::vector<double> grid;
  if (!(max_value > 0.0) || size < 1) {
    grid.push_back(0.0);
    return grid;
  }
  if (size == 1) {
    grid.push_back(max_value);
    return grid;
  }
  for (int i = 0; i < size; ++i) {
    const double expnt =
        1.0 - static_cast<double>(i) / static_cast<double>(size - 1);
    grid.push_back(max_value * std::pow(min_ratio, expnt));
  }
  // Descending: largest penalty first so warm starts chain naturally.
  std::reverse(grid.begin(), grid.end());
  return grid;
}

// Largest trace-penalty weight with a nonzero solution: the all-zero point
// is optimal iff b_j <= v * c_j for every j.
double trace_weight_ceiling(const MultiTaskDataset& dataset) {
  const SccQuadratic quad = build_scc_quadratic(dataset);
  const Vector energies = column_energies(dataset);
  double ceiling = 0.0;
  for (Index j = 0; j < quad.dim(); ++j) {
    if (energies[j] > 0.0) {
      ceiling = std::max(ceiling, quad.corr_sq[j] / energies[j]);
    }
  }
  return ceiling;
}

// All-zero threshold of the row-group penalty: zero is optimal iff
// ||Q_{k,.}|| <= lambda * gamma_k for every row k.
double partial_full_ceiling(const MultiTaskDataset& dataset) {
  Matrix q = Matrix::Zero(dataset.dimension, dataset.dimension);
  for (const TaskData& task : dataset.tasks) {
    const Vector corr = task.design.transpose() * task.response;
    q.noalias() += corr * corr.transpose();
  }
  double ceiling = 0.0;
  for (Index k = 0; k < q.rows(); ++k) {
    ceiling = std::max(ceiling, q.row(k).norm());
  }
  return ceiling;
}

double lowrank_ceiling(const MultiTaskDataset& dataset) {
  Matrix q = Matrix::Zero(dataset.dimension, dataset.dimension);
  for (const TaskData& task : dataset.tasks) {
    const Vector corr = task.design.transpose() * task.response;
    q.noalias() += corr * corr.transpose();
  }
  return largest_eigenvalue(q);
}

double diagonal_ceiling(const MultiTaskDataset& dataset) {
  const SccQuadratic quad = build_scc_quadratic(dataset);
  return quad.dim() > 0 ? quad.corr_sq.maxCoeff() : 0.0;
}

struct FitOutcome {
  CoefficientSet coefficients;
  double selected_lambda = 0.0;
  bool converged = true;
};

CoefficientSet two_step_coefficients(const MultiTaskDataset& dataset,
                                     const CovarianceEstimate& estimate,
                                     double ridge_lambda) {
  RidgeSolveOptions options;
  options.ridge_lambda = ridge_lambda;
  std::vector<Vector> betas;
  betas.reserve(dataset.tasks.size());
  for (const TaskData& task : dataset.tasks) {
    betas.push_back(ridge_with_covariance(task, estimate, options));
  }
  return make_coefficient_set(std::move(betas));
}

// Tunes one method on a within-task holdout over a log grid of its penalty
// knob, then refits on the full data at the selected value. Grid fits run at
// a relaxed tolerance; the final refit uses the configured one.
FitOutcome fit_method_cv(const MultiTaskDataset& dataset, Method method,
                         const BenchmarkOptions& options,
                         std::uint64_t seed) {
  SolverConfig fit_config;
  fit_config.rel_tol = 1e-8;
  fit_config.max_iter = 10000;
  SolverConfig cv_config = fit_config;
  cv_config.rel_tol = 1e-6;
  const double m = static_cast<double>(dataset.num_tasks());

  FitOutcome outcome;

  if (!options.lambda_mode.cross_validate) {
    // Fixed mode: v plays the noise variance. Two-step methods use it
    // directly as both the covariance-step weight and the ridge weight. The
    // group-lasso penalty is the variational correspondence sigma * sqrt(m)
    // expressed through the column energies, sqrt(v * mean_j c_j), which
    // reduces to sigma * sqrt(m) on identity designs. The row-group and
    // trace-norm penalties have no theory value, so they are placed at the
    // same relative position on their scales as v sits on the variance
    // scale.
    const double v = options.lambda_mode.fixed_value;
    outcome.selected_lambda = v;
    switch (method) {
      case Method::SparseDiagonal: {
        fit_config.lambda = v;
        SolveTrace trace;
        const CovarianceEstimate estimate = fit_covariance(
            dataset, fit_config, CovarianceStructure::DiagonalTrace, &trace);
        outcome.coefficients = two_step_coefficients(dataset, estimate, v);
        outcome.converged = trace.converged;
        return outcome;
      }
      case Method::GroupLasso:
      case Method::GlsLs: {
        // The variational identity ties the row penalty to sigma * sqrt(m)
        // for any design, with v playing sigma^2.
        const double lambda_gl = std::sqrt(v * m);
        if (method == Method::GlsLs) {
          outcome.coefficients = gls_ls_fit(dataset, lambda_gl, fit_config);
          return outcome;
        }
        const GroupLassoResult result =
            group_lasso_fit(dataset, lambda_gl, fit_config);
        outcome.coefficients = result.coefficients;
        outcome.converged = result.trace.converged;
        return outcome;
      }
      case Method::PartialFull: {
        const double scale = trace_weight_ceiling(dataset);
        const double t = scale > 0.0 ? std::min(1.0, v / scale) : 0.0;
        fit_config.lambda = t * partial_full_ceiling(dataset);
        SolveTrace trace;
        const CovarianceEstimate estimate = fit_covariance(
            dataset, fit_config, CovarianceStructure::PartialFull, &trace);
        outcome.coefficients = two_step_coefficients(dataset, estimate, v);
        outcome.converged = trace.converged;
        return outcome;
      }
      case Method::DiagLowRank: {
        const double scale = trace_weight_ceiling(dataset);
        const double t = scale > 0.0 ? std::min(1.0, v / scale) : 0.0;
        fit_config.lambda1 = t * diagonal_ceiling(dataset);
        fit_config.lambda2 = t * lowrank_ceiling(dataset);
        SolveTrace trace;
        const CovarianceEstimate estimate = fit_covariance(
            dataset, fit_config, CovarianceStructure::DiagLowRank, &trace);
        outcome.coefficients = two_step_coefficients(dataset, estimate, v);
        outcome.converged = trace.converged;
        return outcome;
      }
    }
  }

  // Repeated random holdouts: candidate scores are averaged over
  // options.cv_folds splits, which stabilizes the selection considerably
  // compared to a single 20% holdout. Degenerate splits (single-row tasks)
  // fall back to the training error.
  std::mt19937_64 rng(seed);
  std::vector<Split> splits;
  for (int fold = 0; fold < std::max(1, options.cv_folds); ++fold) {
    splits.push_back(
        make_holdout_split(dataset, options.holdout_fraction, rng));
  }

  // Two-step methods tune the covariance weight on the outer grid and the
  // ridge weight on a short inner grid below it; at the theory values both
  // equal the noise variance, but selection usually wants a larger weight
  // than shrinkage does. Candidates that cannot be fitted on some fold
  // (e.g. a selection larger than a task's sample count making the
  // restricted least squares singular) are excluded.
  const std::vector<double> ridge_fractions = {1.0, 1.0 / 3.0, 0.1,
                                               1.0 / 30.0, 0.01};
  // The matrix-valued estimators scale their ridge candidates off the
  // variance ceiling directly (their selection penalty lives on an unrelated
  // scale), so the grid has to reach further down.
  const std::vector<double> ridge_fractions_wide = {
      1.0, 0.3, 0.1, 0.03, 0.01, 3e-3, 1e-3, 3e-4};
  const double infinity = std::numeric_limits<double>::infinity();

  auto eval_of = [](const Split& split) -> const MultiTaskDataset& {
    return split.holdout_rows > 0 ? split.holdout : split.train;
  };
  auto argmin = [&](const std::vector<double>& totals) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < totals.size(); ++i) {
      if (totals[i] < totals[best]) best = i;
    }
    if (totals[best] == infinity) {
      throw std::runtime_error(
          "hyper-parameter search failed on every grid point");
    }
    return best;
  };

  switch (method) {
    case Method::SparseDiagonal:
    case Method::DiagLowRank: {
      const bool diagonal = method == Method::SparseDiagonal;
      const double ceiling1 = diagonal ? trace_weight_ceiling(dataset)
                                       : diagonal_ceiling(dataset);
      const double ceiling2 = diagonal ? 0.0 : lowrank_ceiling(dataset);
      const double ridge_ceiling =
          diagonal ? 1.0 : trace_weight_ceiling(dataset);
      const std::vector<double> grid = log_grid(
          diagonal ? ceiling1 : 1.0, options.grid_min_ratio, options.grid_size);
      const std::vector<double>& fractions =
          diagonal ? ridge_fractions : ridge_fractions_wide;
      std::vector<std::vector<double>> totals(
          grid.size(), std::vector<double>(fractions.size(), 0.0));
      for (const Split& split : splits) {
        for (std::size_t i = 0; i < grid.size(); ++i) {
          const double ridge_scale = diagonal ? grid[i] : ridge_ceiling;
          try {
            SolverConfig config = cv_config;
            CovarianceStructure structure;
            if (diagonal) {
              config.lambda = grid[i];
              structure = CovarianceStructure::DiagonalTrace;
            } else {
              config.lambda1 = grid[i] * ceiling1;
              config.lambda2 = grid[i] * ceiling2;
              structure = CovarianceStructure::DiagLowRank;
            }
            const CovarianceEstimate estimate =
                fit_covariance(split.train, config, structure);
            for (std::size_t r = 0; r < fractions.size(); ++r) {
              try {
                const CoefficientSet candidate = two_step_coefficients(
                    split.train, estimate, fractions[r] * ridge_scale);
                totals[i][r] += prediction_error(candidate, eval_of(split));
              } catch (const std::exception&) {
                totals[i][r] = infinity;
              }
            }
          } catch (const std::exception&) {
            for (double& t : totals[i]) t = infinity;
          }
        }
      }
      std::size_t best_i = 0, best_r = 0;
      double best_total = infinity;
      for (std::size_t i = 0; i < grid.size(); ++i) {
        for (std::size_t r = 0; r < fractions.size(); ++r) {
          if (totals[i][r] < best_total) {
            best_total = totals[i][r];
            best_i = i;
            best_r = r;
          }
        }
      }
      if (best_total == infinity) {
        throw std::runtime_error(
            "hyper-parameter search failed on every grid point");
      }
      SolveTrace trace;
      CovarianceStructure structure;
      if (diagonal) {
        fit_config.lambda = grid[best_i];
        structure = CovarianceStructure::DiagonalTrace;
      } else {
        fit_config.lambda1 = grid[best_i] * ceiling1;
        fit_config.lambda2 = grid[best_i] * ceiling2;
        structure = CovarianceStructure::DiagLowRank;
      }
      const CovarianceEstimate estimate =
          fit_covariance(dataset, fit_config, structure, &trace);
      const double ridge_scale = diagonal ? grid[best_i] : ridge_ceiling;
      outcome.coefficients = two_step_coefficients(
          dataset, estimate, fractions[best_r] * ridge_scale);
      outcome.selected_lambda = grid[best_i];
      outcome.converged = trace.converged;
      return outcome;
    }
    case Method::GroupLasso:
    case Method::GlsLs: {
      const double ceiling = group_lasso_zero_threshold(dataset);
      const std::vector<double> grid =
          log_grid(ceiling, options.grid_min_ratio, options.grid_size);
      std::vector<double> totals(grid.size(), 0.0);
      for (const Split& split : splits) {
        // Warm-started path over the descending penalty grid.
        Matrix warm = Matrix::Zero(split.train.dimension,
                                   split.train.num_tasks());
        for (std::size_t i = 0; i < grid.size(); ++i) {
          const GroupLassoResult path_fit = detail::group_lasso_fit_warm(
              split.train, grid[i], cv_config, &warm);
          warm = Matrix::Zero(split.train.dimension, split.train.num_tasks());
          for (Index l = 0; l < split.train.num_tasks(); ++l) {
            warm.col(l) = path_fit.coefficients.betas[l];
          }
          if (totals[i] == infinity) continue;
          try {
            const CoefficientSet candidate =
                method == Method::GroupLasso
                    ? path_fit.coefficients
                    : detail::ls_refit_on_support(
                          split.train, path_fit.coefficients.support);
            totals[i] += prediction_error(candidate, eval_of(split));
          } catch (const std::exception&) {
            totals[i] = infinity;
          }
        }
      }
      const std::size_t best = argmin(totals);
      outcome.selected_lambda = grid[best];
      if (method == Method::GroupLasso) {
        const GroupLassoResult result =
            group_lasso_fit(dataset, grid[best], fit_config);
        outcome.coefficients = result.coefficients;
        outcome.converged = result.trace.converged;
      } else {
        outcome.coefficients = gls_ls_fit(dataset, grid[best], fit_config);
      }
      return outcome;
    }
    case Method::PartialFull: {
      const double ceiling = partial_full_ceiling(dataset);
      const double ridge_ceiling = trace_weight_ceiling(dataset);
      const std::vector<double> grid =
          log_grid(ceiling, options.grid_min_ratio, options.grid_size);
      std::vector<std::vector<double>> totals(
          grid.size(),
          std::vector<double>(ridge_fractions_wide.size(), 0.0));
      // The matrix-valued fits dominate the tuning cost; two folds keep the
      // selection stable enough at a fraction of the price.
      const std::size_t pfc_folds = std::min<std::size_t>(splits.size(), 2);
      for (std::size_t f = 0; f < pfc_folds; ++f) {
        const Split& split = splits[f];
        Matrix warm = Matrix::Zero(dataset.dimension, dataset.dimension);
        for (std::size_t i = 0; i < grid.size(); ++i) {
          SolverConfig config = cv_config;
          config.lambda = grid[i];
          const PartialFullFit fit =
              detail::fit_partial_full_warm(split.train, config, &warm);
          warm = fit.covariance.matrix();
          for (std::size_t r = 0; r < ridge_fractions_wide.size(); ++r) {
            try {
              const CoefficientSet candidate = two_step_coefficients(
                  split.train, fit.covariance,
                  ridge_fractions_wide[r] * ridge_ceiling);
              totals[i][r] += prediction_error(candidate, eval_of(split));
            } catch (const std::exception&) {
              totals[i][r] = infinity;
            }
          }
        }
      }
      std::size_t best_i = 0, best_r = 0;
      double best_total = infinity;
      for (std::size_t i = 0; i < grid.size(); ++i) {
        for (std::size_t r = 0; r < ridge_fractions_wide.size(); ++r) {
          if (totals[i][r] < best_total) {
            best_total = totals[i][r];
            best_i = i;
            best_r = r;
          }
        }
      }
      if (best_total == infinity) {
        throw std::runtime_error(
            "hyper-parameter search failed on every grid point");
      }
      fit_config.lambda = grid[best_i];
      const PartialFullFit fit =
          detail::fit_partial_full_warm(dataset, fit_config, nullptr);
      outcome.coefficients = two_step_coefficients(
          dataset, fit.covariance,
          ridge_fractions_wide[best_r] * ridge_ceiling);
      outcome.selected_lambda = grid[best_i];
      outcome.converged = fit.trace.converged;
      return outcome;
    }
  }
  throw std::invalid_argument("fit_method_cv: unknown method");
}

void write_ground_truth(const GroundTruth& truth,
                        const std::filesystem::path& path) {
  json out;
  out["betas"] = json::array();
  for (Index l = 0; l < truth.betas.rows(); ++l) {
    std::vector<double> row(truth.betas.cols());
    for (Index j = 0; j < truth.betas.cols(); ++j) row[j] = truth.betas(l, j);
    out["betas"].push_back(row);
  }
  out["shared_support"] = truth.shared_support;
  write_text_file(path, out.dump(2));
}

}  // namespace

Method parse_method(const std::string& token) {
  if (token == "scc") return Method::SparseDiagonal;
  if (token == "gl") return Method::GroupLasso;
  if (token == "glsls") return Method::GlsLs;
  if (token == "pfc") return Method::PartialFull;
  if (token == "dlr") return Method::DiagLowRank;
  throw std::invalid_argument("unknown method '" + token +
                              "' (expected scc, gl, glsls, pfc, dlr)");
}

std::string method_name(Method method) {
  switch (method) {
    case Method::SparseDiagonal: return "scc";
    case Method::GroupLasso: return "gl";
    case Method::GlsLs: return "glsls";
    case Method::PartialFull: return "pfc";
    case Method::DiagLowRank: return "dlr";
  }
  return "?";
}

std::string method_display_name(Method method) {
  switch (method) {
    case Method::SparseDiagonal: return "Sparse diagonal covariance";
    case Method::GroupLasso: return "Group lasso";
    case Method::GlsLs: return "GLS-LS";
    case Method::PartialFull: return "Partial full covariance";
    case Method::DiagLowRank: return "Diag+low-rank covariance";
  }
  return "?";
}

ColumnScales standardize_columns(MultiTaskDataset& dataset) {
  ColumnScales scales;
  scales.per_task.reserve(dataset.tasks.size());
  for (TaskData& task : dataset.tasks) {
    Vector task_scales = Vector::Ones(dataset.dimension);
    for (Index j = 0; j < dataset.dimension; ++j) {
      const double norm = task.design.col(j).norm();
      if (norm > 0.0) {
        task_scales[j] = norm;
        task.design.col(j) /= norm;
      }
    }
    scales.per_task.push_back(std::move(task_scales));
  }
  return scales;
}

void unscale_coefficients(CoefficientSet& coefficients,
                          const ColumnScales& scales) {
  for (std::size_t l = 0; l < coefficients.betas.size(); ++l) {
    coefficients.betas[l].array() /= scales.per_task[l].array();
  }
}

BenchmarkResult run_benchmark(const SyntheticConfig& config,
                              const BenchmarkOptions& options) {
  if (options.runs < 1) {
    throw std::invalid_argument("run_benchmark: runs must be >= 1");
  }
  if (options.methods.empty() && options.external.empty()) {
    throw std::invalid_argument("run_benchmark: no methods requested");
  }

  const int runs = options.runs;
  const std::size_t slots =
      options.methods.size() + options.external.size();
  std::vector<std::vector<RunRecord>> per_run(runs);

  auto execute_run = [&](int r) {
    SyntheticConfig run_config = config;
    run_config.seed = derive_seed(config.seed, static_cast<std::uint64_t>(r));
    SyntheticData data = generate_synthetic(run_config);
    if (options.export_dir) {
      const auto dir = *options.export_dir / ("run_" + std::to_string(r));
      save_dataset(data.dataset, dir, "dataset");
      write_ground_truth(data.truth, dir / "truth.json");
    }
    ColumnScales scales;
    if (options.standardize_columns) {
      scales = standardize_columns(data.dataset);
    }
    std::vector<RunRecord>& records = per_run[r];
    records.reserve(slots);
    std::size_t method_index = 0;
    auto score = [&](const std::string& name, CoefficientSet coefficients,
                     double selected, bool converged) {
      RunRecord record;
      record.method = name;
      record.run = r;
      record.k = config.k;
      record.selected_lambda = selected;
      record.converged = converged;
      record.normalized_l2 = normalized_l2_error(coefficients, data.truth);
      record.per_task_l2 =
          per_task_normalized_l2_error(coefficients, data.truth);
      record.hamming = static_cast<double>(
          hamming_support_distance(coefficients, data.truth));
      return record;
    };
    for (Method method : options.methods) {
      RunRecord record;
      try {
        FitOutcome outcome = fit_method_cv(
            data.dataset, method, options,
            derive_seed(run_config.seed, 1000 + method_index));
        if (options.standardize_columns) {
          unscale_coefficients(outcome.coefficients, scales);
        }
        record = score(method_name(method), std::move(outcome.coefficients),
                       outcome.selected_lambda, outcome.converged);
      } catch (const std::exception&) {
        record.method = method_name(method);
        record.run = r;
        record.k = config.k;
        record.failed = true;
      }
      records.push_back(std::move(record));
      ++method_index;
    }
    for (const auto& [label, dir] : options.external) {
      RunRecord record;
      try {
        const CoefficientSet coefficients =
            load_coefficients(dir / ("run_" + std::to_string(r) + ".json"));
        record = score(label, coefficients, 0.0, true);
      } catch (const std::exception&) {
        record.method = label;
        record.run = r;
        record.k = config.k;
        record.failed = true;
      }
      records.push_back(std::move(record));
    }
  };

  int threads = options.threads > 0
                    ? options.threads
                    : static_cast<int>(std::thread::hardware_concurrency());
  threads = std::clamp(threads, 1, runs);
  if (threads == 1) {
    for (int r = 0; r < runs; ++r) execute_run(r);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&]() {
        while (true) {
          const int r = next.fetch_add(1);
          if (r >= runs) break;
          execute_run(r);
        }
      });
    }
    for (std::thread& worker : pool) worker.join();
  }

  BenchmarkResult result;
  for (int r = 0; r < runs; ++r) {
    result.records.insert(result.records.end(), per_run[r].begin(),
                          per_run[r].end());
  }

  std::vector<std::string> labels;
  for (Method method : options.methods) labels.push_back(method_name(method));
  for (const auto& [label, dir] : options.external) labels.push_back(label);
  for (const std::string& label : labels) {
    MetricsRow row;
    row.method = label;
    row.k = config.k;
    std::vector<double> l2, per_task, hamming;
    for (const RunRecord& record : result.records) {
      if (record.method != label) continue;
      if (record.failed) {
        ++row.failures;
        continue;
      }
      l2.push_back(record.normalized_l2);
      per_task.push_back(record.per_task_l2);
      hamming.push_back(record.hamming);
    }
    row.runs = static_cast<int>(l2.size());
    const MeanStd l2_stats = aggregate(l2);
    row.normalized_l2_mean = l2_stats.mean;
    row.normalized_l2_std = l2_stats.std;
    row.per_task_l2_mean = aggregate(per_task).mean;
    row.hamming_mean = aggregate(hamming).mean;
    result.rows.push_back(std::move(row));
  }
  return result;
}

BenchmarkResult run_realdata(const std::filesystem::path& manifest_path,
                             const RealDataOptions& options) {
  const MultiTaskDataset full = load_dataset_manifest(manifest_path);
  if (!(options.train_fraction > 0.0)) {
    throw std::invalid_argument("run_realdata: train fraction must be > 0");
  }

  MultiTaskDataset train, test;
  train.dimension = full.dimension;
  test.dimension = full.dimension;
  const bool in_sample = options.train_fraction >= 1.0;
  for (const TaskData& task : full.tasks) {
    const Index n = task.design.rows();
    Index n_train =
        in_sample ? n
                  : static_cast<Index>(std::ceil(options.train_fraction *
                                                 static_cast<double>(n)));
    n_train = std::clamp<Index>(n_train, 1, n);
    TaskData train_task{task.design.topRows(n_train),
                        task.response.head(n_train)};
    TaskData test_task =
        in_sample ? task
                  : TaskData{task.design.bottomRows(n - n_train),
                             task.response.tail(n - n_train)};
    train.tasks.push_back(std::move(train_task));
    test.tasks.push_back(std::move(test_task));
  }

  BenchmarkOptions fit_options;
  fit_options.lambda_mode = options.lambda_mode;
  fit_options.holdout_fraction = options.holdout_fraction;
  fit_options.cv_folds = options.cv_folds;
  fit_options.grid_size = options.grid_size;
  fit_options.grid_min_ratio = options.grid_min_ratio;
  fit_options.standardize_columns = options.standardize_columns;

  ColumnScales scales;
  if (options.standardize_columns) {
    scales = standardize_columns(train);
  }

  auto task_averaged_rmse = [&](const CoefficientSet& coefficients) {
    double sum = 0.0;
    Index counted = 0;
    for (Index l = 0; l < test.num_tasks(); ++l) {
      const TaskData& task = test.tasks[l];
      if (task.design.rows() == 0) continue;
      const double mse =
          (task.response - task.design * coefficients.betas[l]).squaredNorm() /
          static_cast<double>(task.design.rows());
      sum += std::sqrt(mse);
      ++counted;
    }
    if (counted == 0) {
      throw std::runtime_error("run_realdata: no test rows to evaluate");
    }
    return sum / static_cast<double>(counted);
  };

  BenchmarkResult result;
  std::size_t method_index = 0;
  for (Method method : options.methods) {
    MetricsRow row;
    row.method = method_name(method);
    row.runs = 1;
    RunRecord record;
    record.method = row.method;
    try {
      FitOutcome outcome = fit_method_cv(
          train, method, fit_options,
          derive_seed(0x7EA1DA7AULL, method_index));
      if (options.standardize_columns) {
        unscale_coefficients(outcome.coefficients, scales);
      }
      row.rmse_mean = task_averaged_rmse(outcome.coefficients);
      record.rmse = row.rmse_mean;
      record.selected_lambda = outcome.selected_lambda;
      record.converged = outcome.converged;
    } catch (const std::exception&) {
      row.failures = 1;
      row.runs = 0;
      record.failed = true;
    }
    result.rows.push_back(std::move(row));
    result.records.push_back(std::move(record));
    ++method_index;
  }
  for (const auto& [label, path] : options.external) {
    MetricsRow row;
    row.method = label;
    row.runs = 1;
    RunRecord record;
    record.method = label;
    try {
      const CoefficientSet coefficients = load_coefficients(path);
      row.rmse_mean = task_averaged_rmse(coefficients);
      record.rmse = row.rmse_mean;
    } catch (const std::exception&) {
      row.failures = 1;
      row.runs = 0;
      record.failed = true;
    }
    result.rows.push_back(std::move(row));
    result.records.push_back(std::move(record));
  }
  return result;
}

std::string render_table(const std::vector<MetricsRow>& rows, bool real_data) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(4);
  if (real_data) {
    std::size_t width = 8;
    for (const MetricsRow& row : rows) width = std::max(width, row.method.size());
    out << std::left << std::setw(static_cast<int>(width) + 2) << "method"
        << "rmse\n";
    for (const MetricsRow& row : rows) {
      out << std::left << std::setw(static_cast<int>(width) + 2) << row.method;
      if (row.failures > 0 && row.runs == 0) {
        out << "failed\n";
      } else {
        out << row.rmse_mean << "\n";
      }
    }
    return out.str();
  }

  std::vector<int> ks;
  std::vector<std::string> methods;
  for (const MetricsRow& row : rows) {
    if (std::find(ks.begin(), ks.end(), row.k) == ks.end()) ks.push_back(row.k);
    if (std::find(methods.begin(), methods.end(), row.method) == methods.end()) {
      methods.push_back(row.method);
    }
  }
  std::sort(ks.begin(), ks.end());
  auto find_row = [&](const std::string& method, int k) -> const MetricsRow* {
    for (const MetricsRow& row : rows) {
      if (row.method == method && row.k == k) return &row;
    }
    return nullptr;
  };

  std::size_t width = 8;
  for (const std::string& method : methods) {
    width = std::max(width, method.size());
  }
  const int name_width = static_cast<int>(width) + 2;
  const int cell_width = 19;

  out << "normalized L2 error (mean +/- std)\n";
  out << std::left << std::setw(name_width) << "method";
  for (int k : ks) out << std::setw(cell_width) << ("k=" + std::to_string(k));
  out << "\n";
  for (const std::string& method : methods) {
    out << std::left << std::setw(name_width) << method;
    for (int k : ks) {
      const MetricsRow* row = find_row(method, k);
      std::ostringstream cell;
      cell << std::fixed << std::setprecision(4);
      if (!row || row->runs == 0) {
        cell << "-";
      } else {
        cell << row->normalized_l2_mean << " +/- " << row->normalized_l2_std;
      }
      out << std::setw(cell_width) << cell.str();
    }
    out << "\n";
  }
  out << "\nsupport Hamming distance (mean)\n";
  out << std::left << std::setw(name_width) << "method";
  for (int k : ks) out << std::setw(cell_width) << ("k=" + std::to_string(k));
  out << "\n";
  for (const std::string& method : methods) {
    out << std::left << std::setw(name_width) << method;
    for (int k : ks) {
      const MetricsRow* row = find_row(method, k);
      std::ostringstream cell;
      cell << std::fixed << std::setprecision(2);
      if (!row || row->runs == 0) {
        cell << "-";
      } else {
        cell << row->hamming_mean;
      }
      out << std::setw(cell_width) << cell.str();
    }
    out << "\n";
  }
  return out.str();
}

std::string benchmark_result_to_json(const BenchmarkResult& result,
                                     const std::string& config_echo,
                                     const std::string& lambda_mode) {
  json out;
  out["config"] = config_echo;
  out["lambda_mode"] = lambda_mode;
  out["rows"] = json::array();
  for (const MetricsRow& row : result.rows) {
    json entry;
    entry["method"] = row.method;
    entry["k"] = row.k;
    entry["normalized_l2_mean"] = row.normalized_l2_mean;
    entry["normalized_l2_std"] = row.normalized_l2_std;
    entry["per_task_l2_mean"] = row.per_task_l2_mean;
    entry["hamming_mean"] = row.hamming_mean;
    entry["rmse_mean"] = row.rmse_mean;
    entry["runs"] = row.runs;
    entry["failures"] = row.failures;
    out["rows"].push_back(entry);
  }
  return out.dump(2);
}

std::string run_records_to_csv(const std::vector<RunRecord>& records) {
  std::ostringstream out;
  out.precision(17);
  out << "method,run,k,normalized_l2,per_task_l2,hamming,rmse,"
         "selected_lambda,converged,failed\n";
  for (const RunRecord& record : records) {
    out << record.method << "," << record.run << "," << record.k << ","
        << record.normalized_l2 << "," << record.per_task_l2 << ","
        << record.hamming << "," << record.rmse << ","
        << record.selected_lambda << "," << (record.converged ? 1 : 0) << ","
        << (record.failed ? 1 : 0) << "\n";
  }
  return out.str();
}

}  // namespace mtreg
