#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "mtreg/metrics.hpp"
#include "mtreg/regression.hpp"
#include "mtreg/synthetic.hpp"

namespace mtreg {

enum class Method { SparseDiagonal, GroupLasso, GlsLs, PartialFull, DiagLowRank };

/// Parses the CLI method tokens: scc, gl, glsls, pfc, dlr.
Method parse_method(const std::string& token);
std::string method_name(Method method);
std::string method_display_name(Method method);

/// Regularization selection: either every method tunes its knob on a
/// within-task holdout over a log grid, or the two-step methods run at a
/// fixed weight (interpreted as the noise variance) and the group-lasso
/// penalty is derived from it.
struct LambdaMode {
  bool cross_validate = true;
  double fixed_value = 0.0;
};

struct BenchmarkOptions {
  std::vector<Method> methods;
  int runs = 20;
  LambdaMode lambda_mode;
  double holdout_fraction = 0.2;
  int cv_folds = 5;
  int grid_size = 20;
  double grid_min_ratio = 1e-3;
  int threads = 0;  // 0 = hardware concurrency
  bool standardize_columns = false;
  /// Externally computed coefficient files to tabulate alongside the built-in
  /// methods: label -> directory containing run_<i>.json coefficient sets.
  std::map<std::string, std::filesystem::path> external;
  /// When set, each run's dataset is exported as CSV + manifest under
  /// export_dir/run_<i>/ so external tools can be run on identical data.
  std::optional<std::filesystem::path> export_dir;
};

/// Per-run raw metrics, for CSV emission and the ordering checks.
struct RunRecord {
  std::string method;
  int run = 0;
  int k = 0;
  double normalized_l2 = 0.0;
  double per_task_l2 = 0.0;
  double hamming = 0.0;
  double rmse = 0.0;
  double selected_lambda = 0.0;
  bool converged = true;
  bool failed = false;
};

struct BenchmarkResult {
  std::vector<MetricsRow> rows;
  std::vector<RunRecord> records;
};

/// Runs `options.runs` independent repetitions of the synthetic protocol for
/// one configuration: generate, tune each method on a within-task holdout,
/// refit on the full training data, score against the ground truth. Run r
/// derives its RNG stream from (config.seed, r), so parallel and serial
/// execution produce identical results. Individual-run solver failures are
/// recorded per row and do not abort the benchmark.
BenchmarkResult run_benchmark(const SyntheticConfig& config,
                              const BenchmarkOptions& options);

struct RealDataOptions {
  std::vector<Method> methods;
  double train_fraction = 0.75;
  LambdaMode lambda_mode;
  double holdout_fraction = 0.2;
  int cv_folds = 5;
  int grid_size = 20;
  double grid_min_ratio = 1e-3;
  bool standardize_columns = false;
  std::map<std::string, std::filesystem::path> external;
};

/// Real-data protocol: per task, the first ceil(train_fraction * n) rows
/// train and the remainder test; reports per-task-averaged test RMSE per
/// method. Throws std::runtime_error on a malformed manifest.
BenchmarkResult run_realdata(const std::filesystem::path& manifest_path,
                             const RealDataOptions& options);

/// Renders rows as an aligned text table (methods x k columns when multiple
/// k values are present).
std::string render_table(const std::vector<MetricsRow>& rows, bool real_data);

/// Serializes results (config echo, lambda mode, rows) as JSON.
std::string benchmark_result_to_json(const BenchmarkResult& result,
                                     const std::string& config_echo,
                                     const std::string& lambda_mode);

/// Per-run raw metrics as CSV.
std::string run_records_to_csv(const std::vector<RunRecord>& records);

/// Scales every design column to unit Euclidean norm (per task); returns the
/// scales so fitted coefficients can be mapped back. Zero columns keep scale
/// 1. Exposed because the generation protocol never standardizes by default.
struct ColumnScales {
  std::vector<Vector> per_task;  // one length-d vector per task
};
ColumnScales standardize_columns(MultiTaskDataset& dataset);
void unscale_coefficients(CoefficientSet& coefficients, const ColumnScales& scales);

}  // namespace mtreg
