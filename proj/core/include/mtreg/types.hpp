#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

namespace mtreg {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// One regression task: an n_l x d design matrix and its n_l response vector.
struct TaskData {
  Matrix design;
  Vector response;

  Index samples() const { return design.rows(); }
};

/// m tasks over a shared feature space of dimension d. Tasks may have
/// differing sample counts; every design must have exactly `dimension`
/// columns.
struct MultiTaskDataset {
  std::vector<TaskData> tasks;
  Index dimension = 0;

  Index num_tasks() const { return static_cast<Index>(tasks.size()); }
};

/// Builds a dataset, inferring the shared dimension from the first task.
MultiTaskDataset make_dataset(std::vector<TaskData> tasks);

/// Checks every dataset invariant (shared column count, design/response row
/// agreement, finite entries, at least one task) and returns one message per
/// violation. Never throws; an empty report means the dataset is valid.
std::vector<std::string> validate_dataset(const MultiTaskDataset& dataset);

/// Relative tolerance used when asserting symmetry of covariance inputs.
inline constexpr double kSymmetryTol = 1e-10;
/// Relative tolerance on the most-negative eigenvalue a PSD matrix may carry.
inline constexpr double kPsdTol = 1e-8;
/// Entries of a fitted diagonal below this fraction of the maximum are
/// snapped to exact zero before support is reported.
inline constexpr double kSupportSnapTol = 1e-10;

/// Diagonal covariance diag(omega) with omega >= 0 entrywise. The support is
/// the set of strictly positive entries.
class DiagonalCovariance {
 public:
  DiagonalCovariance() = default;
  /// Throws std::invalid_argument on negative or non-finite entries.
  explicit DiagonalCovariance(Vector omega);

  const Vector& omega() const { return omega_; }
  Index dim() const { return omega_.size(); }
  std::vector<Index> support() const;

 private:
  Vector omega_;
};

/// Dense symmetric positive semi-definite covariance. The constructor asserts
/// symmetry to within kSymmetryTol, replaces the input by (M + M^T)/2, and
/// asserts the smallest eigenvalue is >= -kPsdTol * (1 + largest eigenvalue).
class FullCovariance {
 public:
  FullCovariance() = default;
  explicit FullCovariance(Matrix matrix);

  const Matrix& matrix() const { return matrix_; }
  Index dim() const { return matrix_.rows(); }

 private:
  Matrix matrix_;
};

/// Additive decomposition Omega = sparse_part + lowrank_part, with a
/// nonnegative diagonal sparse part and a PSD low-rank part.
struct DiagPlusLowRank {
  DiagonalCovariance sparse_part;
  FullCovariance lowrank_part;
  Index rank_estimate = 0;

  Index dim() const { return sparse_part.dim(); }
};

using CovarianceEstimate =
    std::variant<DiagonalCovariance, FullCovariance, DiagPlusLowRank>;

/// Materializes any covariance estimate as a dense symmetric d x d matrix.
Matrix covariance_as_matrix(const CovarianceEstimate& estimate);
Index covariance_dim(const CovarianceEstimate& estimate);

/// Per-task coefficient vectors plus the joint support
/// {j : some task has beta_j != 0}.
struct CoefficientSet {
  std::vector<Vector> betas;
  std::vector<Index> support;

  Index num_tasks() const { return static_cast<Index>(betas.size()); }
  Index dim() const { return betas.empty() ? 0 : betas.front().size(); }
};

CoefficientSet make_coefficient_set(std::vector<Vector> betas);

/// Stacks the coefficient vectors as an m x d matrix (task l in row l).
Matrix stack_coefficients(const CoefficientSet& coefficients);

/// Shared solver knobs. `lambda` is the covariance-step weight and plays the
/// role of the noise variance at the theory values; `ridge_lambda` weighs the
/// second-step quadratic regularizer; `lambda1`/`lambda2` weigh the diagonal
/// and trace-norm parts of the additive decomposition; `gamma` holds the
/// per-row weights of the partial-full penalty (empty means all ones).
struct SolverConfig {
  double lambda = 0.0;
  double ridge_lambda = 0.0;
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  Vector gamma;
  double rel_tol = 1e-8;
  int max_iter = 10000;
  std::uint64_t seed = 0;
};

/// Throws std::invalid_argument when a config violates its invariants
/// (negative weights, rel_tol <= 0, max_iter < 1, non-positive gamma).
void validate_config(const SolverConfig& config);

}  // namespace mtreg
