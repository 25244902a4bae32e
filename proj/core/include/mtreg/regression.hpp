#pragma once

#include "mtreg/covariance.hpp"
#include "mtreg/types.hpp"

namespace mtreg {

struct RidgeSolveOptions {
  double ridge_lambda = 0.0;
  /// When set, two_step_fit pairs each task with a covariance estimated on
  /// the other tasks only.
  bool use_loo = false;
};

/// Covariance-weighted ridge solve for one task. Computed in the
/// singular-safe form
///   beta = S (S X^T X S + lambda I)^{-1} S X^T y,   S = Omega^{1/2},
/// which equals (X^T X + lambda Omega^{-1})^{-1} X^T y for invertible Omega
/// and forces coordinates in the null space of Omega to exactly zero.
/// Throws std::invalid_argument when ridge_lambda == 0 and the design is
/// rank-deficient on the covariance support.
Vector ridge_with_covariance(const TaskData& task,
                             const CovarianceEstimate& omega_hat,
                             const RidgeSolveOptions& options);

struct TwoStepResult {
  CoefficientSet coefficients;
  CovarianceEstimate covariance;
};

/// Two-step fit: estimate the shared covariance with the chosen structure
/// (config.lambda weighs the covariance step), then solve the per-task ridge
/// problems with config.ridge_lambda. With use_loo, each task's ridge uses a
/// covariance fitted on the remaining tasks; the reported covariance is the
/// full-data estimate either way.
TwoStepResult two_step_fit(const MultiTaskDataset& dataset,
                           const SolverConfig& config,
                           CovarianceStructure structure,
                           bool use_loo = false);

struct GroupLassoResult {
  CoefficientSet coefficients;
  /// Per-feature variance implied by the variational form of the penalty:
  /// omega_j = lambda_gl * ||beta_{j,.}||_2 / m.
  Vector implied_omega;
  SolveTrace trace;
};

/// Row-wise (2,1)-mixed-norm fit
///   min sum_l 1/2 ||y - X beta||_2^2 + lambda_gl sum_j ||beta_{j,.}||_2
/// by block coordinate descent over feature rows. Rows with uniform column
/// energy across tasks use the closed-form group soft-threshold; general rows
/// reduce to a one-dimensional root equation in the row norm, solved by
/// bisection.
GroupLassoResult group_lasso_fit(const MultiTaskDataset& dataset,
                                 double lambda_gl,
                                 const SolverConfig& config);

/// Objective of the row-penalized problem at the given coefficients.
double group_lasso_objective(const MultiTaskDataset& dataset,
                             const std::vector<Vector>& betas,
                             double lambda_gl);

/// Smallest penalty for which the all-zero solution is optimal:
/// max_j sqrt(sum_l (x_j^T y)^2).
double group_lasso_zero_threshold(const MultiTaskDataset& dataset);

/// Group-lasso feature selection followed by per-task unregularized least
/// squares on the selected rows; off-support coefficients are exact zeros.
/// Throws std::invalid_argument when some restricted design is
/// rank-deficient.
CoefficientSet gls_ls_fit(const MultiTaskDataset& dataset, double lambda_gl,
                          const SolverConfig& config);

namespace detail {
/// group_lasso_fit with an optional warm-start coefficient matrix (feature
/// rows by tasks), used to chain fits across a penalty grid.
GroupLassoResult group_lasso_fit_warm(const MultiTaskDataset& dataset,
                                      double lambda_gl,
                                      const SolverConfig& config,
                                      const Matrix* coef_init);
/// Per-task unregularized least squares restricted to `support`; the refit
/// half of gls_ls_fit.
CoefficientSet ls_refit_on_support(const MultiTaskDataset& dataset,
                                   const std::vector<Index>& support);
}  // namespace detail

}  // namespace mtreg
