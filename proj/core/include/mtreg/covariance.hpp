#pragma once

#include "mtreg/types.hpp"

namespace mtreg {

/// Per-fit diagnostics. `objective_values` holds the full objective after
/// each outer iteration (starting from the initial point) and is
/// non-increasing for every solver in this module.
struct SolveTrace {
  std::vector<double> objective_values;
  int iterations = 0;
  bool converged = false;
  Index active_set_size = 0;

  double final_objective() const {
    return objective_values.empty() ? 0.0 : objective_values.back();
  }
};

/// The diagonal-covariance mismatch objective
///   sum_l 1/2 || y y^T - X diag(omega) X^T ||_F^2
/// expanded as the quadratic form 1/2 w^T A w - b^T w + c with
///   A_{jk} = sum_l (x_j^T x_k)^2,  b_j = sum_l (x_j^T y)^2,
///   c = sum_l ||y||_2^4 / 2.
struct SccQuadratic {
  Matrix gram_sq;
  Vector corr_sq;
  double const_term = 0.0;

  Index dim() const { return corr_sq.size(); }
  /// 1/2 w^T A w - b^T w + const_term.
  double value(const Vector& omega) const;
};

/// Builds the expanded quadratic. Throws std::invalid_argument when the
/// dataset fails validation.
SccQuadratic build_scc_quadratic(const MultiTaskDataset& dataset);

/// c_j = sum_l ||x_j^(l)||_2^2, the per-column energies weighting the
/// trace-penalized variant.
Vector column_energies(const MultiTaskDataset& dataset);

struct DiagonalFit {
  DiagonalCovariance covariance;
  SolveTrace trace;
};
struct PartialFullFit {
  FullCovariance covariance;
  SolveTrace trace;
};
struct DiagLowRankFit {
  DiagPlusLowRank covariance;
  SolveTrace trace;
};

/// Sparse diagonal covariance fit: minimizes the SccQuadratic objective plus
/// config.lambda * sum_j omega_j over omega >= 0 by cyclic coordinate
/// descent with the closed-form nonnegative coordinate update. Entries below
/// kSupportSnapTol * max(omega) are snapped to exact zero on return.
DiagonalFit fit_scc_diagonal(const MultiTaskDataset& dataset,
                             const SolverConfig& config);

/// Trace-penalized diagonal variant: the penalty is
/// config.lambda * sum_j omega_j * c_j with c_j the column energies, which
/// debiases the noise term of the second-moment fit. Reduces to
/// fit_scc_diagonal with a rescaled lambda when all c_j agree.
DiagonalFit fit_scc_trace(const MultiTaskDataset& dataset,
                          const SolverConfig& config);

/// Partial-full covariance fit over the PSD cone:
///   sum_l || y y^T - X Omega X^T ||_F^2
///     + 2 * lambda * sum_k gamma_k ||Omega_{k,.}||_2
/// solved by proximal gradient with backtracking; each prox step applies the
/// row/column group soft-threshold as a symmetric congruence scaling and then
/// projects onto the PSD cone by eigenvalue clipping. The composite prox is
/// approximate, so every step is guarded by a descent check on the full
/// objective.
PartialFullFit fit_partial_full(const MultiTaskDataset& dataset,
                                const SolverConfig& config);

/// Additive decomposition fit: diagonal sparse part plus PSD low-rank part,
///   sum_l 1/2 || y y^T - X (Omega_S + Omega_L) X^T ||_F^2
///     + lambda1 * sum_j omega_j + lambda2 * tr(Omega_L),
/// by block alternation: exact coordinate descent on the diagonal block, one
/// descent-checked proximal gradient step (eigenvalue soft-threshold + PSD
/// clip) on the low-rank block per outer iteration.
DiagLowRankFit fit_diag_lowrank(const MultiTaskDataset& dataset,
                                const SolverConfig& config);

enum class CovarianceStructure { Diagonal, DiagonalTrace, PartialFull, DiagLowRank };

/// Runs the chosen estimator and erases the result type. When `trace` is
/// non-null the solve trace is copied out.
CovarianceEstimate fit_covariance(const MultiTaskDataset& dataset,
                                  const SolverConfig& config,
                                  CovarianceStructure structure,
                                  SolveTrace* trace = nullptr);

/// Leave-one-task-out estimate: the chosen estimator applied to the dataset
/// with task `exclude_task` removed. Requires m >= 2.
CovarianceEstimate fit_loo(const MultiTaskDataset& dataset, Index exclude_task,
                           const SolverConfig& config,
                           CovarianceStructure structure,
                           SolveTrace* trace = nullptr);

/// Worst KKT violation of omega for the nonnegative QP with per-coordinate
/// penalties: max over j of |grad_j| on the active set and of max(0, -grad_j)
/// off it, where grad = A omega - b + penalty.
double scc_kkt_violation(const SccQuadratic& quad, const Vector& omega,
                         const Vector& penalty);

namespace detail {
/// fit_partial_full with an optional warm start, used to chain fits across a
/// penalty grid during cross-validation.
PartialFullFit fit_partial_full_warm(const MultiTaskDataset& dataset,
                                     const SolverConfig& config,
                                     const Matrix* warm_start);
}  // namespace detail

}  // namespace mtreg
