#pragma once

#include <cstdint>

#include "mtreg/covariance.hpp"
#include "mtreg/types.hpp"

namespace mtreg {

/// Output of the prediction-error bound check. With Sigma = X^T X and
/// mismatch
///   w = || X (Ohat Sigma + lambda I)^{-1} (Ohat - Obar)
///          Sigma^{1/2} (Sigma^{1/2} Obar Sigma^{1/2} + lambda I)^{-1/2} ||_F^2
/// the excess expected prediction error over the achievable baseline
///   opt = lambda * || X Obar^{1/2}
///                     (Obar^{1/2} Sigma Obar^{1/2} + lambda I)^{-1/2} ||_F^2
/// is bounded below by sigma2 * lambda * w and above by lambda^2 * w; at
/// lambda = sigma2 the two sides coincide and the bound is an equality. The
/// Monte-Carlo estimate of the error must land inside that interval up to
/// three standard errors.
struct BoundReport {
  double mismatch_omega = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double optimal_term = 0.0;
  double mc_error_estimate = 0.0;
  double mc_stderr = 0.0;
  /// optimal_term + lambda^{-1} || Sigma (Ohat - Obar) ||_F^2.
  double simplified_upper = 0.0;
  int mc_trials = 0;
  bool sandwich_ok = false;
  bool simplified_ok = false;
};

/// Computes the bound quantities by dense linear algebra and estimates the
/// expected prediction error by simulating coefficient draws from Obar and
/// Gaussian noise, solving the covariance-weighted ridge with Ohat each time.
/// Requires lambda >= sigma2 (the bound's assumption) and lambda > 0.
BoundReport prediction_bound_report(const Matrix& design,
                                    const CovarianceEstimate& omega_hat,
                                    const CovarianceEstimate& omega_bar,
                                    double lambda, double sigma2,
                                    int mc_trials, std::uint64_t seed);

/// Column-coherence quantities of a design matrix: theta is the largest
/// absolute inner product between distinct columns, x_max_sq the largest
/// squared column norm, rho_min_t the smallest Gram eigenvalue over column
/// subsets of size s (exact by enumeration when C(d, s) <= exhaustive_limit,
/// otherwise an upper estimate from sampled subsets), and condition_ok the
/// test theta < rho_min(s)^2 / (4 rho_max(X^T X) s).
struct CoherenceReport {
  double theta = 0.0;
  double x_max_sq = 0.0;
  double rho_min_t = 0.0;
  double rho_max_gram = 0.0;
  int s = 0;
  bool rho_min_exact = true;
  bool condition_ok = false;
};

CoherenceReport coherence_report(const Matrix& design, int s,
                                 long exhaustive_limit = 200000,
                                 std::uint64_t seed = 0,
                                 long sample_count = 20000);

/// One row of the covariance-consistency sweep: for each task count m the
/// median (over seeds) of || X (Ohat_loo - Obar) X^T ||_F^2, where Ohat_loo
/// is the leave-one-task-out trace-penalized diagonal fit and the fit weight
/// is swept over a small grid around the noise variance with the best
/// discrepancy kept.
struct ConsistencySweepRow {
  int m = 0;
  double median_discrepancy = 0.0;
  std::vector<double> per_seed;
};

std::vector<ConsistencySweepRow> covariance_consistency_sweep(
    const DiagonalCovariance& omega_bar, const Matrix& design,
    const std::vector<int>& m_grid, const std::vector<std::uint64_t>& seeds,
    const SolverConfig& config);

/// Identifiability certificate for the additive decomposition. alpha is the
/// larger of the 1->1 and inf->inf operator norms of the sign pattern of the
/// diagonal part (exactly 1 for a nonzero diagonal); beta sums the entrywise
/// max of U U^T twice with the squared largest row norm of U, U being the
/// eigenvector block of the low-rank part; the decomposition is certified
/// unique when alpha * beta < 1.
struct IdentifiabilityReport {
  double alpha = 0.0;
  double beta = 0.0;
  double product = 0.0;
  Index rank = 0;
  bool identifiable = false;
};

IdentifiabilityReport identifiability_report(const DiagPlusLowRank& decomp);

}  // namespace mtreg
