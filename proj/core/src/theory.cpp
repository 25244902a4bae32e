#include "mtreg/theory.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "mtreg/linalg.hpp"
#include "mtreg/regression.hpp"

namespace mtreg {

namespace {

double median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2]
               : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

// C(d, s) capped at `cap` to avoid overflow.
double binomial_capped(int d, int s, double cap) {
  double value = 1.0;
  for (int i = 1; i <= s; ++i) {
    value *= static_cast<double>(d - s + i) / static_cast<double>(i);
    if (value > cap) return cap + 1.0;
  }
  return value;
}

double min_gram_eigenvalue(const Matrix& gram, const std::vector<int>& subset) {
  const Index s = static_cast<Index>(subset.size());
  Matrix sub(s, s);
  for (Index a = 0; a < s; ++a) {
    for (Index b = 0; b < s; ++b) sub(a, b) = gram(subset[a], subset[b]);
  }
  Eigen::SelfAdjointEigenSolver<Matrix> solver(sub, Eigen::EigenvaluesOnly);
  return solver.eigenvalues().minCoeff();
}

}  // namespace

BoundReport prediction_bound_report(const Matrix& design,
                                    const CovarianceEstimate& omega_hat,
                                    const CovarianceEstimate& omega_bar,
                                    double lambda, double sigma2,
                                    int mc_trials, std::uint64_t seed) {
  const Index d = design.cols();
  const Index n = design.rows();
  if (covariance_dim(omega_hat) != d || covariance_dim(omega_bar) != d) {
    throw std::invalid_argument(
        "prediction_bound_report: covariance dimensions do not match design");
  }
  if (!(lambda > 0.0)) {
    throw std::invalid_argument("prediction_bound_report: lambda must be > 0");
  }
  if (lambda < sigma2) {
    throw std::invalid_argument(
        "prediction_bound_report: requires lambda >= sigma2");
  }
  if (mc_trials < 2) {
    throw std::invalid_argument(
        "prediction_bound_report: mc_trials must be >= 2");
  }

  const Matrix hat = covariance_as_matrix(omega_hat);
  const Matrix bar = covariance_as_matrix(omega_bar);
  const Matrix gram = symmetrize(design.transpose() * design);
  const Matrix gram_half = sqrt_psd(gram);
  const Matrix bar_half = sqrt_psd(bar);

  BoundReport report;
  report.mc_trials = mc_trials;

  // Mismatch term: X (Ohat Sigma + lambda I)^{-1} (Ohat - Obar)
  //                Sigma^{1/2} (Sigma^{1/2} Obar Sigma^{1/2} + lambda I)^{-1/2}.
  Matrix resolvent = hat * gram;
  resolvent.diagonal().array() += lambda;
  const Matrix resolvent_inv = resolvent.partialPivLu().inverse();
  const Matrix whitener =
      inv_sqrt_psd_shifted(symmetrize(gram_half * bar * gram_half), lambda);
  const Matrix mismatch =
      design * resolvent_inv * (hat - bar) * gram_half * whitener;
  report.mismatch_omega = mismatch.squaredNorm();
  report.lower = sigma2 * lambda * report.mismatch_omega;
  report.upper = lambda * lambda * report.mismatch_omega;

  // Achievable baseline: lambda * tr[X Obar (Sigma Obar + lambda I)^{-1} X'],
  // equal to lambda * || X Obar^{1/2} (Obar^{1/2} Sigma Obar^{1/2}
  // + lambda I)^{-1/2} ||_F^2. The lambda factor is what the error
  // decomposition actually achieves at Ohat = Obar; without it the sandwich
  // below is empirically false.
  const Matrix opt_whitener =
      inv_sqrt_psd_shifted(symmetrize(bar_half * gram * bar_half), lambda);
  report.optimal_term =
      lambda * (design * bar_half * opt_whitener).squaredNorm();
  report.simplified_upper =
      report.optimal_term + (gram * (hat - bar)).squaredNorm() / lambda;

  // Monte-Carlo estimate of the expected prediction error. The ridge solve
  // with a fixed covariance is linear in y, so it collapses to the
  // precomputed map y -> X S (S Sigma S + lambda I)^{-1} S X^T y.
  const Matrix hat_half = sqrt_psd(hat);
  Matrix inner = symmetrize(hat_half * gram * hat_half);
  inner.diagonal().array() += lambda;
  const Matrix ridge_map =
      hat_half * Eigen::LDLT<Matrix>(inner).solve(hat_half);
  const Matrix predictor = design * ridge_map * design.transpose();

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double noise_sd = std::sqrt(sigma2);
  Vector coeff_draw(d), truth_mean(n), noisy(n), diff(n);
  double mean = 0.0;
  double m2 = 0.0;
  for (int trial = 0; trial < mc_trials; ++trial) {
    for (Index i = 0; i < d; ++i) coeff_draw[i] = normal(rng);
    truth_mean.noalias() = design * (bar_half * coeff_draw);
    for (Index i = 0; i < n; ++i) noisy[i] = truth_mean[i] + noise_sd * normal(rng);
    diff.noalias() = predictor * noisy;
    diff -= truth_mean;
    const double value = diff.squaredNorm();
    const double delta = value - mean;
    mean += delta / static_cast<double>(trial + 1);
    m2 += delta * (value - mean);
  }
  report.mc_error_estimate = mean;
  const double variance = m2 / static_cast<double>(mc_trials - 1);
  report.mc_stderr = std::sqrt(variance / static_cast<double>(mc_trials));

  const double excess = report.mc_error_estimate - report.optimal_term;
  const double band = 3.0 * report.mc_stderr;
  report.sandwich_ok =
      excess >= report.lower - band && excess <= report.upper + band;
  report.simplified_ok =
      report.mc_error_estimate <= report.simplified_upper + band;
  return report;
}

CoherenceReport coherence_report(const Matrix& design, int s,
                                 long exhaustive_limit, std::uint64_t seed,
                                 long sample_count) {
  const int d = static_cast<int>(design.cols());
  if (s < 1 || s > d) {
    throw std::invalid_argument("coherence_report: s must be in [1, d]");
  }
  const Matrix gram = symmetrize(design.transpose() * design);
  CoherenceReport report;
  report.s = s;
  report.x_max_sq = gram.diagonal().maxCoeff();
  report.rho_max_gram = largest_eigenvalue(gram);
  report.theta = 0.0;
  for (Index a = 0; a < d; ++a) {
    for (Index b = a + 1; b < d; ++b) {
      report.theta = std::max(report.theta, std::abs(gram(a, b)));
    }
  }

  // rho_min over subsets of size <= s equals the minimum over subsets of
  // size exactly s (eigenvalues interlace under column deletion).
  const double subsets = binomial_capped(d, s, static_cast<double>(exhaustive_limit));
  double rho_min = std::numeric_limits<double>::infinity();
  if (subsets <= static_cast<double>(exhaustive_limit)) {
    report.rho_min_exact = true;
    std::vector<int> subset(s);
    for (int i = 0; i < s; ++i) subset[i] = i;
    while (true) {
      rho_min = std::min(rho_min, min_gram_eigenvalue(gram, subset));
      int pos = s - 1;
      while (pos >= 0 && subset[pos] == d - s + pos) --pos;
      if (pos < 0) break;
      ++subset[pos];
      for (int i = pos + 1; i < s; ++i) subset[i] = subset[i - 1] + 1;
    }
  } else {
    report.rho_min_exact = false;
    std::mt19937_64 rng(seed);
    std::vector<int> pool(d);
    for (int i = 0; i < d; ++i) pool[i] = i;
    std::vector<int> subset(s);
    for (long trial = 0; trial < sample_count; ++trial) {
      for (int i = 0; i < s; ++i) {
        std::uniform_int_distribution<int> pick(i, d - 1);
        std::swap(pool[i], pool[pick(rng)]);
        subset[i] = pool[i];
      }
      rho_min = std::min(rho_min, min_gram_eigenvalue(gram, subset));
    }
  }
  report.rho_min_t = rho_min;
  report.condition_ok =
      report.theta <
      rho_min * rho_min / (4.0 * report.rho_max_gram * static_cast<double>(s));
  return report;
}

std::vector<ConsistencySweepRow> covariance_consistency_sweep(
    const DiagonalCovariance& omega_bar, const Matrix& design,
    const std::vector<int>& m_grid, const std::vector<std::uint64_t>& seeds,
    const SolverConfig& config) {
  if (m_grid.empty()) {
    throw std::invalid_argument("consistency sweep: empty m grid");
  }
  for (std::size_t i = 0; i + 1 < m_grid.size(); ++i) {
    if (m_grid[i] >= m_grid[i + 1]) {
      throw std::invalid_argument(
          "consistency sweep: m grid must be strictly increasing");
    }
  }
  if (m_grid.front() < 2) {
    throw std::invalid_argument(
        "consistency sweep: every m must be >= 2 (leave-one-out fits)");
  }
  if (seeds.empty()) {
    throw std::invalid_argument("consistency sweep: needs at least one seed");
  }
  if (design.cols() != omega_bar.dim()) {
    throw std::invalid_argument(
        "consistency sweep: design and covariance dimensions differ");
  }
  validate_config(config);

  const Index n = design.rows();
  const Index d = design.cols();
  const double sigma2 = config.lambda;  // generative noise variance
  const double noise_sd = std::sqrt(sigma2);
  const Vector omega_root = omega_bar.omega().cwiseSqrt();
  const Matrix target =
      design * Matrix(omega_bar.omega().asDiagonal()) * design.transpose();

  // The fit weight plays the noise variance; the asymptotics only pin it up
  // to a constant, so a small grid around sigma2 is swept and the best
  // discrepancy kept per (m, seed).
  std::vector<double> weight_grid;
  if (sigma2 > 0.0) {
    for (double factor : {0.5, 1.0, 2.0, 4.0, 8.0}) {
      weight_grid.push_back(factor * sigma2);
    }
  } else {
    weight_grid.push_back(0.0);
  }

  std::vector<ConsistencySweepRow> rows;
  rows.reserve(m_grid.size());
  for (int m : m_grid) {
    ConsistencySweepRow row;
    row.m = m;
    for (std::uint64_t seed : seeds) {
      std::mt19937_64 rng(
          derive_seed(seed, static_cast<std::uint64_t>(m)));
      std::normal_distribution<double> normal(0.0, 1.0);
      MultiTaskDataset dataset;
      dataset.dimension = d;
      dataset.tasks.reserve(m);
      for (int l = 0; l < m; ++l) {
        Vector coeff(d);
        for (Index j = 0; j < d; ++j) coeff[j] = omega_root[j] * normal(rng);
        Vector y = design * coeff;
        for (Index i = 0; i < n; ++i) y[i] += noise_sd * normal(rng);
        dataset.tasks.push_back({design, std::move(y)});
      }
      double best = std::numeric_limits<double>::infinity();
      for (double weight : weight_grid) {
        SolverConfig fit_config = config;
        fit_config.lambda = weight;
        const CovarianceEstimate estimate = fit_loo(
            dataset, 0, fit_config, CovarianceStructure::DiagonalTrace);
        const Matrix fitted = covariance_as_matrix(estimate);
        const double discrepancy =
            (design * fitted * design.transpose() - target).squaredNorm();
        best = std::min(best, discrepancy);
      }
      row.per_seed.push_back(best);
    }
    row.median_discrepancy = median(row.per_seed);
    rows.push_back(std::move(row));
  }
  return rows;
}

IdentifiabilityReport identifiability_report(const DiagPlusLowRank& decomp) {
  IdentifiabilityReport report;
  // For a diagonal sign pattern both the 1->1 and inf->inf operator norms
  // equal 1 as soon as any entry is nonzero.
  const bool any_nonzero = (decomp.sparse_part.omega().array() > 0.0).any();
  report.alpha = any_nonzero ? 1.0 : 0.0;

  const Matrix& lowrank = decomp.lowrank_part.matrix();
  const SymmetricEigen eig = symmetric_eigen(lowrank);
  const Index d = lowrank.rows();
  const double top = d > 0 ? std::max(eig.values[d - 1], 0.0) : 0.0;
  const double cutoff = kPsdTol * (1.0 + top);
  Index rank = 0;
  for (Index i = 0; i < d; ++i) {
    if (eig.values[i] > cutoff) ++rank;
  }
  report.rank = rank;
  if (rank == 0) {
    report.beta = 0.0;
  } else {
    // Symmetric PSD low-rank part: both singular-vector blocks coincide with
    // the eigenvector block of the nonzero eigenvalues.
    const Matrix basis = eig.vectors.rightCols(rank);
    const Matrix projector = basis * basis.transpose();
    const double max_entry = projector.cwiseAbs().maxCoeff();
    const double max_row_norm_sq = basis.rowwise().squaredNorm().maxCoeff();
    report.beta = 2.0 * max_entry + max_row_norm_sq;
  }
  report.product = report.alpha * report.beta;
  report.identifiable = report.product < 1.0;
  return report;
}

}  // namespace mtreg
