#include "mtreg/covariance.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mtreg/linalg.hpp"

namespace mtreg {

namespace {

void require_valid(const MultiTaskDataset& dataset) {
  const auto report = validate_dataset(dataset);
  if (!report.empty()) {
    std::string joined = "invalid dataset: " + report.front();
    for (std::size_t i = 1; i < report.size(); ++i) joined += "; " + report[i];
    throw std::invalid_argument(joined);
  }
}

Vector snap_support(Vector omega) {
  const double max_entry = omega.size() ? omega.maxCoeff() : 0.0;
  const double cutoff = kSupportSnapTol * max_entry;
  for (Index j = 0; j < omega.size(); ++j) {
    if (omega[j] < cutoff) omega[j] = 0.0;
  }
  return omega;
}

struct CdResult {
  Vector omega;
  SolveTrace trace;
};

// Cyclic coordinate descent for min_{w >= 0} 1/2 w'Aw - b'w + penalty'w + c.
// Each coordinate update is the exact nonnegative minimizer, so the
// objective is non-increasing; the gradient A w - b is refreshed at the top
// of every sweep and maintained incrementally within it.
CdResult coordinate_descent_nqp(const Matrix& gram, const Vector& linear,
                                const Vector& penalty, double const_term,
                                Vector omega, double rel_tol, int max_sweeps) {
  const Index d = linear.size();
  CdResult result;
  auto objective = [&](const Vector& w) {
    return 0.5 * w.dot(gram * w) - linear.dot(w) + penalty.dot(w) + const_term;
  };
  double value = objective(omega);
  const double initial_value = value;
  result.trace.objective_values.push_back(value);
  Vector grad(d);
  for (int sweep = 1; sweep <= max_sweeps; ++sweep) {
    grad.noalias() = gram * omega;
    grad -= linear;
    for (Index j = 0; j < d; ++j) {
      const double curvature = gram(j, j);
      if (curvature <= 0.0) {
        // Zero column in every design: the coordinate term is linear with
        // nonnegative slope, so the minimizer sits at zero.
        if (omega[j] != 0.0) {
          grad.noalias() += (0.0 - omega[j]) * gram.col(j);
          omega[j] = 0.0;
        }
        continue;
      }
      const double candidate = omega[j] - (grad[j] + penalty[j]) / curvature;
      const double updated = std::max(0.0, candidate);
      const double delta = updated - omega[j];
      if (delta != 0.0) {
        grad.noalias() += delta * gram.col(j);
        omega[j] = updated;
      }
    }
    const double new_value = objective(omega);
    result.trace.objective_values.push_back(new_value);
    result.trace.iterations = sweep;
    const double decrease = value - new_value;
    value = new_value;
    // Progress is measured against what the solve has gained so far, not the
    // raw objective: its constant part can dwarf the improvable part.
    const double progress = std::max(initial_value - value,
                                     1e-9 * (1.0 + std::abs(initial_value)));
    if (decrease <= rel_tol * progress) {
      result.trace.converged = true;
      break;
    }
  }
  result.omega = std::move(omega);
  return result;
}

DiagonalFit fit_diagonal_with_penalty(const MultiTaskDataset& dataset,
                                      const SolverConfig& config,
                                      const Vector& penalty) {
  require_valid(dataset);
  validate_config(config);
  const SccQuadratic quad = build_scc_quadratic(dataset);
  CdResult cd = coordinate_descent_nqp(
      quad.gram_sq, quad.corr_sq, penalty, quad.const_term,
      Vector::Zero(quad.dim()), config.rel_tol, config.max_iter);
  DiagonalFit fit;
  fit.trace = std::move(cd.trace);
  Vector omega = snap_support(std::move(cd.omega));
  fit.trace.active_set_size =
      static_cast<Index>((omega.array() > 0.0).count());
  fit.covariance = DiagonalCovariance(std::move(omega));
  return fit;
}

// Second-moment data for the matrix-valued solvers. With G_l = X_l' X_l and
// g_l = X_l' y_l, the smooth half-objective
//   sum_l 1/2 || y y' - X M X' ||_F^2
// equals y4/2 - <Q, M> + 1/2 sum_l tr(G_l M G_l M), Q = sum_l g_l g_l'.
struct Moments {
  std::vector<Matrix> grams;
  Matrix q;
  double y4 = 0.0;
  Index dim = 0;

  double smooth_half(const Matrix& m) const {
    double quad_term = 0.0;
    Matrix t(dim, dim);
    for (const Matrix& gram : grams) {
      t.noalias() = gram * m;
      quad_term += (t.array() * t.transpose().array()).sum();
    }
    return 0.5 * y4 - (q.array() * m.array()).sum() + 0.5 * quad_term;
  }

  // sum_l G_l M G_l - Q, the gradient of smooth_half.
  Matrix gradient_half(const Matrix& m) const {
    Matrix grad = -q;
    Matrix t(dim, dim);
    for (const Matrix& gram : grams) {
      t.noalias() = gram * m;
      grad.noalias() += t * gram;
    }
    return grad;
  }

  // Upper bound on the curvature of smooth_half along symmetric directions.
  // The grams are PSD, so a short power iteration pins their top eigenvalue
  // cheaply.
  double lipschitz_half() const {
    double sum = 0.0;
    for (const Matrix& gram : grams) {
      Vector v = Vector::Ones(gram.rows()).normalized();
      double top = 0.0;
      for (int it = 0; it < 30; ++it) {
        Vector w = gram * v;
        const double norm = w.norm();
        if (norm <= 0.0) break;
        v = w / norm;
        top = norm;
      }
      sum += 1.1 * top * top;  // slack for the unconverged tail
    }
    return sum;
  }
};

Moments build_moments(const MultiTaskDataset& dataset) {
  Moments moments;
  moments.dim = dataset.dimension;
  moments.q = Matrix::Zero(moments.dim, moments.dim);
  moments.grams.reserve(dataset.tasks.size());
  for (const TaskData& task : dataset.tasks) {
    moments.grams.emplace_back(task.design.transpose() * task.design);
    const Vector corr = task.design.transpose() * task.response;
    moments.q.noalias() += corr * corr.transpose();
    const double sq = task.response.squaredNorm();
    moments.y4 += sq * sq;
  }
  return moments;
}

Vector resolve_gamma(const SolverConfig& config, Index d) {
  if (config.gamma.size() == 0) return Vector::Ones(d);
  if (config.gamma.size() != d) {
    throw std::invalid_argument(
        "SolverConfig: gamma length does not match the dataset dimension");
  }
  return config.gamma;
}

double row_group_penalty(const Matrix& m, const Vector& gamma, double weight) {
  double sum = 0.0;
  for (Index k = 0; k < m.rows(); ++k) sum += gamma[k] * m.row(k).norm();
  return 2.0 * weight * sum;
}

// Group soft-threshold on rows and columns at once: per-index shrink factors
// from the row norms, applied as a congruence diag(f) Z diag(f). This keeps
// the matrix symmetric, zeroes row k and column k together, and the zeros
// survive the PSD projection (a congruence maps the PSD cone to itself).
Matrix row_group_threshold(const Matrix& z, const Vector& gamma,
                           double amount) {
  Vector factors(z.rows());
  for (Index k = 0; k < z.rows(); ++k) {
    const double norm = z.row(k).norm();
    const double cut = amount * gamma[k];
    factors[k] = norm > cut ? 1.0 - cut / norm : 0.0;
  }
  return factors.asDiagonal() * z * factors.asDiagonal();
}

}  // namespace

double SccQuadratic::value(const Vector& omega) const {
  return 0.5 * omega.dot(gram_sq * omega) - corr_sq.dot(omega) + const_term;
}

SccQuadratic build_scc_quadratic(const MultiTaskDataset& dataset) {
  require_valid(dataset);
  const Index d = dataset.dimension;
  SccQuadratic quad;
  quad.gram_sq = Matrix::Zero(d, d);
  quad.corr_sq = Vector::Zero(d);
  quad.const_term = 0.0;
  for (const TaskData& task : dataset.tasks) {
    const Matrix gram = task.design.transpose() * task.design;
    quad.gram_sq.array() += gram.array().square();
    const Vector corr = task.design.transpose() * task.response;
    quad.corr_sq.array() += corr.array().square();
    const double sq = task.response.squaredNorm();
    quad.const_term += 0.5 * sq * sq;
  }
  return quad;
}

Vector column_energies(const MultiTaskDataset& dataset) {
  Vector energies = Vector::Zero(dataset.dimension);
  for (const TaskData& task : dataset.tasks) {
    energies += task.design.colwise().squaredNorm().transpose();
  }
  return energies;
}

DiagonalFit fit_scc_diagonal(const MultiTaskDataset& dataset,
                             const SolverConfig& config) {
  const Vector penalty =
      Vector::Constant(dataset.dimension, config.lambda);
  return fit_diagonal_with_penalty(dataset, config, penalty);
}

DiagonalFit fit_scc_trace(const MultiTaskDataset& dataset,
                          const SolverConfig& config) {
  const Vector penalty = config.lambda * column_energies(dataset);
  return fit_diagonal_with_penalty(dataset, config, penalty);
}

PartialFullFit fit_partial_full(const MultiTaskDataset& dataset,
                                const SolverConfig& config) {
  return detail::fit_partial_full_warm(dataset, config, nullptr);
}

namespace detail {

// Accelerated proximal gradient on the partial-full objective (smooth part
// without the 1/2, penalty 2*lambda*sum_k gamma_k ||row_k||). Each prox step
// applies the row/column group soft-threshold as a symmetric congruence
// scaling followed by PSD projection (eigenvalue clipping); step sizes are
// backtracked against the smooth majorization. Momentum steps are kept only
// when the full objective decreases, otherwise the iteration restarts with a
// plain descent-checked step, so the reported trace is non-increasing even
// though the composite prox is approximate.
PartialFullFit fit_partial_full_warm(const MultiTaskDataset& dataset,
                                     const SolverConfig& config,
                                     const Matrix* warm_start) {
  require_valid(dataset);
  validate_config(config);
  const Index d = dataset.dimension;
  const Vector gamma = resolve_gamma(config, d);
  const Moments moments = build_moments(dataset);

  auto smooth = [&](const Matrix& m) { return 2.0 * moments.smooth_half(m); };
  auto objective = [&](const Matrix& m) {
    return smooth(m) + row_group_penalty(m, gamma, config.lambda);
  };
  auto prox = [&](const Matrix& point, const Matrix& grad, double eta) {
    return psd_project(row_group_threshold(symmetrize(point - eta * grad),
                                           gamma, 2.0 * config.lambda * eta));
  };

  double lipschitz = 2.0 * moments.lipschitz_half();
  if (!(lipschitz > 0.0)) lipschitz = 1.0;
  double eta = 1.0 / lipschitz;
  const double eta_max = 1024.0 / lipschitz;
  const double eta_floor = 1e-18 / lipschitz;

  Matrix x = warm_start ? *warm_start : Matrix::Zero(d, d);
  Matrix x_prev = x;
  double fx = objective(x);
  const double initial_value = fx;
  double momentum = 1.0;

  SolveTrace trace;
  trace.objective_values.push_back(fx);

  for (int iter = 1; iter <= config.max_iter; ++iter) {
    const double momentum_next =
        0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum * momentum));
    const Matrix extrapolated =
        x + ((momentum - 1.0) / momentum_next) * (x - x_prev);
    const Matrix grad = 2.0 * moments.gradient_half(extrapolated);
    const double smooth_at_base = smooth(extrapolated);

    // Backtrack until the smooth part is majorized at the candidate.
    eta = std::min(2.0 * eta, eta_max);
    Matrix candidate;
    double smooth_at_candidate = 0.0;
    while (true) {
      candidate = prox(extrapolated, grad, eta);
      smooth_at_candidate = smooth(candidate);
      const Matrix diff = candidate - extrapolated;
      const double bound = smooth_at_base + (grad.array() * diff.array()).sum() +
                           diff.squaredNorm() / (2.0 * eta);
      if (smooth_at_candidate <= bound + 1e-9 * (1.0 + std::abs(bound)) ||
          eta * 0.5 < eta_floor) {
        break;
      }
      eta *= 0.5;
    }
    double f_candidate = smooth_at_candidate +
                         row_group_penalty(candidate, gamma, config.lambda);

    bool accepted = f_candidate < fx;
    if (!accepted) {
      // Momentum overshoot: restart with a plain descent-checked step.
      momentum = 1.0;
      const Matrix grad_x = 2.0 * moments.gradient_half(x);
      double eta_plain = eta;
      while (eta_plain >= eta_floor) {
        candidate = prox(x, grad_x, eta_plain);
        f_candidate = objective(candidate);
        if (f_candidate < fx) {
          accepted = true;
          eta = eta_plain;
          break;
        }
        eta_plain *= 0.5;
      }
      if (!accepted) {
        // No descent step exists at machine precision: stationary.
        trace.converged = true;
        break;
      }
    } else {
      momentum = momentum_next;
    }

    x_prev = x;
    x = std::move(candidate);
    const double decrease = fx - f_candidate;
    fx = f_candidate;
    trace.objective_values.push_back(fx);
    trace.iterations = iter;
    const double progress = std::max(initial_value - fx,
                                     1e-9 * (1.0 + std::abs(initial_value)));
    if (decrease <= config.rel_tol * progress) {
      trace.converged = true;
      break;
    }
  }

  PartialFullFit fit;
  const double row_cut = kSupportSnapTol * (1.0 + x.cwiseAbs().maxCoeff());
  Index active = 0;
  for (Index k = 0; k < d; ++k) {
    if (x.row(k).norm() > row_cut) ++active;
  }
  trace.active_set_size = active;
  fit.trace = std::move(trace);
  try {
    fit.covariance = FullCovariance(x);
  } catch (const std::invalid_argument& e) {
    throw std::logic_error(
        std::string("fit_partial_full: PSD projection failed: ") + e.what());
  }
  return fit;
}

}  // namespace detail

DiagLowRankFit fit_diag_lowrank(const MultiTaskDataset& dataset,
                                const SolverConfig& config) {
  require_valid(dataset);
  validate_config(config);
  const Index d = dataset.dimension;
  const Moments moments = build_moments(dataset);
  const SccQuadratic quad = build_scc_quadratic(dataset);
  const Vector penalty1 = Vector::Constant(d, config.lambda1);

  auto objective = [&](const Vector& omega, const Matrix& lowrank) {
    Matrix combined = lowrank;
    combined.diagonal() += omega;
    return moments.smooth_half(combined) + config.lambda1 * omega.sum() +
           config.lambda2 * lowrank.trace();
  };

  Vector omega = Vector::Zero(d);
  Matrix lowrank = Matrix::Zero(d, d);
  double lipschitz = moments.lipschitz_half();
  if (!(lipschitz > 0.0)) lipschitz = 1.0;
  double step = 1.0 / lipschitz;
  const double step_max = 1024.0 / lipschitz;
  const double step_floor = 1e-18 / lipschitz;

  SolveTrace trace;
  double value = objective(omega, lowrank);
  const double initial_value = value;
  trace.objective_values.push_back(value);
  const int inner_sweeps = 100;

  for (int iter = 1; iter <= config.max_iter; ++iter) {
    // Diagonal block: exact coordinate descent on the quadratic obtained by
    // holding the low-rank part fixed. The linear term shifts by the
    // diagonal of sum_l G_l L G_l.
    Vector shifted = quad.corr_sq;
    if (lowrank.cwiseAbs().maxCoeff() > 0.0) {
      Matrix t(d, d);
      for (const Matrix& gram : moments.grams) {
        t.noalias() = gram * lowrank;
        shifted.array() -= (t.array() * gram.transpose().array())
                               .rowwise()
                               .sum();  // diag(G L G)
      }
    }
    CdResult cd = coordinate_descent_nqp(quad.gram_sq, shifted, penalty1, 0.0,
                                         omega, config.rel_tol, inner_sweeps);
    omega = std::move(cd.omega);

    // Low-rank block: one descent-checked proximal gradient step with the
    // trace-norm prox restricted to the PSD cone (eigenvalue soft-threshold
    // followed by clipping, computed in one pass).
    Matrix combined = lowrank;
    combined.diagonal() += omega;
    const Matrix grad = moments.gradient_half(combined);
    const double value_mid = objective(omega, lowrank);
    step = std::min(2.0 * step, step_max);
    while (step >= step_floor) {
      const SymmetricEigen eig =
          symmetric_eigen(symmetrize(lowrank - step * grad));
      const Vector shrunk =
          (eig.values.array() - step * config.lambda2).max(0.0);
      Matrix candidate =
          eig.vectors * shrunk.asDiagonal() * eig.vectors.transpose();
      const double candidate_value = objective(omega, candidate);
      if (candidate_value < value_mid) {
        lowrank = std::move(candidate);
        break;
      }
      step *= 0.5;
    }

    const double new_value = objective(omega, lowrank);
    trace.objective_values.push_back(new_value);
    trace.iterations = iter;
    const double decrease = value - new_value;
    value = new_value;
    const double progress = std::max(initial_value - value,
                                     1e-9 * (1.0 + std::abs(initial_value)));
    if (decrease <= config.rel_tol * progress) {
      trace.converged = true;
      break;
    }
  }

  DiagLowRankFit fit;
  omega = snap_support(std::move(omega));
  trace.active_set_size = static_cast<Index>((omega.array() > 0.0).count());
  fit.trace = std::move(trace);
  fit.covariance.sparse_part = DiagonalCovariance(std::move(omega));
  try {
    fit.covariance.lowrank_part = FullCovariance(symmetrize(lowrank));
  } catch (const std::invalid_argument& e) {
    throw std::logic_error(
        std::string("fit_diag_lowrank: PSD projection failed: ") + e.what());
  }
  fit.covariance.rank_estimate = psd_rank(fit.covariance.lowrank_part.matrix());
  return fit;
}

CovarianceEstimate fit_covariance(const MultiTaskDataset& dataset,
                                  const SolverConfig& config,
                                  CovarianceStructure structure,
                                  SolveTrace* trace) {
  switch (structure) {
    case CovarianceStructure::Diagonal: {
      DiagonalFit fit = fit_scc_diagonal(dataset, config);
      if (trace) *trace = fit.trace;
      return fit.covariance;
    }
    case CovarianceStructure::DiagonalTrace: {
      DiagonalFit fit = fit_scc_trace(dataset, config);
      if (trace) *trace = fit.trace;
      return fit.covariance;
    }
    case CovarianceStructure::PartialFull: {
      PartialFullFit fit = fit_partial_full(dataset, config);
      if (trace) *trace = fit.trace;
      return fit.covariance;
    }
    case CovarianceStructure::DiagLowRank: {
      DiagLowRankFit fit = fit_diag_lowrank(dataset, config);
      if (trace) *trace = fit.trace;
      return fit.covariance;
    }
  }
  throw std::invalid_argument("fit_covariance: unknown structure");
}

CovarianceEstimate fit_loo(const MultiTaskDataset& dataset, Index exclude_task,
                           const SolverConfig& config,
                           CovarianceStructure structure, SolveTrace* trace) {
  const Index m = dataset.num_tasks();
  if (m < 2) {
    throw std::invalid_argument(
        "fit_loo: needs at least two tasks (nothing left to fit after "
        "exclusion)");
  }
  if (exclude_task < 0 || exclude_task >= m) {
    throw std::invalid_argument("fit_loo: exclude_task out of range");
  }
  MultiTaskDataset reduced;
  reduced.dimension = dataset.dimension;
  reduced.tasks.reserve(m - 1);
  for (Index l = 0; l < m; ++l) {
    if (l != exclude_task) reduced.tasks.push_back(dataset.tasks[l]);
  }
  return fit_covariance(reduced, config, structure, trace);
}

double scc_kkt_violation(const SccQuadratic& quad, const Vector& omega,
                         const Vector& penalty) {
  const Vector grad = quad.gram_sq * omega - quad.corr_sq + penalty;
  double worst = 0.0;
  for (Index j = 0; j < omega.size(); ++j) {
    const double violation =
        omega[j] > 0.0 ? std::abs(grad[j]) : std::max(0.0, -grad[j]);
    worst = std::max(worst, violation);
  }
  return worst;
}

}  // namespace mtreg
