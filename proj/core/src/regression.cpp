#include "mtreg/regression.hpp"

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

// Solves the restricted system beta_J = D (D G_JJ D + lambda I)^{-1} D c_J
// with D = diag(sqrt(omega_J)). W = X_J D makes the inner matrix W'W.
Vector ridge_diagonal(const TaskData& task, const Vector& omega,
                      double lambda) {
  const Index d = omega.size();
  std::vector<Index> support;
  for (Index j = 0; j < d; ++j) {
    if (omega[j] > 0.0) support.push_back(j);
  }
  Vector beta = Vector::Zero(d);
  if (support.empty()) return beta;
  const Index s = static_cast<Index>(support.size());
  Matrix scaled(task.design.rows(), s);
  Vector roots(s);
  for (Index i = 0; i < s; ++i) {
    roots[i] = std::sqrt(omega[support[i]]);
    scaled.col(i) = task.design.col(support[i]) * roots[i];
  }
  Matrix inner = scaled.transpose() * scaled;
  inner.diagonal().array() += lambda;
  const Vector rhs = scaled.transpose() * task.response;
  Vector z;
  if (lambda > 0.0) {
    z = Eigen::LDLT<Matrix>(inner).solve(rhs);
  } else {
    const SymmetricEigen eig = symmetric_eigen(inner);
    const double top = std::max(eig.values[s - 1], 0.0);
    const double cutoff = 1e-10 * (1.0 + top);
    if ((eig.values.array() > cutoff).count() < s) {
      throw std::invalid_argument(
          "ridge_with_covariance: ridge weight is zero and the design is "
          "rank-deficient on the covariance support; no unique solution");
    }
    z = eig.vectors *
        (eig.vectors.transpose() * rhs).cwiseQuotient(eig.values);
  }
  for (Index i = 0; i < s; ++i) beta[support[i]] = roots[i] * z[i];
  return beta;
}

Vector ridge_full(const TaskData& task, const Matrix& omega, double lambda) {
  const Index d = omega.rows();
  const SymmetricEigen eig = symmetric_eigen(omega);
  const double top = std::max(eig.values[d - 1], 0.0);
  const double rank_cut = 1e-12 * (1.0 + top);
  const Vector roots = eig.values.cwiseMax(0.0).cwiseSqrt();
  const Matrix sqrt_omega =
      eig.vectors * roots.asDiagonal() * eig.vectors.transpose();
  const Matrix gram = task.design.transpose() * task.design;
  Matrix inner = sqrt_omega * gram * sqrt_omega;
  inner = symmetrize(inner);
  const Vector rhs = sqrt_omega * (task.design.transpose() * task.response);
  if (lambda > 0.0) {
    inner.diagonal().array() += lambda;
    return sqrt_omega * Eigen::LDLT<Matrix>(inner).solve(rhs);
  }
  const Index omega_rank =
      static_cast<Index>((eig.values.array() > rank_cut).count());
  const SymmetricEigen inner_eig = symmetric_eigen(inner);
  const double inner_top = std::max(inner_eig.values[d - 1], 0.0);
  const double inner_cut = 1e-10 * (1.0 + inner_top);
  const Index inner_rank =
      static_cast<Index>((inner_eig.values.array() > inner_cut).count());
  if (inner_rank < omega_rank) {
    throw std::invalid_argument(
        "ridge_with_covariance: ridge weight is zero and the design is "
        "rank-deficient on the covariance support; no unique solution");
  }
  Vector coeffs = inner_eig.vectors.transpose() * rhs;
  for (Index i = 0; i < d; ++i) {
    coeffs[i] = inner_eig.values[i] > inner_cut ? coeffs[i] / inner_eig.values[i]
                                                : 0.0;
  }
  return sqrt_omega * (inner_eig.vectors * coeffs);
}

}  // namespace

Vector ridge_with_covariance(const TaskData& task,
                             const CovarianceEstimate& omega_hat,
                             const RidgeSolveOptions& options) {
  const Index d = covariance_dim(omega_hat);
  if (task.design.cols() != d) {
    throw std::invalid_argument(
        "ridge_with_covariance: design and covariance dimensions differ");
  }
  if (task.design.rows() != task.response.size()) {
    throw std::invalid_argument(
        "ridge_with_covariance: design rows and response length differ");
  }
  if (!(options.ridge_lambda >= 0.0) || !std::isfinite(options.ridge_lambda)) {
    throw std::invalid_argument(
        "ridge_with_covariance: ridge_lambda must be finite and >= 0");
  }
  if (const auto* diag = std::get_if<DiagonalCovariance>(&omega_hat)) {
    return ridge_diagonal(task, diag->omega(), options.ridge_lambda);
  }
  return ridge_full(task, covariance_as_matrix(omega_hat),
                    options.ridge_lambda);
}

TwoStepResult two_step_fit(const MultiTaskDataset& dataset,
                           const SolverConfig& config,
                           CovarianceStructure structure, bool use_loo) {
  require_valid(dataset);
  validate_config(config);
  TwoStepResult result;
  result.covariance = fit_covariance(dataset, config, structure);
  RidgeSolveOptions options;
  options.ridge_lambda = config.ridge_lambda;
  options.use_loo = use_loo;
  std::vector<Vector> betas;
  betas.reserve(dataset.tasks.size());
  for (Index l = 0; l < dataset.num_tasks(); ++l) {
    if (use_loo) {
      const CovarianceEstimate loo = fit_loo(dataset, l, config, structure);
      betas.push_back(ridge_with_covariance(dataset.tasks[l], loo, options));
    } else {
      betas.push_back(
          ridge_with_covariance(dataset.tasks[l], result.covariance, options));
    }
  }
  result.coefficients = make_coefficient_set(std::move(betas));
  return result;
}

double group_lasso_objective(const MultiTaskDataset& dataset,
                             const std::vector<Vector>& betas,
                             double lambda_gl) {
  const Index m = dataset.num_tasks();
  const Index d = dataset.dimension;
  double loss = 0.0;
  for (Index l = 0; l < m; ++l) {
    loss += 0.5 * (dataset.tasks[l].response -
                   dataset.tasks[l].design * betas[l])
                      .squaredNorm();
  }
  double penalty = 0.0;
  for (Index j = 0; j < d; ++j) {
    double row_sq = 0.0;
    for (Index l = 0; l < m; ++l) row_sq += betas[l][j] * betas[l][j];
    penalty += std::sqrt(row_sq);
  }
  return loss + lambda_gl * penalty;
}

double group_lasso_zero_threshold(const MultiTaskDataset& dataset) {
  const Index d = dataset.dimension;
  Vector row_sq = Vector::Zero(d);
  for (const TaskData& task : dataset.tasks) {
    const Vector corr = task.design.transpose() * task.response;
    row_sq.array() += corr.array().square();
  }
  return row_sq.size() ? std::sqrt(row_sq.maxCoeff()) : 0.0;
}

GroupLassoResult group_lasso_fit(const MultiTaskDataset& dataset,
                                 double lambda_gl,
                                 const SolverConfig& config) {
  return detail::group_lasso_fit_warm(dataset, lambda_gl, config, nullptr);
}

namespace detail {

GroupLassoResult group_lasso_fit_warm(const MultiTaskDataset& dataset,
                                      double lambda_gl,
                                      const SolverConfig& config,
                                      const Matrix* coef_init) {
  require_valid(dataset);
  validate_config(config);
  if (!(lambda_gl >= 0.0) || !std::isfinite(lambda_gl)) {
    throw std::invalid_argument("group_lasso_fit: lambda_gl must be >= 0");
  }
  const Index m = dataset.num_tasks();
  const Index d = dataset.dimension;

  // Row j of `coef` holds the across-task coefficients of feature j.
  Matrix coef = Matrix::Zero(d, m);
  if (coef_init && coef_init->rows() == d && coef_init->cols() == m) {
    coef = *coef_init;
  }
  std::vector<Vector> residuals;
  residuals.reserve(m);
  Matrix col_energy(d, m);
  for (Index l = 0; l < m; ++l) {
    residuals.push_back(dataset.tasks[l].response -
                        dataset.tasks[l].design * coef.col(l));
    col_energy.col(l) =
        dataset.tasks[l].design.colwise().squaredNorm().transpose();
  }

  auto objective = [&]() {
    double loss = 0.0;
    for (Index l = 0; l < m; ++l) loss += 0.5 * residuals[l].squaredNorm();
    double penalty = 0.0;
    for (Index j = 0; j < d; ++j) penalty += coef.row(j).norm();
    return loss + lambda_gl * penalty;
  };

  SolveTrace trace;
  double value = objective();
  const double initial_value = value;
  trace.objective_values.push_back(value);

  Vector corr(m);
  Vector row_new(m);
  for (int sweep = 1; sweep <= config.max_iter; ++sweep) {
    for (Index j = 0; j < d; ++j) {
      for (Index l = 0; l < m; ++l) {
        corr[l] = dataset.tasks[l].design.col(j).dot(residuals[l]) +
                  col_energy(j, l) * coef(j, l);
      }
      const double corr_norm = corr.norm();
      if (corr_norm <= lambda_gl) {
        row_new.setZero();
      } else if (lambda_gl == 0.0) {
        for (Index l = 0; l < m; ++l) {
          row_new[l] = col_energy(j, l) > 0.0 ? corr[l] / col_energy(j, l) : 0.0;
        }
      } else {
        double a_min = std::numeric_limits<double>::infinity();
        double a_max = 0.0;
        for (Index l = 0; l < m; ++l) {
          if (col_energy(j, l) > 0.0) {
            a_min = std::min(a_min, col_energy(j, l));
            a_max = std::max(a_max, col_energy(j, l));
          }
        }
        if (a_max == 0.0) {
          row_new.setZero();  // feature absent from every design
        } else if (a_max - a_min <= 1e-12 * a_max) {
          // Uniform column energy: closed-form group soft-threshold.
          row_new = corr * ((1.0 - lambda_gl / corr_norm) / a_max);
        } else {
          // General designs: the optimal row is c_l / (a_l + lambda/nu) with
          // nu = ||row|| solving sum_l (c_l / (a_l nu + lambda))^2 = 1, a
          // strictly decreasing equation solved by bisection.
          auto excess = [&](double nu) {
            double sum = 0.0;
            for (Index l = 0; l < m; ++l) {
              const double denom = col_energy(j, l) * nu + lambda_gl;
              const double term = corr[l] / denom;
              sum += term * term;
            }
            return sum - 1.0;
          };
          double hi = 0.0;
          for (Index l = 0; l < m; ++l) {
            if (col_energy(j, l) > 0.0) {
              const double r = corr[l] / col_energy(j, l);
              hi += r * r;
            }
          }
          hi = std::sqrt(hi);
          while (excess(hi) > 0.0) hi *= 2.0;
          double lo = 0.0;
          for (int it = 0; it < 200 && hi - lo > 1e-12 * (1.0 + hi); ++it) {
            const double mid = 0.5 * (lo + hi);
            (excess(mid) > 0.0 ? lo : hi) = mid;
          }
          const double nu = 0.5 * (lo + hi);
          for (Index l = 0; l < m; ++l) {
            row_new[l] = corr[l] * nu / (col_energy(j, l) * nu + lambda_gl);
          }
        }
      }
      for (Index l = 0; l < m; ++l) {
        const double delta = row_new[l] - coef(j, l);
        if (delta != 0.0) {
          residuals[l] -= delta * dataset.tasks[l].design.col(j);
          coef(j, l) = row_new[l];
        }
      }
    }
    const double new_value = objective();
    trace.objective_values.push_back(new_value);
    trace.iterations = sweep;
    const double decrease = value - new_value;
    value = new_value;
    const double progress = std::max(initial_value - value,
                                     1e-9 * (1.0 + std::abs(initial_value)));
    if (decrease <= config.rel_tol * progress) {
      trace.converged = true;
      break;
    }
  }

  GroupLassoResult result;
  std::vector<Vector> betas;
  betas.reserve(m);
  for (Index l = 0; l < m; ++l) betas.push_back(coef.col(l));
  result.coefficients = make_coefficient_set(std::move(betas));
  // Variational form of the penalty: the inner minimization over the
  // per-feature variances lands at omega_j = lambda_gl * ||row_j|| / m.
  result.implied_omega = Vector::Zero(d);
  for (Index j = 0; j < d; ++j) {
    result.implied_omega[j] =
        lambda_gl * coef.row(j).norm() / static_cast<double>(m);
  }
  trace.active_set_size =
      static_cast<Index>(result.coefficients.support.size());
  result.trace = std::move(trace);
  return result;
}

}  // namespace detail

namespace detail {

CoefficientSet ls_refit_on_support(const MultiTaskDataset& dataset,
                                   const std::vector<Index>& support) {
  const Index m = dataset.num_tasks();
  const Index d = dataset.dimension;
  std::vector<Vector> betas(m, Vector::Zero(d));
  if (!support.empty()) {
    const Index s = static_cast<Index>(support.size());
    for (Index l = 0; l < m; ++l) {
      Matrix restricted(dataset.tasks[l].design.rows(), s);
      for (Index i = 0; i < s; ++i) {
        restricted.col(i) = dataset.tasks[l].design.col(support[i]);
      }
      Eigen::ColPivHouseholderQR<Matrix> qr(restricted);
      if (qr.rank() < s) {
        throw std::invalid_argument(
            "gls_ls_fit: restricted design for task " + std::to_string(l) +
            " is rank-deficient (" + std::to_string(qr.rank()) + " < " +
            std::to_string(s) + " selected features)");
      }
      const Vector solution = qr.solve(dataset.tasks[l].response);
      for (Index i = 0; i < s; ++i) betas[l][support[i]] = solution[i];
    }
  }
  return make_coefficient_set(std::move(betas));
}

}  // namespace detail

CoefficientSet gls_ls_fit(const MultiTaskDataset& dataset, double lambda_gl,
                          const SolverConfig& config) {
  const GroupLassoResult selection =
      group_lasso_fit(dataset, lambda_gl, config);
  return detail::ls_refit_on_support(dataset,
                                     selection.coefficients.support);
}

}  // namespace mtreg
