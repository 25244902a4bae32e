#pragma once

#include "mtreg/types.hpp"

namespace mtreg {

/// Identity-design instance: task l observes y^(l) = beta^(l) + noise, so the
/// responses stack into an m x d matrix. Closed-form solutions exist for this
/// family and serve as exact oracles for the iterative solvers.
///
/// Convention: `lambda` here matches the per-task average scaling of the
/// identity-design objective. The iterative diagonal solver penalizes
/// lambda' * sum_j omega_j on the un-averaged objective, so the two agree
/// when lambda' = m * lambda.
struct NormalMeansInstance {
  Matrix responses;  // m x d
  double sigma2 = 0.0;
  double lambda = 0.0;

  Index num_tasks() const { return responses.rows(); }
  Index dim() const { return responses.cols(); }
};

/// Per-coordinate second moments t_j = m^{-1} sum_l y_{l,j}^2.
Vector mean_square_responses(const NormalMeansInstance& instance);

/// Sparse diagonal covariance closed form: omega_j = max(0, t_j - lambda).
Vector scc_omega_closed_form(const NormalMeansInstance& instance);

/// Two-step coefficient closed form:
///   beta_{l,j} = y_{l,j} * max(0, 1 - lambda / t_j),
/// with the 0/0 case (t_j = 0) defined as 0.
Matrix two_step_beta_closed_form(const NormalMeansInstance& instance);

struct GroupLassoClosedForm {
  Vector omega;  // omega_j = max(0, sqrt(lambda * t_j) - lambda)
  Matrix betas;  // beta_{l,j} = y_{l,j} * max(0, 1 - sqrt(lambda)/sqrt(t_j))
};

GroupLassoClosedForm group_lasso_closed_form(const NormalMeansInstance& instance);

/// Turns an instance into the equivalent identity-design dataset
/// (m tasks, X^(l) = I_d).
MultiTaskDataset identity_design_dataset(const Matrix& responses);

}  // namespace mtreg
