#include "mtreg/oracles.hpp"

#include <cmath>
#include <stdexcept>

#include "mtreg/linalg.hpp"

namespace mtreg {

namespace {

void require_valid(const NormalMeansInstance& instance) {
  if (instance.responses.rows() < 1) {
    throw std::invalid_argument("NormalMeansInstance: needs at least one task");
  }
  if (!all_finite(instance.responses)) {
    throw std::invalid_argument("NormalMeansInstance: non-finite response");
  }
  if (!(instance.lambda >= 0.0)) {
    throw std::invalid_argument("NormalMeansInstance: lambda must be >= 0");
  }
}

}  // namespace

Vector mean_square_responses(const NormalMeansInstance& instance) {
  const double m = static_cast<double>(instance.num_tasks());
  return instance.responses.array().square().colwise().sum().transpose() / m;
}

Vector scc_omega_closed_form(const NormalMeansInstance& instance) {
  require_valid(instance);
  const Vector t = mean_square_responses(instance);
  return (t.array() - instance.lambda).max(0.0);
}

Matrix two_step_beta_closed_form(const NormalMeansInstance& instance) {
  require_valid(instance);
  const Vector t = mean_square_responses(instance);
  Matrix betas = instance.responses;
  for (Index j = 0; j < t.size(); ++j) {
    // t_j = 0 gives the 0/0 shrinkage factor; its limit from above is 0.
    const double factor =
        t[j] > 0.0 ? std::max(0.0, 1.0 - instance.lambda / t[j]) : 0.0;
    betas.col(j) *= factor;
  }
  return betas;
}

GroupLassoClosedForm group_lasso_closed_form(
    const NormalMeansInstance& instance) {
  require_valid(instance);
  const Vector t = mean_square_responses(instance);
  GroupLassoClosedForm out;
  out.omega = Vector::Zero(t.size());
  out.betas = instance.responses;
  const double root_lambda = std::sqrt(instance.lambda);
  for (Index j = 0; j < t.size(); ++j) {
    out.omega[j] = std::max(
        0.0, std::sqrt(instance.lambda * t[j]) - instance.lambda);
    const double factor =
        t[j] > 0.0 ? std::max(0.0, 1.0 - root_lambda / std::sqrt(t[j])) : 0.0;
    out.betas.col(j) *= factor;
  }
  return out;
}

MultiTaskDataset identity_design_dataset(const Matrix& responses) {
  const Index m = responses.rows();
  const Index d = responses.cols();
  MultiTaskDataset dataset;
  dataset.dimension = d;
  dataset.tasks.reserve(m);
  for (Index l = 0; l < m; ++l) {
    dataset.tasks.push_back({Matrix::Identity(d, d), responses.row(l)});
  }
  return dataset;
}

}  // namespace mtreg
