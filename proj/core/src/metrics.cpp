#include "mtreg/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace mtreg {

namespace {

void require_shapes(const CoefficientSet& estimate, const GroundTruth& truth) {
  if (estimate.num_tasks() != truth.betas.rows() ||
      estimate.dim() != truth.betas.cols()) {
    throw std::invalid_argument(
        "metrics: estimate and truth shapes do not match");
  }
}

}  // namespace

double normalized_l2_error(const CoefficientSet& estimate,
                           const GroundTruth& truth) {
  require_shapes(estimate, truth);
  const double truth_norm = truth.betas.norm();
  if (truth_norm == 0.0) {
    throw std::invalid_argument(
        "normalized_l2_error: true coefficients are all zero");
  }
  return (stack_coefficients(estimate) - truth.betas).norm() / truth_norm;
}

double per_task_normalized_l2_error(const CoefficientSet& estimate,
                                    const GroundTruth& truth) {
  require_shapes(estimate, truth);
  const Index m = estimate.num_tasks();
  double sum = 0.0;
  for (Index l = 0; l < m; ++l) {
    const double truth_norm = truth.betas.row(l).norm();
    if (truth_norm == 0.0) {
      throw std::invalid_argument(
          "per_task_normalized_l2_error: task " + std::to_string(l) +
          " has all-zero true coefficients");
    }
    sum += (estimate.betas[l].transpose() - truth.betas.row(l)).norm() /
           truth_norm;
  }
  return sum / static_cast<double>(m);
}

std::vector<Index> joint_support(const CoefficientSet& estimate) {
  const Index d = estimate.dim();
  const Index m = estimate.num_tasks();
  Vector row_norms = Vector::Zero(d);
  for (Index j = 0; j < d; ++j) {
    double sq = 0.0;
    for (Index l = 0; l < m; ++l) sq += estimate.betas[l][j] * estimate.betas[l][j];
    row_norms[j] = std::sqrt(sq);
  }
  const double cutoff =
      row_norms.size() ? kSupportRowTol * row_norms.maxCoeff() : 0.0;
  std::vector<Index> support;
  for (Index j = 0; j < d; ++j) {
    if (row_norms[j] > cutoff && row_norms[j] > 0.0) support.push_back(j);
  }
  return support;
}

Index hamming_support_distance(const CoefficientSet& estimate,
                               const GroundTruth& truth) {
  require_shapes(estimate, truth);
  const Index d = estimate.dim();
  std::vector<char> estimated(d, 0), shared(d, 0);
  for (Index j : joint_support(estimate)) estimated[j] = 1;
  for (Index j : truth.shared_support) shared[j] = 1;
  Index distance = 0;
  for (Index j = 0; j < d; ++j) distance += estimated[j] != shared[j];
  return distance;
}

MeanStd aggregate(const std::vector<double>& values) {
  MeanStd out;
  if (values.empty()) return out;
  double sum = 0.0;
  for (double v : values) sum += v;
  out.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double sq = 0.0;
    for (double v : values) sq += (v - out.mean) * (v - out.mean);
    out.std = std::sqrt(sq / static_cast<double>(values.size() - 1));
  }
  return out;
}

}  // namespace mtreg
