#include "mtreg/types.hpp"

#include <stdexcept>

#include "mtreg/linalg.hpp"

namespace mtreg {

MultiTaskDataset make_dataset(std::vector<TaskData> tasks) {
  MultiTaskDataset dataset;
  dataset.dimension = tasks.empty() ? 0 : tasks.front().design.cols();
  dataset.tasks = std::move(tasks);
  return dataset;
}

std::vector<std::string> validate_dataset(const MultiTaskDataset& dataset) {
  std::vector<std::string> report;
  if (dataset.tasks.empty()) {
    report.push_back("dataset has no tasks (m must be >= 1)");
    return report;
  }
  for (std::size_t l = 0; l < dataset.tasks.size(); ++l) {
    const TaskData& task = dataset.tasks[l];
    const std::string tag = "task " + std::to_string(l);
    if (task.design.cols() != dataset.dimension) {
      report.push_back(tag + ": dimension mismatch (design has " +
                       std::to_string(task.design.cols()) +
                       " columns, dataset dimension is " +
                       std::to_string(dataset.dimension) + ")");
    }
    if (task.design.rows() != task.response.size()) {
      report.push_back(tag + ": design has " +
                       std::to_string(task.design.rows()) +
                       " rows but response has length " +
                       std::to_string(task.response.size()));
    }
    if (!all_finite(task.design)) {
      report.push_back(tag + ": non-finite value in design");
    }
    if (!all_finite(task.response)) {
      report.push_back(tag + ": non-finite value in response");
    }
  }
  return report;
}

DiagonalCovariance::DiagonalCovariance(Vector omega) : omega_(std::move(omega)) {
  for (Index j = 0; j < omega_.size(); ++j) {
    if (!std::isfinite(omega_[j]) || omega_[j] < 0.0) {
      throw std::invalid_argument(
          "DiagonalCovariance: entry " + std::to_string(j) +
          " is negative or non-finite");
    }
  }
}

std::vector<Index> DiagonalCovariance::support() const {
  std::vector<Index> out;
  for (Index j = 0; j < omega_.size(); ++j) {
    if (omega_[j] > 0.0) out.push_back(j);
  }
  return out;
}

FullCovariance::FullCovariance(Matrix matrix) {
  if (matrix.rows() != matrix.cols()) {
    throw std::invalid_argument("FullCovariance: matrix is not square");
  }
  if (!all_finite(matrix)) {
    throw std::invalid_argument("FullCovariance: non-finite entry");
  }
  if (asymmetry(matrix) > kSymmetryTol) {
    throw std::invalid_argument(
        "FullCovariance: matrix is not symmetric to within tolerance");
  }
  matrix_ = symmetrize(matrix);
  if (matrix_.size() > 0) {
    const SymmetricEigen eig = symmetric_eigen(matrix_);
    const double largest = eig.values[eig.values.size() - 1];
    if (eig.values[0] < -kPsdTol * (1.0 + std::max(largest, 0.0))) {
      throw std::invalid_argument(
          "FullCovariance: matrix is not positive semi-definite (smallest "
          "eigenvalue " + std::to_string(eig.values[0]) + ")");
    }
  }
}

Matrix covariance_as_matrix(const CovarianceEstimate& estimate) {
  struct Visitor {
    Matrix operator()(const DiagonalCovariance& diag) const {
      return Matrix(diag.omega().asDiagonal());
    }
    Matrix operator()(const FullCovariance& full) const {
      return full.matrix();
    }
    Matrix operator()(const DiagPlusLowRank& decomp) const {
      Matrix out = decomp.lowrank_part.matrix();
      out.diagonal() += decomp.sparse_part.omega();
      return out;
    }
  };
  return std::visit(Visitor{}, estimate);
}

Index covariance_dim(const CovarianceEstimate& estimate) {
  return std::visit([](const auto& e) { return e.dim(); }, estimate);
}

CoefficientSet make_coefficient_set(std::vector<Vector> betas) {
  CoefficientSet set;
  set.betas = std::move(betas);
  if (set.betas.empty()) return set;
  const Index d = set.betas.front().size();
  for (const Vector& beta : set.betas) {
    if (beta.size() != d) {
      throw std::invalid_argument(
          "CoefficientSet: coefficient vectors have differing lengths");
    }
    if (!all_finite(beta)) {
      throw std::invalid_argument("CoefficientSet: non-finite coefficient");
    }
  }
  for (Index j = 0; j < d; ++j) {
    for (const Vector& beta : set.betas) {
      if (beta[j] != 0.0) {
        set.support.push_back(j);
        break;
      }
    }
  }
  return set;
}

Matrix stack_coefficients(const CoefficientSet& coefficients) {
  const Index m = coefficients.num_tasks();
  const Index d = coefficients.dim();
  Matrix stacked(m, d);
  for (Index l = 0; l < m; ++l) stacked.row(l) = coefficients.betas[l];
  return stacked;
}

void validate_config(const SolverConfig& config) {
  if (!(config.rel_tol > 0.0)) {
    throw std::invalid_argument("SolverConfig: rel_tol must be > 0");
  }
  if (config.max_iter < 1) {
    throw std::invalid_argument("SolverConfig: max_iter must be >= 1");
  }
  const double weights[] = {config.lambda, config.ridge_lambda, config.lambda1,
                            config.lambda2};
  for (double w : weights) {
    if (!std::isfinite(w) || w < 0.0) {
      throw std::invalid_argument(
          "SolverConfig: regularization weights must be finite and >= 0");
    }
  }
  for (Index j = 0; j < config.gamma.size(); ++j) {
    if (!std::isfinite(config.gamma[j]) || config.gamma[j] <= 0.0) {
      throw std::invalid_argument("SolverConfig: gamma entries must be > 0");
    }
  }
}

}  // namespace mtreg
