#include <doctest.h>

#include <random>

#include "mtreg/covariance.hpp"
#include "mtreg/linalg.hpp"
#include "mtreg/types.hpp"

using namespace mtreg;

namespace {

MultiTaskDataset random_dataset(std::mt19937_64& rng, Index m, Index n,
                                Index d) {
  std::normal_distribution<double> normal(0.0, 1.0);
  MultiTaskDataset dataset;
  dataset.dimension = d;
  for (Index l = 0; l < m; ++l) {
    TaskData task;
    task.design.resize(n, d);
    task.response.resize(n);
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < d; ++j) task.design(i, j) = normal(rng);
      task.response[i] = normal(rng);
    }
    dataset.tasks.push_back(std::move(task));
  }
  return dataset;
}

MultiTaskDataset identity_tasks(const Matrix& responses) {
  MultiTaskDataset dataset;
  dataset.dimension = responses.cols();
  for (Index l = 0; l < responses.rows(); ++l) {
    dataset.tasks.push_back(
        {Matrix::Identity(responses.cols(), responses.cols()),
         responses.row(l)});
  }
  return dataset;
}

// Direct evaluation of sum_l 1/2 ||y y' - X diag(w) X'||_F^2, the oracle the
// expanded quadratic must reproduce.
double direct_frobenius_objective(const MultiTaskDataset& dataset,
                                  const Vector& omega) {
  double value = 0.0;
  for (const TaskData& task : dataset.tasks) {
    const Matrix outer = task.response * task.response.transpose();
    const Matrix fitted =
        task.design * omega.asDiagonal() * task.design.transpose();
    value += 0.5 * (outer - fitted).squaredNorm();
  }
  return value;
}

SolverConfig config_with_lambda(double lambda) {
  SolverConfig config;
  config.lambda = lambda;
  return config;
}

}  // namespace

TEST_CASE("scc quadratic: orthonormal columns decouple") {
  Matrix responses(1, 2);
  responses << 3.0, -2.0;
  const SccQuadratic quad = build_scc_quadratic(identity_tasks(responses));
  CHECK(quad.gram_sq.isApprox(Matrix::Identity(2, 2)));
  CHECK(quad.corr_sq[0] == doctest::Approx(9.0));
  CHECK(quad.corr_sq[1] == doctest::Approx(4.0));
}

TEST_CASE("scc quadratic: single thin column") {
  TaskData task;
  task.design = Matrix::Ones(2, 1);
  task.response = Vector::Ones(2);
  const MultiTaskDataset dataset = make_dataset({task});
  const SccQuadratic quad = build_scc_quadratic(dataset);
  CHECK(quad.gram_sq(0, 0) == doctest::Approx(4.0));
  CHECK(quad.corr_sq[0] == doctest::Approx(4.0));

  // Brute-force check of the expansion over an omega grid.
  for (double w = 0.0; w <= 2.0; w += 0.125) {
    Vector omega(1);
    omega << w;
    CHECK(quad.value(omega) ==
          doctest::Approx(direct_frobenius_objective(dataset, omega))
              .epsilon(1e-12));
  }
}

TEST_CASE("scc quadratic: duplicated tasks double every term") {
  std::mt19937_64 rng(11);
  MultiTaskDataset one = random_dataset(rng, 1, 4, 3);
  MultiTaskDataset two = one;
  two.tasks.push_back(one.tasks[0]);
  const SccQuadratic a = build_scc_quadratic(one);
  const SccQuadratic b = build_scc_quadratic(two);
  CHECK(b.gram_sq.isApprox(2.0 * a.gram_sq, 0.0));
  CHECK(b.corr_sq.isApprox(2.0 * a.corr_sq, 0.0));
  CHECK(b.const_term == 2.0 * a.const_term);
}

TEST_CASE("scc quadratic expansion invariant on random instances") {
  std::mt19937_64 rng(29);
  std::uniform_int_distribution<Index> dim(1, 5), tasks(1, 4), samples(1, 6);
  std::uniform_real_distribution<double> mag(0.0, 2.0);
  for (int trial = 0; trial < 20; ++trial) {
    const MultiTaskDataset dataset =
        random_dataset(rng, tasks(rng), samples(rng), dim(rng));
    const SccQuadratic quad = build_scc_quadratic(dataset);
    for (int rep = 0; rep < 3; ++rep) {
      Vector omega(dataset.dimension);
      for (Index j = 0; j < omega.size(); ++j) omega[j] = mag(rng);
      const double direct = direct_frobenius_objective(dataset, omega);
      CHECK(quad.value(omega) ==
            doctest::Approx(direct).epsilon(1e-10));
    }
  }
}

TEST_CASE("scc diagonal fit: identity designs match the thresholded moments") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Index m = 7, d = 4;
  Matrix responses(m, d);
  for (Index l = 0; l < m; ++l)
    for (Index j = 0; j < d; ++j) responses(l, j) = normal(rng);
  const double lambda = 0.3;
  // The coordinate-wise closed form applies with the penalty scaled by m.
  const DiagonalFit fit = fit_scc_diagonal(
      identity_tasks(responses), config_with_lambda(lambda * m));
  for (Index j = 0; j < d; ++j) {
    const double moment = responses.col(j).squaredNorm() / m;
    CHECK(fit.covariance.omega()[j] ==
          doctest::Approx(std::max(0.0, moment - lambda)).epsilon(1e-12));
  }
  CHECK(fit.trace.converged);
}

TEST_CASE("scc diagonal fit: unregularized identity fit recovers y squared") {
  Matrix responses(1, 2);
  responses << 2.0, 0.0;
  const DiagonalFit fit =
      fit_scc_diagonal(identity_tasks(responses), config_with_lambda(0.0));
  CHECK(fit.covariance.omega()[0] == doctest::Approx(4.0));
  CHECK(fit.covariance.omega()[1] == 0.0);
  CHECK(fit.trace.active_set_size == 1);
}

TEST_CASE("scc diagonal fit: penalty above the threshold zeroes everything") {
  std::mt19937_64 rng(17);
  const MultiTaskDataset dataset = random_dataset(rng, 2, 5, 3);
  const SccQuadratic quad = build_scc_quadratic(dataset);
  const double threshold = quad.corr_sq.maxCoeff();

  const DiagonalFit above =
      fit_scc_diagonal(dataset, config_with_lambda(threshold * 1.0001));
  CHECK(above.covariance.omega().maxCoeff() == 0.0);

  const DiagonalFit below =
      fit_scc_diagonal(dataset, config_with_lambda(threshold * 0.9));
  CHECK(below.covariance.omega().maxCoeff() > 0.0);

  // Grid sweep around zero confirms the all-zero point is the minimizer.
  const double base = quad.value(Vector::Zero(3));
  for (double w0 = 0.0; w0 <= 0.5; w0 += 0.1) {
    for (double w1 = 0.0; w1 <= 0.5; w1 += 0.1) {
      for (double w2 = 0.0; w2 <= 0.5; w2 += 0.1) {
        Vector omega(3);
        omega << w0, w1, w2;
        const double value =
            quad.value(omega) + threshold * 1.0001 * omega.sum();
        CHECK(value >= base - 1e-9);
      }
    }
  }
}

TEST_CASE("scc diagonal fit: KKT certificate on random instances") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 10; ++trial) {
    const MultiTaskDataset dataset = random_dataset(rng, 3, 6, 4);
    const double lambda = 0.5;
    SolverConfig config = config_with_lambda(lambda);
    config.rel_tol = 1e-13;
    config.max_iter = 100000;
    const DiagonalFit fit = fit_scc_diagonal(dataset, config);
    const SccQuadratic quad = build_scc_quadratic(dataset);
    const double scale = 1.0 + quad.corr_sq.maxCoeff();
    CHECK(scc_kkt_violation(quad, fit.covariance.omega(),
                            Vector::Constant(4, lambda)) < 1e-6 * scale);
  }
}

TEST_CASE("scc trace fit: uniform column energies reduce to a rescaled penalty") {
  // Identity designs give every column the same energy c = m.
  std::mt19937_64 rng(31);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix responses(3, 3);
  for (Index l = 0; l < 3; ++l)
    for (Index j = 0; j < 3; ++j) responses(l, j) = normal(rng);
  const MultiTaskDataset dataset = identity_tasks(responses);
  const double lambda = 0.2;
  const DiagonalFit trace_fit = fit_scc_trace(dataset, config_with_lambda(lambda));
  const DiagonalFit diag_fit =
      fit_scc_diagonal(dataset, config_with_lambda(lambda * 3.0));
  CHECK(trace_fit.covariance.omega() == diag_fit.covariance.omega());
}

TEST_CASE("scc trace fit: lambda zero coincides with the diagonal variant") {
  std::mt19937_64 rng(37);
  const MultiTaskDataset dataset = random_dataset(rng, 2, 4, 3);
  const DiagonalFit a = fit_scc_trace(dataset, config_with_lambda(0.0));
  const DiagonalFit b = fit_scc_diagonal(dataset, config_with_lambda(0.0));
  CHECK(a.covariance.omega() == b.covariance.omega());
}

TEST_CASE("scc trace fit: two-dimensional instance against a grid search") {
  // Single task, X = diag(1, 2), y = (1, 1), lambda = 0.1. The quadratic
  // separates, so the grid argmin is a true independent oracle.
  TaskData task;
  task.design = Matrix::Zero(2, 2);
  task.design(0, 0) = 1.0;
  task.design(1, 1) = 2.0;
  task.response = Vector::Ones(2);
  const MultiTaskDataset dataset = make_dataset({task});
  const double lambda = 0.1;
  const DiagonalFit fit = fit_scc_trace(dataset, config_with_lambda(lambda));

  const SccQuadratic quad = build_scc_quadratic(dataset);
  const Vector energies = column_energies(dataset);
  double best = std::numeric_limits<double>::infinity();
  double best0 = 0.0, best1 = 0.0;
  for (double w0 = 0.0; w0 <= 2.0; w0 += 1e-3) {
    for (double w1 = 0.0; w1 <= 1.0; w1 += 1e-3) {
      Vector omega(2);
      omega << w0, w1;
      const double value =
          quad.value(omega) + lambda * energies.dot(omega);
      if (value < best) {
        best = value;
        best0 = w0;
        best1 = w1;
      }
    }
  }
  CHECK(fit.covariance.omega()[0] == doctest::Approx(best0).epsilon(2e-3));
  CHECK(fit.covariance.omega()[1] == doctest::Approx(best1).epsilon(2e-3));
  // Coordinate-wise closed form of the separable problem.
  CHECK(fit.covariance.omega()[0] == doctest::Approx(0.9).epsilon(1e-10));
  CHECK(fit.covariance.omega()[1] == doctest::Approx(0.225).epsilon(1e-10));
}

TEST_CASE("solver traces are monotone and never beat the zero start") {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 8; ++trial) {
    const MultiTaskDataset dataset = random_dataset(rng, 3, 5, 4);
    SolverConfig config = config_with_lambda(0.5);
    config.lambda1 = 0.5;
    config.lambda2 = 0.5;
    const std::vector<SolveTrace> traces = {
        fit_scc_diagonal(dataset, config).trace,
        fit_scc_trace(dataset, config).trace,
        fit_partial_full(dataset, config).trace,
        fit_diag_lowrank(dataset, config).trace,
    };
    for (const SolveTrace& trace : traces) {
      REQUIRE(!trace.objective_values.empty());
      for (std::size_t i = 1; i < trace.objective_values.size(); ++i) {
        CHECK(trace.objective_values[i] <=
              trace.objective_values[i - 1] +
                  1e-12 * (1.0 + std::abs(trace.objective_values[i - 1])));
      }
      CHECK(trace.objective_values.back() <=
            trace.objective_values.front() + 1e-9);
    }
  }
}

TEST_CASE("scc diagonal fit: permutation equivariance") {
  std::mt19937_64 rng(43);
  const MultiTaskDataset dataset = random_dataset(rng, 2, 6, 4);
  const std::vector<Index> perm = {2, 0, 3, 1};
  MultiTaskDataset permuted;
  permuted.dimension = 4;
  for (const TaskData& task : dataset.tasks) {
    TaskData copy;
    copy.design.resize(task.design.rows(), 4);
    for (Index j = 0; j < 4; ++j) copy.design.col(j) = task.design.col(perm[j]);
    copy.response = task.response;
    permuted.tasks.push_back(std::move(copy));
  }
  SolverConfig tight = config_with_lambda(0.4);
  tight.rel_tol = 1e-14;
  tight.max_iter = 200000;
  const Vector base = fit_scc_diagonal(dataset, tight).covariance.omega();
  const Vector shuffled = fit_scc_diagonal(permuted, tight).covariance.omega();
  for (Index j = 0; j < 4; ++j) {
    CHECK(shuffled[j] == doctest::Approx(base[perm[j]]).epsilon(1e-8));
  }
}

TEST_CASE("scc diagonal fit: unregularized solution scales as c^2 with y") {
  std::mt19937_64 rng(47);
  MultiTaskDataset dataset = random_dataset(rng, 2, 6, 3);
  const Vector base =
      fit_scc_diagonal(dataset, config_with_lambda(0.0)).covariance.omega();
  const double c = 2.5;
  for (TaskData& task : dataset.tasks) task.response *= c;
  const Vector scaled =
      fit_scc_diagonal(dataset, config_with_lambda(0.0)).covariance.omega();
  for (Index j = 0; j < 3; ++j) {
    CHECK(scaled[j] == doctest::Approx(c * c * base[j]).epsilon(1e-6));
  }
}

TEST_CASE("scc diagonal fit: hitting the iteration cap is flagged") {
  std::mt19937_64 rng(53);
  const MultiTaskDataset dataset = random_dataset(rng, 2, 8, 5);
  SolverConfig config = config_with_lambda(0.0);
  config.max_iter = 1;
  config.rel_tol = 1e-14;
  const DiagonalFit fit = fit_scc_diagonal(dataset, config);
  CHECK(!fit.trace.converged);
  CHECK(fit.trace.iterations == 1);
}

TEST_CASE("partial full fit: unregularized identity designs recover the moment matrix") {
  std::mt19937_64 rng(59);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Index m = 500, d = 3;
  Matrix responses(m, d);
  for (Index l = 0; l < m; ++l)
    for (Index j = 0; j < d; ++j) responses(l, j) = normal(rng);
  const MultiTaskDataset dataset = identity_tasks(responses);
  Matrix moment = Matrix::Zero(d, d);
  for (Index l = 0; l < m; ++l) {
    moment.noalias() +=
        responses.row(l).transpose() * responses.row(l);
  }
  moment /= static_cast<double>(m);
  SolverConfig config = config_with_lambda(0.0);
  config.rel_tol = 1e-12;
  const PartialFullFit fit = fit_partial_full(dataset, config);
  CHECK((fit.covariance.matrix() - moment).cwiseAbs().maxCoeff() < 1e-5);
  CHECK(fit.trace.converged);
}

TEST_CASE("partial full fit: a dominating penalty returns zero") {
  std::mt19937_64 rng(61);
  const MultiTaskDataset dataset = random_dataset(rng, 3, 5, 4);
  const PartialFullFit fit = fit_partial_full(dataset, config_with_lambda(1e9));
  CHECK(fit.covariance.matrix().cwiseAbs().maxCoeff() == 0.0);
  CHECK(fit.trace.active_set_size == 0);
}

TEST_CASE("partial full fit: row-group penalty selects the planted rows") {
  // Random-effects data with coefficients supported on features {0, 1}.
  std::mt19937_64 rng(67);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Index m = 60, n = 40, d = 6;
  const double noise_sd = 0.1;
  MultiTaskDataset dataset;
  dataset.dimension = d;
  for (Index l = 0; l < m; ++l) {
    TaskData task;
    task.design.resize(n, d);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < d; ++j) task.design(i, j) = normal(rng);
    Vector coeff = Vector::Zero(d);
    coeff[0] = normal(rng);
    coeff[1] = normal(rng);
    task.response = task.design * coeff;
    for (Index i = 0; i < n; ++i) task.response[i] += noise_sd * normal(rng);
    dataset.tasks.push_back(std::move(task));
  }
  SolverConfig config = config_with_lambda(0.0);
  // Moderate penalty: a small fraction of the all-zero threshold.
  Matrix q = Matrix::Zero(d, d);
  for (const TaskData& task : dataset.tasks) {
    const Vector corr = task.design.transpose() * task.response;
    q.noalias() += corr * corr.transpose();
  }
  double ceiling = 0.0;
  for (Index kk = 0; kk < d; ++kk) ceiling = std::max(ceiling, q.row(kk).norm());
  config.lambda = 0.10 * ceiling;
  config.rel_tol = 1e-10;
  const PartialFullFit fit = fit_partial_full(dataset, config);
  const Matrix& omega = fit.covariance.matrix();
  const double scale = omega.cwiseAbs().maxCoeff();
  CHECK(omega.row(0).norm() > 0.05 * scale);
  CHECK(omega.row(1).norm() > 0.05 * scale);
  for (Index k = 2; k < d; ++k) {
    CHECK(omega.row(k).norm() < 1e-3 * scale);
  }
}

TEST_CASE("diag plus low-rank fit: huge trace penalty reduces to the diagonal fit") {
  std::mt19937_64 rng(71);
  const MultiTaskDataset dataset = random_dataset(rng, 4, 6, 3);
  SolverConfig config;
  config.lambda1 = 0.4;
  config.lambda2 = 1e12;
  const DiagLowRankFit fit = fit_diag_lowrank(dataset, config);
  CHECK(fit.covariance.lowrank_part.matrix().cwiseAbs().maxCoeff() == 0.0);
  CHECK(fit.covariance.rank_estimate == 0);
  const DiagonalFit diagonal = fit_scc_diagonal(dataset, config_with_lambda(0.4));
  CHECK((fit.covariance.sparse_part.omega() - diagonal.covariance.omega())
            .cwiseAbs()
            .maxCoeff() < 1e-7);
}

TEST_CASE("diag plus low-rank fit: huge l1 penalty zeroes the diagonal part") {
  std::mt19937_64 rng(73);
  const MultiTaskDataset dataset = random_dataset(rng, 4, 6, 3);
  SolverConfig config;
  config.lambda1 = 1e12;
  config.lambda2 = 0.1;
  const DiagLowRankFit fit = fit_diag_lowrank(dataset, config);
  CHECK(fit.covariance.sparse_part.omega().maxCoeff() == 0.0);
  CHECK(fit.trace.converged);
}

TEST_CASE("diag plus low-rank fit: recovers a planted rank-one component") {
  std::mt19937_64 rng(79);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Index m = 400, d = 8;
  Vector omega_bar = Vector::Zero(d);
  omega_bar[0] = 1.0;
  omega_bar[2] = 1.5;
  Vector direction = Vector::Ones(d) / std::sqrt(static_cast<double>(d));
  const double lowrank_scale = 2.0;
  const double noise_sd = 0.1;
  // beta ~ N(0, diag(omega_bar) + scale * v v'); responses observed directly.
  Matrix responses(m, d);
  for (Index l = 0; l < m; ++l) {
    double shared = normal(rng);
    for (Index j = 0; j < d; ++j) {
      responses(l, j) = std::sqrt(omega_bar[j]) * normal(rng) +
                        std::sqrt(lowrank_scale) * direction[j] * shared +
                        noise_sd * normal(rng);
    }
  }
  const MultiTaskDataset dataset = identity_tasks(responses);
  SolverConfig config;
  config.lambda1 = 0.35 * m;
  config.lambda2 = 0.6 * m;
  config.rel_tol = 1e-10;
  config.max_iter = 20000;
  const DiagLowRankFit fit = fit_diag_lowrank(dataset, config);
  CHECK(fit.covariance.rank_estimate == 1);
  const auto support = fit.covariance.sparse_part.support();
  REQUIRE(support.size() == 2);
  CHECK(support[0] == 0);
  CHECK(support[1] == 2);
}

TEST_CASE("leave-one-out fit: two tasks reduce to the remaining one") {
  std::mt19937_64 rng(83);
  const MultiTaskDataset dataset = random_dataset(rng, 2, 5, 3);
  MultiTaskDataset second;
  second.dimension = 3;
  second.tasks.push_back(dataset.tasks[1]);
  const SolverConfig config = config_with_lambda(0.2);
  const CovarianceEstimate loo =
      fit_loo(dataset, 0, config, CovarianceStructure::Diagonal);
  const DiagonalFit direct = fit_scc_diagonal(second, config);
  CHECK(std::get<DiagonalCovariance>(loo).omega() ==
        direct.covariance.omega());
}

TEST_CASE("leave-one-out fit: identical tasks make every exclusion agree") {
  std::mt19937_64 rng(89);
  MultiTaskDataset base = random_dataset(rng, 1, 5, 3);
  MultiTaskDataset dataset;
  dataset.dimension = 3;
  for (int i = 0; i < 4; ++i) dataset.tasks.push_back(base.tasks[0]);
  const SolverConfig config = config_with_lambda(0.3);
  const Vector first = std::get<DiagonalCovariance>(
      fit_loo(dataset, 0, config, CovarianceStructure::Diagonal)).omega();
  for (Index l = 1; l < 4; ++l) {
    const Vector other = std::get<DiagonalCovariance>(
        fit_loo(dataset, l, config, CovarianceStructure::Diagonal)).omega();
    CHECK(first == other);
  }
}

TEST_CASE("leave-one-out fit: deviation from the full fit shrinks with m") {
  std::mt19937_64 rng(97);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto max_deviation = [&](Index m) {
    Matrix responses(m, 3);
    for (Index l = 0; l < m; ++l)
      for (Index j = 0; j < 3; ++j) responses(l, j) = normal(rng);
    const MultiTaskDataset dataset = identity_tasks(responses);
    // Penalty proportional to the task count keeps the two fits comparable.
    const Vector full =
        fit_scc_diagonal(dataset, config_with_lambda(0.25 * m))
            .covariance.omega();
    double worst = 0.0;
    for (Index l = 0; l < m; ++l) {
      const Vector loo = std::get<DiagonalCovariance>(
          fit_loo(dataset, l, config_with_lambda(0.25 * (m - 1)),
                  CovarianceStructure::Diagonal)).omega();
      worst = std::max(worst, (loo - full).cwiseAbs().maxCoeff());
    }
    return worst;
  };
  CHECK(max_deviation(100) < max_deviation(10));
}

TEST_CASE("leave-one-out fit rejects degenerate inputs") {
  std::mt19937_64 rng(101);
  const MultiTaskDataset single = random_dataset(rng, 1, 4, 2);
  CHECK_THROWS_AS(
      fit_loo(single, 0, config_with_lambda(0.1), CovarianceStructure::Diagonal),
      std::invalid_argument);
  const MultiTaskDataset pair = random_dataset(rng, 2, 4, 2);
  CHECK_THROWS_AS(
      fit_loo(pair, 2, config_with_lambda(0.1), CovarianceStructure::Diagonal),
      std::invalid_argument);
}

TEST_CASE("build_scc_quadratic rejects malformed datasets") {
  TaskData a;
  a.design = Matrix::Zero(2, 3);
  a.response = Vector::Zero(2);
  TaskData b;
  b.design = Matrix::Zero(2, 4);
  b.response = Vector::Zero(2);
  CHECK_THROWS_AS(build_scc_quadratic(make_dataset({a, b})),
                  std::invalid_argument);
}
