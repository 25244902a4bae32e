#include <doctest.h>

#include "mtreg/linalg.hpp"
#include "mtreg/types.hpp"

using namespace mtreg;

namespace {

MultiTaskDataset two_by_two_identity() {
  TaskData task;
  task.design = Matrix::Identity(2, 2);
  task.response = Vector(2);
  task.response << 1.0, 0.0;
  return make_dataset({task});
}

}  // namespace

TEST_CASE("validate_dataset accepts a well-formed dataset") {
  CHECK(validate_dataset(two_by_two_identity()).empty());
}

TEST_CASE("validate_dataset reports a shared-dimension violation") {
  TaskData a;
  a.design = Matrix::Zero(2, 3);
  a.response = Vector::Zero(2);
  TaskData b;
  b.design = Matrix::Zero(2, 4);
  b.response = Vector::Zero(2);
  const auto report = validate_dataset(make_dataset({a, b}));
  REQUIRE(report.size() == 1);
  CHECK(report[0].find("dimension mismatch") != std::string::npos);
}

TEST_CASE("validate_dataset reports non-finite responses") {
  MultiTaskDataset dataset = two_by_two_identity();
  dataset.tasks[0].response[1] = std::numeric_limits<double>::quiet_NaN();
  const auto report = validate_dataset(dataset);
  REQUIRE(report.size() == 1);
  CHECK(report[0].find("non-finite value") != std::string::npos);
}

TEST_CASE("validate_dataset reports row mismatch and empty datasets") {
  MultiTaskDataset dataset = two_by_two_identity();
  dataset.tasks[0].response = Vector::Zero(3);
  CHECK(validate_dataset(dataset).size() == 1);
  CHECK(validate_dataset(MultiTaskDataset{}).size() == 1);
}

TEST_CASE("covariance_as_matrix materializes each structure") {
  Vector omega(3);
  omega << 1.0, 0.0, 2.0;
  const Matrix diag = covariance_as_matrix(DiagonalCovariance(omega));
  CHECK(diag(0, 0) == 1.0);
  CHECK(diag(1, 1) == 0.0);
  CHECK(diag(2, 2) == 2.0);
  CHECK(diag(0, 1) == 0.0);

  DiagPlusLowRank decomp;
  decomp.sparse_part = DiagonalCovariance(Vector::Ones(2));
  decomp.lowrank_part = FullCovariance(Matrix::Zero(2, 2));
  CHECK(covariance_as_matrix(decomp).isApprox(Matrix::Identity(2, 2)));

  Matrix m(2, 2);
  m << 2.0, 0.5, 0.5, 1.0;
  CHECK(covariance_as_matrix(FullCovariance(m)).isApprox(m));
}

TEST_CASE("covariance types enforce their invariants") {
  Vector negative(2);
  negative << 1.0, -0.5;
  CHECK_THROWS_AS((void)DiagonalCovariance(negative), std::invalid_argument);

  Matrix asym(2, 2);
  asym << 1.0, 0.3, 0.0, 1.0;
  CHECK_THROWS_AS((void)FullCovariance(asym), std::invalid_argument);

  Matrix indefinite(2, 2);
  indefinite << 1.0, 0.0, 0.0, -1.0;
  CHECK_THROWS_AS((void)FullCovariance(indefinite), std::invalid_argument);

  // Round-off level asymmetry is absorbed by symmetrization.
  Matrix almost = Matrix::Identity(2, 2);
  almost(0, 1) = 1e-13;
  const FullCovariance cov(almost);
  CHECK(asymmetry(cov.matrix()) == 0.0);
}

TEST_CASE("diagonal support is the strictly positive entries") {
  Vector omega(4);
  omega << 0.5, 0.0, 1e-30, 2.0;
  const auto support = DiagonalCovariance(omega).support();
  REQUIRE(support.size() == 3);
  CHECK(support[0] == 0);
  CHECK(support[1] == 2);
  CHECK(support[2] == 3);
}

TEST_CASE("solver config validation") {
  SolverConfig config;
  CHECK_NOTHROW(validate_config(config));
  config.rel_tol = 0.0;
  CHECK_THROWS_AS(validate_config(config), std::invalid_argument);
  config.rel_tol = 1e-8;
  config.lambda = -1.0;
  CHECK_THROWS_AS(validate_config(config), std::invalid_argument);
  config.lambda = 0.0;
  config.gamma = Vector::Zero(2);
  CHECK_THROWS_AS(validate_config(config), std::invalid_argument);
}

TEST_CASE("coefficient set support tracks exact nonzeros") {
  Vector b0 = Vector::Zero(3);
  Vector b1 = Vector::Zero(3);
  b1[2] = 0.25;
  const CoefficientSet set = make_coefficient_set({b0, b1});
  REQUIRE(set.support.size() == 1);
  CHECK(set.support[0] == 2);
}
