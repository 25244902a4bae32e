#include "mtreg/linalg.hpp"

#include <cmath>
#include <stdexcept>

namespace mtreg {

Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

double asymmetry(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  const double scale = 1.0 + m.cwiseAbs().maxCoeff();
  return (m - m.transpose()).cwiseAbs().maxCoeff() / scale;
}

SymmetricEigen symmetric_eigen(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(m);
  if (solver.info() != Eigen::Success) {
    throw std::runtime_error("symmetric_eigen: eigendecomposition failed");
  }
  return {solver.eigenvalues(), solver.eigenvectors()};
}

Matrix psd_project(const Matrix& m) {
  const SymmetricEigen eig = symmetric_eigen(m);
  const Vector clipped = eig.values.cwiseMax(0.0);
  return eig.vectors * clipped.asDiagonal() * eig.vectors.transpose();
}

Matrix sqrt_psd(const Matrix& m) {
  const SymmetricEigen eig = symmetric_eigen(m);
  const Vector roots = eig.values.cwiseMax(0.0).cwiseSqrt();
  return eig.vectors * roots.asDiagonal() * eig.vectors.transpose();
}

Matrix inv_sqrt_psd_shifted(const Matrix& m, double shift, double floor_value) {
  const SymmetricEigen eig = symmetric_eigen(m);
  Vector inv = eig.values;
  for (Index i = 0; i < inv.size(); ++i) {
    const double v = std::max(eig.values[i], floor_value) + shift;
    inv[i] = 1.0 / std::sqrt(v);
  }
  return eig.vectors * inv.asDiagonal() * eig.vectors.transpose();
}

double largest_eigenvalue(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> solver(m, Eigen::EigenvaluesOnly);
  return solver.eigenvalues().maxCoeff();
}

Index psd_rank(const Matrix& m) {
  if (m.size() == 0) return 0;
  const SymmetricEigen eig = symmetric_eigen(m);
  const double largest = std::max(eig.values[eig.values.size() - 1], 0.0);
  const double cutoff = kPsdTol * (1.0 + largest);
  Index rank = 0;
  for (Index i = 0; i < eig.values.size(); ++i) {
    if (eig.values[i] > cutoff) ++rank;
  }
  return rank;
}

bool all_finite(const Matrix& m) { return m.allFinite(); }
bool all_finite(const Vector& v) { return v.allFinite(); }

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  // splitmix64 over the combined word; stable across platforms.
  std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace mtreg
