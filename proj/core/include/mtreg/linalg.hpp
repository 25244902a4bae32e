#pragma once

#include <cstdint>

#include "mtreg/types.hpp"

namespace mtreg {

/// (M + M^T) / 2.
Matrix symmetrize(const Matrix& m);

/// Largest |M - M^T| entry relative to 1 + max|M|.
double asymmetry(const Matrix& m);

/// Eigendecomposition of a symmetric matrix; eigenvalues ascending.
struct SymmetricEigen {
  Vector values;
  Matrix vectors;
};
SymmetricEigen symmetric_eigen(const Matrix& m);

/// Projects a symmetric matrix onto the PSD cone by clipping negative
/// eigenvalues to zero.
Matrix psd_project(const Matrix& m);

/// Symmetric PSD square root, clipping round-off negative eigenvalues to 0.
Matrix sqrt_psd(const Matrix& m);

/// (M + shift I)^{-1/2} for symmetric PSD M; eigenvalues are floored at
/// `floor_value` before the shift so numerically singular inputs stay finite.
Matrix inv_sqrt_psd_shifted(const Matrix& m, double shift,
                            double floor_value = 1e-12);

/// Largest eigenvalue of a symmetric matrix.
double largest_eigenvalue(const Matrix& m);

/// Number of eigenvalues above kPsdTol * (1 + largest eigenvalue).
Index psd_rank(const Matrix& m);

bool all_finite(const Matrix& m);
bool all_finite(const Vector& v);

/// Deterministic stream splitting: mixes a master seed with a stream index.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

}  // namespace mtreg
