#pragma once

#include <vector>

#include "hardedge/ensembles.hpp"

namespace hardedge {

/// Throws std::invalid_argument if any entry is NaN or infinite.
void require_finite(const MatrixSample& a);

/// All min(M, N) singular values in ascending order (dense bidiagonal SVD).
std::vector<double> dense_singular_values(const MatrixSample& a);

/// Eigenvalues of a real symmetric or complex Hermitian matrix, ascending.
std::vector<double> hermitian_eigenvalues(const MatrixSample& a);

/// sigma_1 from one LU (square) or QR (tall) factorization followed by
/// Lanczos on (A^* A)^{-1}. Returns 0 for numerically singular input.
double smallest_singular_value(const MatrixSample& a);

/// sigma_N by Lanczos on A^* A.
double largest_singular_value(const MatrixSample& a);

struct ExtremeSingularValues {
  double smallest = 0.0;
  double largest = 0.0;
};

ExtremeSingularValues extreme_singular_values(const MatrixSample& a);

}  // namespace hardedge
