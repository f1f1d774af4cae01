#pragma once

#include <cmath>
#include <cstddef>
#include <limits>

#include "qrfs/matrix.hpp"

namespace qrfs {

/// Kahan's upper-triangular matrix diag(1, s, …, s^{n-1})·T, where T has
/// ones on the diagonal and −c above it and s = √(1 − c²).
///
/// Every column has unit norm, so column pivoting is decided by roundoff. A
/// nonzero `perturbation` adds perturbation·eps·diag(n, n−1, …, 1), which
/// makes pivoted QR keep the natural order (the usual way this matrix is used
/// as a counterexample).
inline DenseMatrix kahan_matrix(std::size_t n, double c, double perturbation = 0.0) {
  if (n < 2) throw validation_error("kahan_matrix: n must be at least 2");
  if (!(c > 0.0 && c < 1.0)) throw validation_error("kahan_matrix: c must lie in (0, 1)");
  const double s = std::sqrt(1.0 - c * c);
  DenseMatrix k(n, n);
  double scale = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    k(i, i) = scale;
    for (std::size_t j = i + 1; j < n; ++j) k(i, j) = -c * scale;
    scale *= s;
  }
  if (perturbation != 0.0) {
    const double eps = std::numeric_limits<double>::epsilon();
    for (std::size_t i = 0; i < n; ++i) k(i, i) += perturbation * eps * static_cast<double>(n - i);
  }
  return k;
}

} // namespace qrfs
