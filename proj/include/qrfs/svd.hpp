#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "qrfs/matrix.hpp"

namespace qrfs {

template <std::floating_point T>
struct basic_svd_result {
  /// Nonincreasing, nonnegative; length min(m, n).
  std::vector<T> singular_values;
  std::optional<basic_matrix<T>> u; // m×r
  std::optional<basic_matrix<T>> v; // n×r
};
using SvdResult = basic_svd_result<double>;

struct SvdOptions {
  /// Refuse inputs with min(m, n) above this. The Jacobi SVD is a verifier.
  std::size_t cap = 512;
  bool want_vectors = false;
  std::size_t max_sweeps = 100;
};

/// One-sided (Hestenes) Jacobi SVD. Works on the taller orientation, so a
/// wide matrix costs the same as its transpose.
template <std::floating_point T>
basic_svd_result<T> jacobi_svd(const basic_matrix<T>& a, const SvdOptions& opt = {}) {
  a.require_finite("svd input");
  const bool transposed = a.rows() < a.cols();
  basic_matrix<T> b = transposed ? a.transpose() : a;
  const std::size_t q = b.cols();
  if (q > opt.cap)
    throw capacity_error("jacobi_svd: min dimension " + std::to_string(q) +
                         " exceeds oracle cap " + std::to_string(opt.cap));

  basic_matrix<T> v = basic_matrix<T>::identity(q);
  const T eps = std::numeric_limits<T>::epsilon();
  for (std::size_t sweep = 0; sweep < opt.max_sweeps; ++sweep) {
    bool rotated = false;
    for (std::size_t i = 0; i + 1 < q; ++i) {
      for (std::size_t j = i + 1; j < q; ++j) {
        auto bi = b.column(i), bj = b.column(j);
        const T alpha = dot<T>(bi, bi), beta = dot<T>(bj, bj), gamma = dot<T>(bi, bj);
        if (gamma == T{} || std::abs(gamma) <= eps * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const T zeta = (beta - alpha) / (T{2} * gamma);
        const T t = std::copysign(T{1}, zeta) / (std::abs(zeta) + std::sqrt(T{1} + zeta * zeta));
        const T c = T{1} / std::sqrt(T{1} + t * t), s = c * t;
        for (std::size_t p = 0; p < bi.size(); ++p) {
          const T x = bi[p], y = bj[p];
          bi[p] = c * x - s * y;
          bj[p] = s * x + c * y;
        }
        auto vi = v.column(i), vj = v.column(j);
        for (std::size_t p = 0; p < q; ++p) {
          const T x = vi[p], y = vj[p];
          vi[p] = c * x - s * y;
          vj[p] = s * x + c * y;
        }
      }
    }
    if (!rotated) break;
  }

  std::vector<T> sigma(q);
  for (std::size_t j = 0; j < q; ++j) sigma[j] = norm2<T>(b.column(j));
  std::vector<std::size_t> order(q);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return sigma[x] > sigma[y]; });

  basic_svd_result<T> out;
  out.singular_values.resize(q);
  for (std::size_t j = 0; j < q; ++j) out.singular_values[j] = sigma[order[j]];
  if (opt.want_vectors) {
    basic_matrix<T> left(b.rows(), q), right(q, q);
    for (std::size_t j = 0; j < q; ++j) {
      const std::size_t src = order[j];
      const T s = sigma[src];
      for (std::size_t p = 0; p < b.rows(); ++p) left(p, j) = s > T{} ? b(p, src) / s : T{};
      for (std::size_t p = 0; p < q; ++p) right(p, j) = v(p, src);
    }
    if (transposed) std::swap(left, right);
    out.u = std::move(left);
    out.v = std::move(right);
  }
  return out;
}

/// Count of σ_i > max(m, n)·eps·σ_1.
template <std::floating_point T>
std::size_t numerical_rank(const basic_matrix<T>& a, std::size_t cap = 512) {
  if (a.empty()) return 0;
  SvdOptions opt;
  opt.cap = cap;
  const auto sv = jacobi_svd(a, opt).singular_values;
  if (sv.empty() || sv.front() == T{}) return 0;
  const T tol = static_cast<T>(std::max(a.rows(), a.cols())) *
                std::numeric_limits<T>::epsilon() * sv.front();
  return static_cast<std::size_t>(
      std::count_if(sv.begin(), sv.end(), [tol](T s) { return s > tol; }));
}

/// Moore–Penrose pseudoinverse; singular values at or below
/// rel_tol·σ_max are treated as zero.
template <std::floating_point T>
basic_matrix<T> pseudoinverse(const basic_matrix<T>& a, T rel_tol = T(1e-12)) {
  SvdOptions opt;
  opt.cap = std::numeric_limits<std::size_t>::max();
  opt.want_vectors = true;
  const auto svd = jacobi_svd(a, opt);
  const auto& u = *svd.u;
  const auto& v = *svd.v;
  basic_matrix<T> out(a.cols(), a.rows());
  if (svd.singular_values.empty()) return out;
  const T cutoff = rel_tol * svd.singular_values.front();
  for (std::size_t k = 0; k < svd.singular_values.size(); ++k) {
    const T s = svd.singular_values[k];
    if (s <= cutoff || s == T{}) break;
    const T inv = T{1} / s;
    for (std::size_t j = 0; j < a.rows(); ++j) {
      const T uj = u(j, k) * inv;
      if (uj == T{}) continue;
      for (std::size_t i = 0; i < a.cols(); ++i) out(i, j) += v(i, k) * uj;
    }
  }
  return out;
}

/// Spectral norm via the Jacobi oracle.
template <std::floating_point T>
T spectral_norm(const basic_matrix<T>& a) {
  if (a.empty()) return T{};
  SvdOptions opt;
  opt.cap = std::numeric_limits<std::size_t>::max();
  return jacobi_svd(a, opt).singular_values.front();
}

} // namespace qrfs
