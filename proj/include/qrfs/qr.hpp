#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include "qrfs/matrix.hpp"

namespace qrfs {

/// A = Q·R (or A·Π = Q·R for the pivoted variant).
///
/// Economy form by default: q is m×r with orthonormal columns and r is r×n,
/// r = min(m, n). With `full_q`, q is m×m and r is m×n. The diagonal of r is
/// nonnegative.
template <std::floating_point T>
struct basic_qr_result {
  basic_matrix<T> q;
  basic_matrix<T> r;
};
using QrResult = basic_qr_result<double>;

template <std::floating_point T>
struct basic_pivoted_qr {
  basic_qr_result<T> qr;
  /// Column j of A·Π is column perm[j] of A.
  std::vector<std::size_t> perm;
};
using PivotedQr = basic_pivoted_qr<double>;

namespace detail {

// H = I − tau·v·vᵀ with v[0] = 1, acting on rows [offset, offset + v.size()).
template <std::floating_point T>
struct reflector {
  std::vector<T> v;
  T tau{};
  std::size_t offset = 0;

  void apply_left(basic_matrix<T>& a, std::size_t col_begin) const {
    if (tau == T{}) return;
    for (std::size_t j = col_begin; j < a.cols(); ++j) {
      auto c = a.column(j);
      T s{};
      for (std::size_t p = 0; p < v.size(); ++p) s += v[p] * c[offset + p];
      s *= tau;
      for (std::size_t p = 0; p < v.size(); ++p) c[offset + p] -= s * v[p];
    }
  }
};

// LAPACK dlarfg convention: H·x = beta·e1.
template <std::floating_point T>
reflector<T> make_reflector(std::span<const T> x, std::size_t offset, T& beta) {
  reflector<T> h{std::vector<T>(x.begin(), x.end()), T{}, offset};
  const T alpha = x[0];
  T tail{};
  for (std::size_t p = 1; p < x.size(); ++p) tail += x[p] * x[p];
  if (tail == T{}) {
    // already of the form alpha·e1; no reflection needed
    beta = alpha;
    h.v.assign(x.size(), T{});
    h.v[0] = T{1};
    return h;
  }
  const T xnorm = std::sqrt(alpha * alpha + tail);
  beta = alpha >= T{} ? -xnorm : xnorm;
  h.tau = (beta - alpha) / beta;
  const T scale = T{1} / (alpha - beta);
  h.v[0] = T{1};
  for (std::size_t p = 1; p < x.size(); ++p) h.v[p] *= scale;
  return h;
}

template <std::floating_point T>
void validate_factor_input(const basic_matrix<T>& a) {
  if (a.rows() == 0 || a.cols() == 0) throw validation_error("factorization of an empty matrix");
  a.require_finite("factorization input");
}

// Householder triangularization of `w` in place, optionally with column
// pivoting on the largest residual column norm (ties go to the lower index).
template <std::floating_point T>
std::vector<reflector<T>> triangularize(basic_matrix<T>& w, std::vector<std::size_t>* perm) {
  const std::size_t m = w.rows(), n = w.cols(), r = std::min(m, n);
  std::vector<reflector<T>> hs;
  hs.reserve(r);
  for (std::size_t i = 0; i < r; ++i) {
    if (perm) {
      std::size_t best = i;
      T best_norm = T{-1};
      for (std::size_t j = i; j < n; ++j) {
        T s{};
        auto c = w.column(j);
        for (std::size_t p = i; p < m; ++p) s += c[p] * c[p];
        if (s > best_norm) {
          best_norm = s;
          best = j;
        }
      }
      w.swap_columns(i, best);
      std::swap((*perm)[i], (*perm)[best]);
    }
    T beta{};
    auto x = w.column(i).subspan(i);
    auto h = make_reflector<T>(std::span<const T>(x.data(), x.size()), i, beta);
    h.apply_left(w, i + 1);
    w(i, i) = beta;
    for (std::size_t p = i + 1; p < m; ++p) w(p, i) = T{};
    hs.push_back(std::move(h));
  }
  return hs;
}

template <std::floating_point T>
basic_qr_result<T> assemble(const basic_matrix<T>& w, const std::vector<reflector<T>>& hs,
                            bool full_q) {
  const std::size_t m = w.rows(), n = w.cols(), r = std::min(m, n);
  const std::size_t qc = full_q ? m : r;
  basic_matrix<T> q(m, qc);
  for (std::size_t j = 0; j < qc; ++j) q(j, j) = T{1};
  for (std::size_t h = hs.size(); h-- > 0;) hs[h].apply_left(q, 0);

  basic_matrix<T> rr(qc, n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i <= std::min(j, qc - 1); ++i) rr(i, j) = w(i, j);

  for (std::size_t i = 0; i < r; ++i) {
    if (rr(i, i) >= T{}) continue;
    for (std::size_t j = i; j < n; ++j) rr(i, j) = -rr(i, j);
    for (T& v : q.column(i)) v = -v;
  }
  return {std::move(q), std::move(rr)};
}

} // namespace detail

/// Householder QR with nonnegative diagonal on R.
template <std::floating_point T>
basic_qr_result<T> householder_qr(const basic_matrix<T>& a, bool full_q = false) {
  detail::validate_factor_input(a);
  basic_matrix<T> w = a;
  auto hs = detail::triangularize<T>(w, nullptr);
  return detail::assemble(w, hs, full_q);
}

/// Householder QR with column pivoting (Businger–Golub). Residual column norms
/// are recomputed at every step rather than downdated.
template <std::floating_point T>
basic_pivoted_qr<T> column_pivoted_qr(const basic_matrix<T>& a, bool full_q = false) {
  detail::validate_factor_input(a);
  basic_matrix<T> w = a;
  std::vector<std::size_t> perm(a.cols());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  auto hs = detail::triangularize<T>(w, &perm);
  return {detail::assemble(w, hs, full_q), std::move(perm)};
}

/// Restores upper-triangular form of R after its columns at or beyond
/// `from` were disturbed, keeping Q·R invariant. Q is m×r and R is r×n.
template <std::floating_point T>
void retriangularize_trailing(basic_matrix<T>& q, basic_matrix<T>& r, std::size_t from) {
  const std::size_t rr = r.rows(), n = r.cols();
  if (from >= rr) return;
  auto block = r.block(from, from, rr - from, n - from);
  auto local = householder_qr(block, /*full_q=*/true);
  for (std::size_t j = from; j < n; ++j)
    for (std::size_t i = from; i < rr; ++i) r(i, j) = local.r(i - from, j - from);
  auto qtail = q.block(0, from, q.rows(), rr - from) * local.q;
  for (std::size_t j = from; j < rr; ++j)
    for (std::size_t i = 0; i < q.rows(); ++i) q(i, j) = qtail(i, j - from);
}

} // namespace qrfs
