#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "qrfs/matrix.hpp"
#include "qrfs/qr.hpp"
#include "qrfs/selection.hpp"
#include "qrfs/svd.hpp"

namespace qrfs {

struct RrqrConfig {
  std::size_t k = 1;
  /// Swap bound; strictly greater than 1 or the swap loop may cycle.
  double f = 1.1;
  /// 0 means 4·n·k.
  std::size_t max_swaps = 0;
  /// Relative floor on R11 diagonal magnitudes (relative to the largest).
  double tol_zero = 1e-14;
  /// Start from column-pivoted QR. When false the swap loop starts from the
  /// identity permutation, which terminates too but needs more swaps.
  bool pivoted_start = true;

  void validate(std::size_t rows, std::size_t cols) const {
    if (!(f > 1.0) || !std::isfinite(f)) throw validation_error("rrqr: f must be > 1");
    if (k < 1 || k > std::min(rows, cols))
      throw validation_error("rrqr: k must lie in [1, min(rows, cols)]");
    if (!(tol_zero >= 0.0)) throw validation_error("rrqr: tol_zero must be nonnegative");
  }
};

/// A·Π = Q·R with R partitioned at k into R11 (k×k), R12, R22.
struct RrqrFactorization {
  DenseMatrix q;
  DenseMatrix r;
  std::vector<std::size_t> perm;
  std::size_t k = 0;
  double f = 0.0;
  std::size_t swaps_performed = 0;
  /// Largest swap criterion over all (i, j) when the loop stopped.
  double certificate = 0.0;
  /// log|det R11| after initialization and after every swap.
  std::vector<double> log_det_trace;

  DenseMatrix r11() const { return r.block(0, 0, k, k); }
  DenseMatrix r12() const { return r.block(0, k, k, r.cols() - k); }
  DenseMatrix r22() const { return r.block(k, k, r.rows() - k, r.cols() - k); }
};

/// Rank deficiency discovered inside strong_rrqr; carries the factorization
/// as it stood when the singular R11 was found.
class rrqr_rank_deficiency_error : public rank_deficiency_error {
public:
  rrqr_rank_deficiency_error(const std::string& what, std::size_t index,
                             RrqrFactorization partial)
      : rank_deficiency_error(what, index), partial_(std::move(partial)) {}
  const RrqrFactorization& partial() const noexcept { return partial_; }

private:
  RrqrFactorization partial_;
};

namespace detail {

inline void require_nonsingular_triangle(const DenseMatrix& r11, double tol_zero) {
  if (r11.rows() != r11.cols()) throw validation_error("R11 must be square");
  double dmax = 0.0;
  for (std::size_t i = 0; i < r11.rows(); ++i) dmax = std::max(dmax, std::abs(r11(i, i)));
  for (std::size_t i = 0; i < r11.rows(); ++i)
    if (std::abs(r11(i, i)) <= tol_zero * dmax || r11(i, i) == 0.0)
      throw rank_deficiency_error("R11 is numerically singular at diagonal " + std::to_string(i),
                                  i);
}

// Solves U·x = b in place for upper-triangular U.
inline void back_substitute(const DenseMatrix& u, std::span<double> b) {
  for (std::size_t i = u.rows(); i-- > 0;) {
    double s = b[i];
    for (std::size_t j = i + 1; j < u.cols(); ++j) s -= u(i, j) * b[j];
    b[i] = s / u(i, i);
  }
}

} // namespace detail

/// ω_i = ‖row i of R11⁻¹‖₂, one forward substitution with R11ᵀ per row.
inline std::vector<double> omega(const DenseMatrix& r11, double tol_zero = 1e-14) {
  detail::require_nonsingular_triangle(r11, tol_zero);
  const std::size_t k = r11.rows();
  std::vector<double> out(k), y(k);
  for (std::size_t i = 0; i < k; ++i) {
    // R11ᵀ·y = e_i; y is lower-supported from index i on.
    std::fill(y.begin(), y.end(), 0.0);
    for (std::size_t p = i; p < k; ++p) {
      double s = p == i ? 1.0 : 0.0;
      for (std::size_t q = i; q < p; ++q) s -= r11(q, p) * y[q];
      y[p] = s / r11(p, p);
    }
    out[i] = norm2<double>(y);
  }
  return out;
}

/// γ_j = ‖column j‖₂.
inline std::vector<double> gamma(const DenseMatrix& r22) {
  std::vector<double> out(r22.cols());
  for (std::size_t j = 0; j < r22.cols(); ++j) out[j] = norm2<double>(r22.column(j));
  return out;
}

/// R11⁻¹·R12 by back-substitution.
inline DenseMatrix inverse_times(const DenseMatrix& r11, const DenseMatrix& r12) {
  DenseMatrix x = r12;
  for (std::size_t j = 0; j < x.cols(); ++j) detail::back_substitute(r11, x.column(j));
  return x;
}

/// All swap criteria (R11⁻¹R12)²_ij + (γ_j(R22)·ω_i(R11))² for a triangular R
/// split at k. Entry (i, j) is the squared factor by which |det R11| changes
/// when columns i and k + j are exchanged.
inline DenseMatrix criterion_matrix(const DenseMatrix& r, std::size_t k, double tol_zero = 1e-14) {
  const std::size_t n = r.cols();
  if (k == 0 || k > r.rows() || k > n) throw validation_error("criterion_matrix: bad k");
  const auto r11 = r.block(0, 0, k, k);
  const auto w = omega(r11, tol_zero);
  const auto x = inverse_times(r11, r.block(0, k, k, n - k));
  const auto g = gamma(r.block(k, k, r.rows() - k, n - k));
  DenseMatrix c(k, n - k);
  for (std::size_t j = 0; j < n - k; ++j)
    for (std::size_t i = 0; i < k; ++i) {
      const double gw = g[j] * w[i];
      c(i, j) = x(i, j) * x(i, j) + gw * gw;
    }
  return c;
}

/// Criterion for exchanging column i (< k) with column k + j of R.
inline double swap_criterion(const DenseMatrix& r, std::size_t k, std::size_t i, std::size_t j,
                             double tol_zero = 1e-14) {
  if (i >= k || k + j >= r.cols()) throw validation_error("swap_criterion: index out of range");
  return criterion_matrix(r, k, tol_zero)(i, j);
}

inline double swap_criterion(const RrqrFactorization& fact, std::size_t i, std::size_t j) {
  return swap_criterion(fact.r, fact.k, i, j);
}

namespace detail {

inline double log_abs_det_leading(const DenseMatrix& r, std::size_t k) {
  double s = 0.0;
  for (std::size_t i = 0; i < k; ++i) s += std::log(std::abs(r(i, i)));
  return s;
}

} // namespace detail

/// Strong rank-revealing QR (Gu–Eisenstat style determinant-increasing swaps).
///
/// Starts from column-pivoted QR (or the identity permutation), then
/// repeatedly exchanges the pair (i, k+j) with the largest criterion while it
/// exceeds f². Each accepted swap grows
/// |det R11| by a factor above f, so the loop terminates; `max_swaps` only
/// guards against roundoff when f is very close to 1.
inline RrqrFactorization strong_rrqr(const DenseMatrix& a, const RrqrConfig& cfg) {
  cfg.validate(a.rows(), a.cols());
  const std::size_t n = a.cols(), k = cfg.k;
  const std::size_t cap = cfg.max_swaps ? cfg.max_swaps : 4 * n * k;
  const double bound = cfg.f * cfg.f;

  RrqrFactorization fact;
  if (cfg.pivoted_start) {
    auto init = column_pivoted_qr(a);
    fact.q = std::move(init.qr.q);
    fact.r = std::move(init.qr.r);
    fact.perm = std::move(init.perm);
  } else {
    auto init = householder_qr(a);
    fact.q = std::move(init.q);
    fact.r = std::move(init.r);
    fact.perm.resize(n);
    std::iota(fact.perm.begin(), fact.perm.end(), std::size_t{0});
  }
  fact.k = k;
  fact.f = cfg.f;

  auto guarded_criteria = [&] {
    try {
      return criterion_matrix(fact.r, k, cfg.tol_zero);
    } catch (const rank_deficiency_error& e) {
      throw rrqr_rank_deficiency_error(
          std::string("strong_rrqr: ") + e.what() + " (k exceeds the numerical rank?)",
          e.index(), fact);
    }
  };

  auto crit = guarded_criteria();
  fact.log_det_trace.push_back(detail::log_abs_det_leading(fact.r, k));
  for (;;) {
    double best = -1.0;
    std::size_t bi = 0, bj = 0;
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < n - k; ++j)
        if (crit(i, j) > best) {
          best = crit(i, j);
          bi = i;
          bj = j;
        }
    fact.certificate = std::max(best, 0.0);
    if (!(best > bound)) break;
    if (fact.swaps_performed >= cap)
      throw nontermination_error("strong_rrqr: exceeded " + std::to_string(cap) +
                                 " swaps; f is too close to 1 for working precision");
    fact.r.swap_columns(bi, k + bj);
    std::swap(fact.perm[bi], fact.perm[k + bj]);
    retriangularize_trailing(fact.q, fact.r, bi);
    ++fact.swaps_performed;
    fact.log_det_trace.push_back(detail::log_abs_det_leading(fact.r, k));
    crit = guarded_criteria();
  }
  return fact;
}

namespace detail {

// Rank via the Jacobi oracle when it is within cap, otherwise via the
// pivoted-QR diagonal under the same threshold rule.
inline std::size_t selection_rank(const DenseMatrix& a) {
  if (std::min(a.rows(), a.cols()) <= 512) return numerical_rank(a);
  const auto p = column_pivoted_qr(a);
  const double d0 = std::abs(p.qr.r(0, 0));
  const double tol = static_cast<double>(std::max(a.rows(), a.cols())) *
                     std::numeric_limits<double>::epsilon() * d0;
  std::size_t rank = 0;
  while (rank < p.qr.r.rows() && std::abs(p.qr.r(rank, rank)) > tol) ++rank;
  return rank;
}

} // namespace detail

/// Feature selection from the strong-RRQR permutation: the first k columns
/// of Π. Scores are |diag(R11)| in factorization order.
///
/// When k exceeds the numerical rank the selection is truncated to the rank
/// and a warning is attached; some dependent columns are then necessarily
/// left out.
inline SelectionResult select_features_rrqr(const DenseMatrix& data, std::size_t k,
                                            double f = 1.1) {
  data.require_finite("rrqr input");
  if (k < 1 || k > data.cols()) throw validation_error("rrqr: top_k must lie in [1, n_features]");
  SelectionResult out;
  out.method = "rrqr";
  out.params = {{"k", static_cast<double>(k)}, {"f", f}};

  const std::size_t rank = detail::selection_rank(data);
  if (rank == 0) throw rank_deficiency_error("rrqr: data matrix is numerically zero", 0);
  std::size_t keff = k;
  if (k > rank) {
    keff = rank;
    out.warnings.push_back("rank_truncation: requested k=" + std::to_string(k) +
                           " exceeds numerical rank " + std::to_string(rank) +
                           "; selection truncated");
  }
  RrqrConfig cfg;
  cfg.k = keff;
  cfg.f = f;
  const auto fact = strong_rrqr(data, cfg);
  out.selected.assign(fact.perm.begin(), fact.perm.begin() + static_cast<std::ptrdiff_t>(keff));
  out.scores.resize(keff);
  for (std::size_t i = 0; i < keff; ++i) out.scores[i] = std::abs(fact.r(i, i));
  out.params["rank"] = static_cast<double>(rank);
  out.params["swaps"] = static_cast<double>(fact.swaps_performed);
  out.params["certificate"] = fact.certificate;
  return out;
}

} // namespace qrfs
