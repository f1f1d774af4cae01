#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "qrfs/matrix.hpp"
#include "qrfs/qr.hpp"
#include "qrfs/rrqr.hpp"
#include "qrfs/selection.hpp"
#include "qrfs/svd.hpp"

namespace qrfs {

/// Which axis of W the normalization step scales to unit length.
enum class NmfNormalization { rows, columns };

struct NmfQrConfig {
  /// Weight of the graph-Laplacian structure term.
  double alpha = 1.0;
  /// Soft orthogonality penalty on W.
  double beta = 100.0;
  /// Weight of the ℓ2,1/2 row-sparsity term.
  double gamma_sparse = 1.0;
  double epsilon = 1e-8;
  std::size_t knn_k = 5;
  /// Heat-kernel width; 0 means the mean squared pairwise distance.
  double kernel_bandwidth = 0.0;
  std::size_t max_iters = 200;
  std::uint64_t seed = 0;
  /// Subspace rank; 0 means the numerical rank of the data.
  std::size_t rank_k = 0;
  NmfNormalization normalization = NmfNormalization::rows;

  void validate() const {
    if (!(alpha >= 0.0) || !(beta >= 0.0) || !(gamma_sparse >= 0.0))
      throw validation_error("nmfqr: alpha, beta and gamma_sparse must be nonnegative");
    if (!(epsilon > 0.0)) throw validation_error("nmfqr: epsilon must be positive");
    if (knn_k < 1) throw validation_error("nmfqr: knn_k must be at least 1");
    if (max_iters < 1) throw validation_error("nmfqr: max_iters must be at least 1");
    if (!(kernel_bandwidth >= 0.0)) throw validation_error("nmfqr: kernel_bandwidth must be >= 0");
  }
};

/// Diagnostics for one pass of the update loop.
struct NmfQrIteration {
  /// Lagrangian value without the multiplier term, after the H update.
  double objective = 0.0;
  /// ½‖A − AWH‖²_F with the new W, before and after the H update.
  double reconstruction_before_h = 0.0;
  double reconstruction_after_h = 0.0;
  /// Smallest entry of W after the multiplicative update.
  double min_w = 0.0;
  /// Largest |norm − 1| over the nonzero rows (or columns) right after
  /// normalization.
  double normalize_defect = 0.0;
};

struct NmfQrState {
  DenseMatrix w;         // n×k, nonnegative
  DenseMatrix h;         // k×n
  std::vector<double> phi;
  DenseMatrix laplacian; // samples×samples
  std::vector<NmfQrIteration> trace;
};

namespace detail {

inline double squared_distance(const DenseMatrix& a, std::size_t i, std::size_t j) {
  double s = 0.0;
  for (std::size_t c = 0; c < a.cols(); ++c) {
    const double d = a(i, c) - a(j, c);
    s += d * d;
  }
  return s;
}

inline DenseMatrix pairwise_squared_distances(const DenseMatrix& a) {
  const std::size_t m = a.rows();
  DenseMatrix d(m, m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j) d(i, j) = d(j, i) = squared_distance(a, i, j);
  return d;
}

} // namespace detail

/// Mean squared distance over distinct sample pairs, or 1 when it is 0.
inline double default_bandwidth(const DenseMatrix& data) {
  const std::size_t m = data.rows();
  if (m < 2) return 1.0;
  double s = 0.0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j) s += detail::squared_distance(data, i, j);
  const double mean = s / (0.5 * static_cast<double>(m) * static_cast<double>(m - 1));
  return mean > 0.0 ? mean : 1.0;
}

/// Symmetric heat-kernel k-NN affinity over samples (rows). Γ_ij is
/// exp(−‖a_i − a_j‖²/σ) when either point is among the other's knn_k nearest
/// neighbours (a point is never its own neighbour), else 0. Distance ties are
/// broken by the lower sample index.
inline DenseMatrix affinity_matrix(const DenseMatrix& data, std::size_t knn_k, double bandwidth) {
  const std::size_t m = data.rows();
  if (m < 2) throw validation_error("affinity_matrix: need at least two samples");
  if (!(bandwidth > 0.0)) throw validation_error("affinity_matrix: bandwidth must be positive");
  if (knn_k < 1) throw validation_error("affinity_matrix: knn_k must be at least 1");
  const auto d = detail::pairwise_squared_distances(data);
  const std::size_t kk = std::min(knn_k, m - 1);
  std::vector<std::vector<char>> nb(m, std::vector<char>(m, 0));
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < m; ++i) {
    order.clear();
    for (std::size_t j = 0; j < m; ++j)
      if (j != i) order.push_back(j);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return d(i, x) < d(i, y); });
    for (std::size_t t = 0; t < kk; ++t) nb[i][order[t]] = 1;
  }
  DenseMatrix g(m, m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j)
      if (i != j && (nb[i][j] || nb[j][i])) g(i, j) = std::exp(-d(i, j) / bandwidth);
  return g;
}

/// S = D − Γ with D_ii the row sums of Γ.
inline DenseMatrix graph_laplacian(const DenseMatrix& affinity) {
  const std::size_t m = affinity.rows();
  if (affinity.cols() != m) throw validation_error("graph_laplacian: affinity must be square");
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      if (std::abs(affinity(i, j) - affinity(j, i)) > 1e-12)
        throw validation_error("graph_laplacian: affinity is not symmetric");
      if (affinity(i, j) < 0.0) throw validation_error("graph_laplacian: negative affinity");
    }
  DenseMatrix s(m, m);
  for (std::size_t i = 0; i < m; ++i) {
    double deg = 0.0;
    for (std::size_t j = 0; j < m; ++j)
      if (j != i) {
        s(i, j) = -affinity(i, j);
        deg += affinity(i, j);
      }
    // the diagonal of Γ cancels in D − Γ, so rows sum to zero exactly
    s(i, i) = deg;
  }
  return s;
}

/// Φ_ii = 1 / (4·(‖w^i‖₂ + ε)^{3/2}).
inline std::vector<double> phi_matrix(const DenseMatrix& w, double epsilon) {
  if (!(epsilon >= 0.0)) throw validation_error("phi_matrix: epsilon must be nonnegative");
  std::vector<double> phi(w.rows());
  for (std::size_t i = 0; i < w.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < w.cols(); ++j) s += w(i, j) * w(i, j);
    phi[i] = 1.0 / (4.0 * std::pow(std::sqrt(s) + epsilon, 1.5));
  }
  return phi;
}

/// Scales every nonzero row of W to unit Euclidean norm.
inline void normalize_rows(DenseMatrix& w) {
  for (std::size_t i = 0; i < w.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < w.cols(); ++j) s += w(i, j) * w(i, j);
    if (s == 0.0) continue;
    const double inv = 1.0 / std::sqrt(s);
    for (std::size_t j = 0; j < w.cols(); ++j) w(i, j) *= inv;
  }
}

/// Scales every nonzero column of W to unit Euclidean norm.
inline void normalize_columns(DenseMatrix& w) {
  for (std::size_t j = 0; j < w.cols(); ++j) {
    const double s = norm2<double>(w.column(j));
    if (s == 0.0) continue;
    for (double& v : w.column(j)) v /= s;
  }
}

namespace detail {

inline double normalize_w(DenseMatrix& w, NmfNormalization mode) {
  double defect = 0.0;
  if (mode == NmfNormalization::rows) {
    normalize_rows(w);
    for (std::size_t i = 0; i < w.rows(); ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < w.cols(); ++j) s += w(i, j) * w(i, j);
      if (s > 0.0) defect = std::max(defect, std::abs(std::sqrt(s) - 1.0));
    }
  } else {
    normalize_columns(w);
    for (std::size_t j = 0; j < w.cols(); ++j) {
      const double s = norm2<double>(w.column(j));
      if (s > 0.0) defect = std::max(defect, std::abs(s - 1.0));
    }
  }
  return defect;
}

} // namespace detail

/// Products of the data that stay fixed across iterations.
struct NmfQrOperators {
  DenseMatrix gram;       // AᵀA
  DenseMatrix structure;  // AᵀSA

  NmfQrOperators(const DenseMatrix& data, const DenseMatrix& laplacian)
      : gram(transpose_times(data, data)),
        structure(transpose_times(data, laplacian * data)) {}
};

inline constexpr double kDenominatorFloor = 1e-12;

/// One multiplicative update of W:
///   W ← W ∘ max(AᵀAHᵀ + βW, 0) ⊘ max(AᵀAWHHᵀ + α·AᵀSAW + γ·ΦW + β·WWᵀW, 1e−12)
inline DenseMatrix update_w(const DenseMatrix& w, const DenseMatrix& h, const std::vector<double>& phi,
                            const NmfQrOperators& ops, const NmfQrConfig& cfg,
                            std::size_t iteration = 0) {
  const std::size_t n = w.rows(), k = w.cols();
  auto numer = ops.gram * h.transpose();
  auto denom = ops.gram * (w * (h * h.transpose()));
  auto smooth = ops.structure * w;
  auto wwtw = w * transpose_times(w, w);
  DenseMatrix out(n, k);
  for (std::size_t j = 0; j < k; ++j)
    for (std::size_t i = 0; i < n; ++i) {
      const double num = numer(i, j) + cfg.beta * w(i, j);
      const double den = denom(i, j) + cfg.alpha * smooth(i, j) +
                         cfg.gamma_sparse * phi[i] * w(i, j) + cfg.beta * wwtw(i, j);
      const double v = w(i, j) * std::max(num, 0.0) / std::max(den, kDenominatorFloor);
      if (!std::isfinite(v))
        throw numerical_error("nmfqr: non-finite W entry at iteration " + std::to_string(iteration),
                              iteration);
      out(i, j) = v;
    }
  return out;
}

/// Convenience form taking the state; recomputes the fixed products.
inline DenseMatrix update_w(const NmfQrState& state, const DenseMatrix& data, const NmfQrConfig& cfg) {
  return update_w(state.w, state.h, state.phi, NmfQrOperators(data, state.laplacian), cfg);
}

inline double nmfqr_reconstruction(const DenseMatrix& data, const DenseMatrix& w,
                                   const DenseMatrix& h) {
  const double r = frobenius_norm(data - (data * w) * h);
  return 0.5 * r * r;
}

/// ½‖A − AWH‖² + α/2·Tr(WᵀAᵀSAW) + γ/2·Tr(WᵀΦW) + β/4·‖WᵀW − I‖².
inline double nmfqr_objective(const DenseMatrix& data, const DenseMatrix& w, const DenseMatrix& h,
                              const std::vector<double>& phi, const NmfQrOperators& ops,
                              const NmfQrConfig& cfg) {
  double smooth = 0.0;
  const auto sw = ops.structure * w;
  for (std::size_t j = 0; j < w.cols(); ++j) smooth += dot<double>(w.column(j), sw.column(j));
  double sparse = 0.0;
  for (std::size_t i = 0; i < w.rows(); ++i)
    for (std::size_t j = 0; j < w.cols(); ++j) sparse += phi[i] * w(i, j) * w(i, j);
  auto wtw = transpose_times(w, w);
  for (std::size_t i = 0; i < wtw.rows(); ++i) wtw(i, i) -= 1.0;
  const double orth = frobenius_norm(wtw);
  return nmfqr_reconstruction(data, w, h) + 0.5 * cfg.alpha * smooth +
         0.5 * cfg.gamma_sparse * sparse + 0.25 * cfg.beta * orth * orth;
}

/// Runs the NMF-QR loop and returns the final state with its per-iteration
/// trace.
inline NmfQrState nmfqr_run(const DenseMatrix& data, const NmfQrConfig& cfg) {
  cfg.validate();
  data.require_finite("nmfqr input");
  const std::size_t m = data.rows(), n = data.cols();
  if (m < 2) throw validation_error("nmfqr: need at least two samples");

  const std::size_t k = cfg.rank_k ? cfg.rank_k : detail::selection_rank(data);
  if (k == 0) throw degenerate_state_error("nmfqr: data matrix is numerically zero");
  if (k > std::min(m, n)) throw validation_error("nmfqr: rank_k exceeds min(samples, features)");

  NmfQrState st;
  std::mt19937_64 gen(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  st.w = DenseMatrix(n, k);
  for (std::size_t j = 0; j < k; ++j)
    for (std::size_t i = 0; i < n; ++i) st.w(i, j) = unit(gen);
  detail::normalize_w(st.w, cfg.normalization);

  // H starts as the leading k rows of R from A = Q·R, i.e. [R11 R12].
  const auto qr = householder_qr(data);
  st.h = qr.r.block(0, 0, k, n);

  const double bw = cfg.kernel_bandwidth > 0.0 ? cfg.kernel_bandwidth : default_bandwidth(data);
  st.laplacian = graph_laplacian(affinity_matrix(data, cfg.knn_k, bw));
  const NmfQrOperators ops(data, st.laplacian);

  st.trace.reserve(cfg.max_iters);
  for (std::size_t it = 0; it < cfg.max_iters; ++it) {
    NmfQrIteration rec;

    rec.normalize_defect = detail::normalize_w(st.w, cfg.normalization);

    st.phi = phi_matrix(st.w, cfg.epsilon);
    st.w = update_w(st.w, st.h, st.phi, ops, cfg, it);
    rec.min_w = st.w.empty() ? 0.0 : st.w(0, 0);
    for (std::size_t j = 0; j < k; ++j)
      for (double v : st.w.column(j)) rec.min_w = std::min(rec.min_w, v);

    rec.reconstruction_before_h = nmfqr_reconstruction(data, st.w, st.h);
    const auto aw = data * st.w;
    const auto aw_pinv = pseudoinverse(aw);
    if (frobenius_norm(aw) == 0.0 || frobenius_norm(aw_pinv) == 0.0)
      throw degenerate_state_error(
          "nmfqr: AW collapsed to rank 0 at iteration " + std::to_string(it) +
          "; try a smaller rank_k or a different seed");
    st.h = aw_pinv * data;
    if (!st.h.all_finite())
      throw numerical_error("nmfqr: non-finite H at iteration " + std::to_string(it), it);
    rec.reconstruction_after_h = nmfqr_reconstruction(data, st.w, st.h);
    rec.objective = nmfqr_objective(data, st.w, st.h, st.phi, ops, cfg);
    st.trace.push_back(rec);
  }
  return st;
}

/// Feature ranking by descending ‖w^i‖₂ (ties to the lower index).
inline std::vector<std::size_t> rank_rows_by_norm(const DenseMatrix& w, std::vector<double>* norms = nullptr) {
  std::vector<double> nr(w.rows());
  for (std::size_t i = 0; i < w.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < w.cols(); ++j) s += w(i, j) * w(i, j);
    nr[i] = std::sqrt(s);
  }
  std::vector<std::size_t> order(w.rows());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return nr[a] > nr[b]; });
  if (norms) *norms = std::move(nr);
  return order;
}

inline SelectionResult nmfqr_select(const DenseMatrix& data, const NmfQrConfig& cfg,
                                    std::size_t top_k, NmfQrState* state_out = nullptr) {
  if (top_k < 1 || top_k > data.cols())
    throw validation_error("nmfqr: top_k must lie in [1, n_features]");
  auto st = nmfqr_run(data, cfg);
  std::vector<double> norms;
  const auto order = rank_rows_by_norm(st.w, &norms);

  SelectionResult out;
  out.method = "nmfqr";
  out.selected.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(top_k));
  for (auto i : out.selected) out.scores.push_back(norms[i]);
  out.params = {{"top_k", static_cast<double>(top_k)},
                {"alpha", cfg.alpha},
                {"beta", cfg.beta},
                {"gamma_sparse", cfg.gamma_sparse},
                {"epsilon", cfg.epsilon},
                {"knn_k", static_cast<double>(cfg.knn_k)},
                {"kernel_bandwidth", cfg.kernel_bandwidth},
                {"max_iters", static_cast<double>(cfg.max_iters)},
                {"seed", static_cast<double>(cfg.seed)},
                {"rank_k", static_cast<double>(st.w.cols())},
                {"normalize_columns", cfg.normalization == NmfNormalization::columns ? 1.0 : 0.0}};
  if (state_out) *state_out = std::move(st);
  return out;
}

} // namespace qrfs
