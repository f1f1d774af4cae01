#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "qrfs/error.hpp"

namespace qrfs {

/// Dense real matrix stored column-major.
///
/// Rows are samples and columns are features wherever a matrix carries a
/// dataset. The storage order is an implementation detail; the only place it
/// leaks is `column()`, which hands out a contiguous view of one column.
template <std::floating_point T>
class basic_matrix {
public:
  using value_type = T;

  basic_matrix() = default;

  basic_matrix(std::size_t rows, std::size_t cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  /// Row-wise literal, e.g. `{{1, 2}, {3, 4}}`.
  basic_matrix(std::initializer_list<std::initializer_list<T>> rows)
      : rows_(rows.size()), cols_(rows.size() ? rows.begin()->size() : 0),
        data_(rows_ * cols_) {
    std::size_t i = 0;
    for (const auto& row : rows) {
      if (row.size() != cols_)
        throw validation_error("matrix literal has ragged rows");
      std::size_t j = 0;
      for (T v : row) (*this)(i, j++) = v;
      ++i;
    }
  }

  static basic_matrix identity(std::size_t n) {
    basic_matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = T{1};
    return m;
  }

  static basic_matrix diagonal(std::span<const T> d) {
    basic_matrix m(d.size(), d.size());
    for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(std::size_t i, std::size_t j) noexcept { return data_[j * rows_ + i]; }
  const T& operator()(std::size_t i, std::size_t j) const noexcept {
    return data_[j * rows_ + i];
  }

  std::span<T> column(std::size_t j) noexcept { return {data_.data() + j * rows_, rows_}; }
  std::span<const T> column(std::size_t j) const noexcept {
    return {data_.data() + j * rows_, rows_};
  }

  std::vector<T> row(std::size_t i) const {
    std::vector<T> r(cols_);
    for (std::size_t j = 0; j < cols_; ++j) r[j] = (*this)(i, j);
    return r;
  }

  void swap_columns(std::size_t a, std::size_t b) noexcept {
    if (a == b) return;
    std::swap_ranges(column(a).begin(), column(a).end(), column(b).begin());
  }

  bool all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
  }

  /// Throws validation_error naming the first non-finite entry.
  void require_finite(const char* what = "matrix") const {
    for (std::size_t j = 0; j < cols_; ++j)
      for (std::size_t i = 0; i < rows_; ++i)
        if (!std::isfinite((*this)(i, j)))
          throw validation_error(std::string(what) + " has a non-finite entry at (" +
                                 std::to_string(i) + ", " + std::to_string(j) + ")");
  }

  basic_matrix transpose() const {
    basic_matrix t(cols_, rows_);
    for (std::size_t j = 0; j < cols_; ++j)
      for (std::size_t i = 0; i < rows_; ++i) t(j, i) = (*this)(i, j);
    return t;
  }

  /// Copy of the `nr x nc` block whose top-left corner is (r0, c0).
  basic_matrix block(std::size_t r0, std::size_t c0, std::size_t nr, std::size_t nc) const {
    if (r0 + nr > rows_ || c0 + nc > cols_)
      throw validation_error("block out of range");
    basic_matrix b(nr, nc);
    for (std::size_t j = 0; j < nc; ++j)
      for (std::size_t i = 0; i < nr; ++i) b(i, j) = (*this)(r0 + i, c0 + j);
    return b;
  }

  basic_matrix select_columns(std::span<const std::size_t> idx) const {
    basic_matrix s(rows_, idx.size());
    for (std::size_t j = 0; j < idx.size(); ++j) {
      if (idx[j] >= cols_) throw validation_error("column index out of range");
      std::copy_n(column(idx[j]).begin(), rows_, s.column(j).begin());
    }
    return s;
  }

  basic_matrix select_rows(std::span<const std::size_t> idx) const {
    basic_matrix s(idx.size(), cols_);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      if (idx[i] >= rows_) throw validation_error("row index out of range");
      for (std::size_t j = 0; j < cols_; ++j) s(i, j) = (*this)(idx[i], j);
    }
    return s;
  }

  basic_matrix& operator+=(const basic_matrix& o) {
    check_same_shape(o);
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += o.data_[k];
    return *this;
  }
  basic_matrix& operator-=(const basic_matrix& o) {
    check_same_shape(o);
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= o.data_[k];
    return *this;
  }
  basic_matrix& operator*=(T s) noexcept {
    for (T& v : data_) v *= s;
    return *this;
  }

  friend basic_matrix operator+(basic_matrix a, const basic_matrix& b) { return a += b; }
  friend basic_matrix operator-(basic_matrix a, const basic_matrix& b) { return a -= b; }
  friend basic_matrix operator*(basic_matrix a, T s) { return a *= s; }
  friend basic_matrix operator*(T s, basic_matrix a) { return a *= s; }

  friend basic_matrix operator*(const basic_matrix& a, const basic_matrix& b) {
    if (a.cols_ != b.rows_) throw validation_error("matrix product: inner dimensions differ");
    basic_matrix c(a.rows_, b.cols_);
    for (std::size_t j = 0; j < b.cols_; ++j) {
      auto cj = c.column(j);
      for (std::size_t p = 0; p < a.cols_; ++p) {
        const T bpj = b(p, j);
        if (bpj == T{}) continue;
        auto ap = a.column(p);
        for (std::size_t i = 0; i < a.rows_; ++i) cj[i] += ap[i] * bpj;
      }
    }
    return c;
  }

  friend bool operator==(const basic_matrix&, const basic_matrix&) = default;

private:
  void check_same_shape(const basic_matrix& o) const {
    if (rows_ != o.rows_ || cols_ != o.cols_) throw validation_error("matrix shapes differ");
  }

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

using DenseMatrix = basic_matrix<double>;

template <std::floating_point T>
T frobenius_norm(const basic_matrix<T>& a) {
  // scaled accumulation so huge/tiny entries do not over/underflow
  T scale{}, ssq{1};
  for (std::size_t j = 0; j < a.cols(); ++j)
    for (T v : a.column(j)) {
      if (v == T{}) continue;
      const T av = std::abs(v);
      if (scale < av) {
        ssq = T{1} + ssq * (scale / av) * (scale / av);
        scale = av;
      } else {
        ssq += (av / scale) * (av / scale);
      }
    }
  return scale * std::sqrt(ssq);
}

template <std::floating_point T>
T norm2(std::span<const T> v) {
  T s{};
  for (T x : v) s += x * x;
  return std::sqrt(s);
}

template <std::floating_point T>
T dot(std::span<const T> a, std::span<const T> b) {
  T s{};
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

/// aᵀ·b without materializing the transpose.
template <std::floating_point T>
basic_matrix<T> transpose_times(const basic_matrix<T>& a, const basic_matrix<T>& b) {
  if (a.rows() != b.rows()) throw validation_error("transpose_times: row counts differ");
  basic_matrix<T> c(a.cols(), b.cols());
  for (std::size_t j = 0; j < b.cols(); ++j)
    for (std::size_t i = 0; i < a.cols(); ++i) c(i, j) = dot<T>(a.column(i), b.column(j));
  return c;
}

/// ‖QᵀQ − I‖_F.
template <std::floating_point T>
T orthonormality_defect(const basic_matrix<T>& q) {
  auto g = transpose_times(q, q);
  for (std::size_t i = 0; i < g.rows(); ++i) g(i, i) -= T{1};
  return frobenius_norm(g);
}

/// Matrix with columns permuted: result column j is a column perm[j].
template <std::floating_point T>
basic_matrix<T> permute_columns(const basic_matrix<T>& a, std::span<const std::size_t> perm) {
  return a.select_columns(perm);
}

} // namespace qrfs
