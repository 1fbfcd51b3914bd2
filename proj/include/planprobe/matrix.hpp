#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "planprobe/error.hpp"

namespace planprobe {

/// Dense column-major matrix of doubles. Column `c` is contiguous, so a batch
/// of B feature vectors is stored as a (features x B) matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix column(std::span<const double> values) {
    Matrix m(values.size(), 1);
    std::copy(values.begin(), values.end(), m.data_.begin());
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[c * rows_ + r]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[c * rows_ + r]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> col(std::size_t c) { return {data_.data() + c * rows_, rows_}; }
  std::span<const double> col(std::size_t c) const { return {data_.data() + c * rows_, rows_}; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }
  void resize(std::size_t rows, std::size_t cols) {
    rows_ = rows;
    cols_ = cols;
    data_.assign(rows * cols, 0.0);
  }

  bool all_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  std::string shape_string() const {
    return "[" + std::to_string(rows_) + "x" + std::to_string(cols_) + "]";
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeError(std::string(what) + ": shape mismatch " + a.shape_string() + " vs " +
                     b.shape_string());
}

inline void axpy(std::span<double> y, std::span<const double> x, double a) {
  const std::size_t n = y.size();
  double* __restrict yp = y.data();
  const double* __restrict xp = x.data();
  for (std::size_t i = 0; i < n; ++i) yp[i] += a * xp[i];
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

/// out += w * x. Every output element accumulates over the input index in
/// ascending order, independent of the batch width, so a column computed in
/// a batch is bit-identical to the same column computed alone.
inline void matmul_acc(Matrix& out, const Matrix& w, const Matrix& x) {
  if (w.cols() != x.rows() || out.rows() != w.rows() || out.cols() != x.cols())
    throw ShapeError("matmul: shapes " + w.shape_string() + " * " + x.shape_string() + " -> " +
                     out.shape_string());
  for (std::size_t b = 0; b < x.cols(); ++b) {
    auto o = out.col(b);
    for (std::size_t j = 0; j < w.cols(); ++j) {
      const double xj = x(j, b);
      if (xj != 0.0) axpy(o, w.col(j), xj);
    }
  }
}

/// out += w^T * dy.
inline void matmul_tn_acc(Matrix& out, const Matrix& w, const Matrix& dy) {
  if (w.rows() != dy.rows() || out.rows() != w.cols() || out.cols() != dy.cols())
    throw ShapeError("matmul_tn: shapes " + w.shape_string() + "^T * " + dy.shape_string() +
                     " -> " + out.shape_string());
  for (std::size_t b = 0; b < dy.cols(); ++b) {
    const auto g = dy.col(b);
    for (std::size_t j = 0; j < w.cols(); ++j) out(j, b) += dot(w.col(j), g);
  }
}

/// out += dy * x^T (weight-gradient accumulation).
inline void matmul_nt_acc(Matrix& out, const Matrix& dy, const Matrix& x) {
  if (out.rows() != dy.rows() || out.cols() != x.rows() || dy.cols() != x.cols())
    throw ShapeError("matmul_nt: shapes " + dy.shape_string() + " * " + x.shape_string() +
                     "^T -> " + out.shape_string());
  for (std::size_t b = 0; b < x.cols(); ++b) {
    const auto g = dy.col(b);
    for (std::size_t j = 0; j < x.rows(); ++j) {
      const double xj = x(j, b);
      if (xj != 0.0) axpy(out.col(j), g, xj);
    }
  }
}

}  // namespace planprobe
