#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nsspectra/errors.hpp"

namespace nsspectra {

/// Dimensions of a tall experiment matrix: in_d rows, out_d columns, out_d <= in_d.
///
/// Wide matrices are handled by transposing at the boundary; singular values
/// do not change under transposition.
class Shape {
 public:
  Shape(std::size_t in_d, std::size_t out_d) : in_d_(in_d), out_d_(out_d) {
    if (in_d == 0 || out_d == 0) {
      throw ConfigError("shape: dimensions must be >= 1, got " + to_string());
    }
    if (out_d > in_d) {
      throw ConfigError("shape: out_d must not exceed in_d (pass the transpose), got " +
                        to_string());
    }
  }

  std::size_t in_d() const noexcept { return in_d_; }
  std::size_t out_d() const noexcept { return out_d_; }
  double gamma() const noexcept {
    return static_cast<double>(out_d_) / static_cast<double>(in_d_);
  }

  std::string to_string() const {
    return "(" + std::to_string(in_d_) + ", " + std::to_string(out_d_) + ")";
  }

  friend bool operator==(const Shape&, const Shape&) = default;

 private:
  std::size_t in_d_;
  std::size_t out_d_;
};

/// Row-major dense matrix of doubles.
class DenseMatrix {
 public:
  DenseMatrix() = default;

  DenseMatrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), entries_(rows * cols, 0.0) {}

  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> entries)
      : rows_(rows), cols_(cols), entries_(std::move(entries)) {
    if (entries_.size() != rows_ * cols_) {
      throw DimensionError("matrix: entry count " + std::to_string(entries_.size()) +
                           " does not match " + std::to_string(rows_) + "x" +
                           std::to_string(cols_));
    }
  }

  static DenseMatrix identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  static DenseMatrix diagonal(std::span<const double> values) {
    DenseMatrix m(values.size(), values.size());
    for (std::size_t i = 0; i < values.size(); ++i) m(i, i) = values[i];
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  bool is_tall() const noexcept { return rows_ >= cols_; }

  /// Tall shape view; throws ConfigError for wide or empty matrices.
  Shape shape() const { return Shape(rows_, cols_); }

  double& operator()(std::size_t i, std::size_t j) noexcept { return entries_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const noexcept {
    return entries_[i * cols_ + j];
  }

  double* data() noexcept { return entries_.data(); }
  const double* data() const noexcept { return entries_.data(); }

  std::span<double> entries() noexcept { return entries_; }
  std::span<const double> entries() const noexcept { return entries_; }

  std::span<double> row(std::size_t i) noexcept { return {entries_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const noexcept {
    return {entries_.data() + i * cols_, cols_};
  }

  bool all_finite() const noexcept {
    for (double x : entries_) {
      if (!std::isfinite(x)) return false;
    }
    return true;
  }

  friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> entries_;
};

inline DenseMatrix transpose(const DenseMatrix& m) {
  DenseMatrix t(m.cols(), m.rows());
  constexpr std::size_t kBlock = 32;
  for (std::size_t i0 = 0; i0 < m.rows(); i0 += kBlock) {
    for (std::size_t j0 = 0; j0 < m.cols(); j0 += kBlock) {
      const std::size_t i1 = std::min(i0 + kBlock, m.rows());
      const std::size_t j1 = std::min(j0 + kBlock, m.cols());
      for (std::size_t i = i0; i < i1; ++i) {
        for (std::size_t j = j0; j < j1; ++j) t(j, i) = m(i, j);
      }
    }
  }
  return t;
}

inline DenseMatrix scaled(DenseMatrix m, double factor) {
  for (double& x : m.entries()) x *= factor;
  return m;
}

/// a + factor * b, elementwise.
inline DenseMatrix add_scaled(const DenseMatrix& a, const DenseMatrix& b, double factor) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError("add_scaled: shape mismatch");
  }
  DenseMatrix out = a;
  auto o = out.entries();
  auto bv = b.entries();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += factor * bv[i];
  return out;
}

/// Largest absolute entry difference; matrices must have equal dimensions.
inline double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError("max_abs_diff: shape mismatch");
  }
  double worst = 0.0;
  auto av = a.entries();
  auto bv = b.entries();
  for (std::size_t i = 0; i < av.size(); ++i) worst = std::max(worst, std::abs(av[i] - bv[i]));
  return worst;
}

}  // namespace nsspectra
