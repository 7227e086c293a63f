#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nsspectra/detail/kernels.hpp"
#include "nsspectra/detail/svd_kernels.hpp"
#include "nsspectra/errors.hpp"
#include "nsspectra/matrix.hpp"

namespace nsspectra {

/// Singular values of one tall matrix, sorted descending.
class Spectrum {
 public:
  Spectrum(Shape shape, std::vector<double> values) : shape_(shape), values_(std::move(values)) {
    if (values_.size() != shape_.out_d()) {
      throw DimensionError("spectrum: expected " + std::to_string(shape_.out_d()) +
                           " values, got " + std::to_string(values_.size()));
    }
    for (std::size_t i = 0; i < values_.size(); ++i) {
      if (!std::isfinite(values_[i]) || values_[i] < 0.0) {
        throw NumericError("spectrum: values must be finite and non-negative");
      }
      if (i > 0 && values_[i] > values_[i - 1]) {
        throw NumericError("spectrum: values must be sorted descending");
      }
    }
  }

  /// Sorts (descending) before validating.
  static Spectrum from_unsorted(Shape shape, std::vector<double> values) {
    std::sort(values.begin(), values.end(), std::greater<>());
    return Spectrum(shape, std::move(values));
  }

  const Shape& shape() const noexcept { return shape_; }
  std::span<const double> values() const& noexcept { return values_; }
  // Keeps `for (double v : singular_values(m).values())` from dangling.
  std::vector<double> values() && noexcept { return std::move(values_); }
  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t i) const noexcept { return values_[i]; }

  double max() const noexcept { return values_.front(); }
  double min() const noexcept { return values_.back(); }

  double median() const noexcept {
    const std::size_t n = values_.size();
    return n % 2 == 1 ? values_[n / 2] : 0.5 * (values_[n / 2 - 1] + values_[n / 2]);
  }

  /// Share of values strictly below `threshold`.
  double fraction_below(double threshold) const noexcept {
    const auto below = std::count_if(values_.begin(), values_.end(),
                                     [threshold](double s) { return s < threshold; });
    return static_cast<double>(below) / static_cast<double>(values_.size());
  }

  /// Share of values inside the closed band [lo, hi].
  double fraction_within(double lo, double hi) const noexcept {
    const auto inside = std::count_if(values_.begin(), values_.end(),
                                      [lo, hi](double s) { return s >= lo && s <= hi; });
    return static_cast<double>(inside) / static_cast<double>(values_.size());
  }

 private:
  Shape shape_;
  std::vector<double> values_;
};

struct SvdResult {
  DenseMatrix u;  // in_d x out_d, orthonormal columns
  Spectrum s;
  DenseMatrix v;  // out_d x out_d, orthogonal
};

inline double frobenius_norm(const DenseMatrix& m) {
  return std::sqrt(detail::dot(m.data(), m.data(), m.size()));
}

/// m / ||m||_F. The singular values of the result lie in [0, 1].
inline DenseMatrix normalize_frobenius(const DenseMatrix& m) {
  const double norm = frobenius_norm(m);
  if (norm == 0.0) throw DegenerateInputError("normalize_frobenius: zero matrix");
  if (!std::isfinite(norm)) throw NumericError("normalize_frobenius: non-finite entries");
  DenseMatrix out = m;
  for (double& x : out.entries()) x /= norm;
  return out;
}

inline DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner dimensions differ (" + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + " * " + std::to_string(b.rows()) + "x" +
                         std::to_string(b.cols()) + ")");
  }
  DenseMatrix c(a.rows(), b.cols());
  detail::gemm(a.rows(), b.cols(), a.cols(), a.data(), b.data(), c.data());
  return c;
}

/// m^T m, the out_d x out_d Gram matrix of a tall matrix.
inline DenseMatrix gram(const DenseMatrix& m) { return matmul(transpose(m), m); }

/// Full decomposition by one-sided Jacobi. Requires a tall matrix.
inline SvdResult svd(const DenseMatrix& m) {
  if (!m.all_finite()) throw NumericError("svd: non-finite entries");
  const Shape shape = m.shape();
  auto jac = detail::one_sided_jacobi(m);
  return SvdResult{std::move(jac.u), Spectrum(shape, std::move(jac.sigma)), std::move(jac.v)};
}

/// Values-only path (Householder bidiagonalization + bidiagonal QR). Wide
/// inputs are transposed first, so the spectrum always has a tall shape.
inline Spectrum singular_values(const DenseMatrix& m) {
  if (!m.all_finite()) throw NumericError("singular_values: non-finite entries");
  if (m.is_tall()) {
    const Shape shape = m.shape();
    return Spectrum(shape, detail::golub_kahan_values(m));
  }
  DenseMatrix t = transpose(m);
  const Shape shape = t.shape();
  return Spectrum(shape, detail::golub_kahan_values(std::move(t)));
}

/// ||m^T m - I||_F / sqrt(out_d), computed from the entries.
inline double orthogonality_residual(const DenseMatrix& m) {
  if (!m.is_tall()) throw DimensionError("orthogonality_residual: expected in_d >= out_d");
  DenseMatrix g = gram(m);
  for (std::size_t i = 0; i < g.rows(); ++i) g(i, i) -= 1.0;
  return frobenius_norm(g) / std::sqrt(static_cast<double>(m.cols()));
}

/// Same quantity from the singular values: sqrt(sum (s^2 - 1)^2 / out_d).
inline double orthogonality_residual(const Spectrum& s) {
  double acc = 0.0;
  for (double v : s.values()) {
    const double d = v * v - 1.0;
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(s.size()));
}

}  // namespace nsspectra
