#pragma once

// Test-only reference computations, deliberately independent of the library
// kernels they check.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "nsspectra/gaussian_matrix.hpp"
#include "nsspectra/matrix.hpp"

namespace oracle {

using nsspectra::DenseMatrix;

inline DenseMatrix naive_matmul(const DenseMatrix& a, const DenseMatrix& b) {
  DenseMatrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.cols(); ++j) {
      long double acc = 0.0L;
      for (std::size_t k = 0; k < a.cols(); ++k) acc += static_cast<long double>(a(i, k)) * b(k, j);
      c(i, j) = static_cast<double>(acc);
    }
  }
  return c;
}

inline DenseMatrix naive_transpose(const DenseMatrix& a) {
  DenseMatrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  }
  return t;
}

inline double sum_of_squares(const DenseMatrix& a) {
  long double acc = 0.0L;
  for (double x : a.entries()) acc += static_cast<long double>(x) * x;
  return static_cast<double>(acc);
}

/// rows x cols matrix with orthonormal columns: modified Gram-Schmidt (two
/// passes) on a seeded Gaussian matrix.
inline DenseMatrix random_orthonormal_columns(std::size_t rows, std::size_t cols,
                                              std::uint64_t seed) {
  DenseMatrix g = nsspectra::generate({nsspectra::Shape(rows, cols), 1.0, seed});
  for (std::size_t j = 0; j < cols; ++j) {
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t p = 0; p < j; ++p) {
        double proj = 0.0;
        for (std::size_t i = 0; i < rows; ++i) proj += g(i, p) * g(i, j);
        for (std::size_t i = 0; i < rows; ++i) g(i, j) -= proj * g(i, p);
      }
    }
    double norm = 0.0;
    for (std::size_t i = 0; i < rows; ++i) norm += g(i, j) * g(i, j);
    norm = std::sqrt(norm);
    for (std::size_t i = 0; i < rows; ++i) g(i, j) /= norm;
  }
  return g;
}

/// U diag(values) V^T with seeded random orthonormal factors; U is rows x k.
inline DenseMatrix with_singular_values(std::size_t rows, const std::vector<double>& values,
                                        std::uint64_t seed) {
  const std::size_t k = values.size();
  const DenseMatrix u = random_orthonormal_columns(rows, k, seed);
  const DenseMatrix v = random_orthonormal_columns(k, k, seed ^ 0xabcdefULL);
  DenseMatrix us = u;
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < k; ++j) us(i, j) *= values[j];
  }
  return naive_matmul(us, naive_transpose(v));
}

/// Midpoint rule with n panels.
inline double riemann(const std::function<double(double)>& f, double a, double b, std::size_t n) {
  const double h = (b - a) / static_cast<double>(n);
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += f(a + (static_cast<double>(i) + 0.5) * h);
  return acc * h;
}

}  // namespace oracle
