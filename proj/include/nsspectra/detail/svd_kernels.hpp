#pragma once

// Two independent SVD routes:
//  * one_sided_jacobi: Hestenes one-sided Jacobi, full U, S, V. Slow but very
//    accurate; the reference the values-only path is checked against.
//  * golub_kahan_values: Householder bidiagonalization followed by implicitly
//    shifted QR on the bidiagonal, singular values only.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <vector>

#include "nsspectra/detail/kernels.hpp"
#include "nsspectra/errors.hpp"
#include "nsspectra/matrix.hpp"

namespace nsspectra::detail {

struct JacobiOutput {
  std::vector<double> sigma;  // descending
  DenseMatrix u;              // m x n
  DenseMatrix v;              // n x n
};

// Fill rows of `basis` whose norm is zero with unit vectors orthogonal to every
// other row (two passes of classical Gram-Schmidt against e_k candidates).
inline void complete_orthonormal_rows(DenseMatrix& basis, const std::vector<bool>& missing) {
  const std::size_t rows = basis.rows();
  const std::size_t len = basis.cols();
  std::size_t candidate = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (!missing[r]) continue;
    bool placed = false;
    while (!placed && candidate < len) {
      std::vector<double> x(len, 0.0);
      x[candidate++] = 1.0;
      for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t o = 0; o < rows; ++o) {
          if (o == r || (missing[o] && o > r)) continue;
          const double proj = dot(basis.row(o).data(), x.data(), len);
          axpy(-proj, basis.row(o).data(), x.data(), len);
        }
      }
      const double norm = std::sqrt(dot(x.data(), x.data(), len));
      if (norm > 0.5) {
        auto dst = basis.row(r);
        for (std::size_t i = 0; i < len; ++i) dst[i] = x[i] / norm;
        placed = true;
      }
    }
    if (!placed) throw NumericError("svd: could not complete orthonormal basis");
  }
}

inline JacobiOutput one_sided_jacobi(const DenseMatrix& a, int max_sweeps = 80) {
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  if (m < n) throw DimensionError("jacobi svd: expected a tall matrix");

  // Columns of A and V are stored as contiguous rows.
  DenseMatrix w = transpose(a);
  DenseMatrix vt = DenseMatrix::identity(n);
  const double tol = std::sqrt(static_cast<double>(m)) * std::numeric_limits<double>::epsilon();

  bool converged = n < 2;
  for (int sweep = 0; sweep < max_sweeps && !converged; ++sweep) {
    std::size_t rotations = 0;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        double* wp = w.row(p).data();
        double* wq = w.row(q).data();
        const Dot3 d = dot3(wp, wq, m);
        if (d.xx == 0.0 || d.yy == 0.0) continue;
        if (std::abs(d.xy) <= tol * std::sqrt(d.xx) * std::sqrt(d.yy)) continue;
        const double zeta = (d.yy - d.xx) / (2.0 * d.xy);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::hypot(1.0, zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        rotate(wp, wq, m, c, s);
        rotate(vt.row(p).data(), vt.row(q).data(), n, c, s);
        ++rotations;
      }
    }
    converged = rotations == 0;
  }
  if (!converged) {
    throw NumericError("jacobi svd: no convergence after " + std::to_string(max_sweeps) +
                       " sweeps");
  }

  std::vector<double> norms(n);
  for (std::size_t j = 0; j < n; ++j) {
    norms[j] = std::sqrt(dot(w.row(j).data(), w.row(j).data(), m));
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return norms[x] > norms[y]; });

  JacobiOutput out;
  out.sigma.resize(n);
  DenseMatrix ut(n, m);
  DenseMatrix vt_sorted(n, n);
  std::vector<bool> missing(n, false);
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t src = order[j];
    out.sigma[j] = norms[src];
    auto dst = ut.row(j);
    auto col = w.row(src);
    if (norms[src] > 0.0) {
      for (std::size_t i = 0; i < m; ++i) dst[i] = col[i] / norms[src];
    } else {
      missing[j] = true;
    }
    std::copy(vt.row(src).begin(), vt.row(src).end(), vt_sorted.row(j).begin());
  }
  if (std::find(missing.begin(), missing.end(), true) != missing.end()) {
    complete_orthonormal_rows(ut, missing);
  }
  out.u = transpose(ut);
  out.v = transpose(vt_sorted);
  return out;
}

struct HouseholderReflector {
  double beta = 0.0;  // value left in the pivot position
  double tau = 0.0;   // H = I - tau v v^T with v[0] = 1
};

// Overwrites x[1..] with the reflector tail. x[0] is left untouched.
inline HouseholderReflector make_reflector(double* x, std::size_t len) {
  HouseholderReflector h;
  const double alpha = x[0];
  const double xnorm = len > 1 ? std::sqrt(dot(x + 1, x + 1, len - 1)) : 0.0;
  if (xnorm == 0.0) {
    h.beta = alpha;
    return h;
  }
  h.beta = -std::copysign(std::hypot(alpha, xnorm), alpha);
  h.tau = (h.beta - alpha) / h.beta;
  const double scale = 1.0 / (alpha - h.beta);
  for (std::size_t i = 1; i < len; ++i) x[i] *= scale;
  return h;
}

// Implicit-shift QR sweeps on an upper bidiagonal matrix with diagonal `d`
// and superdiagonal `e` (e[i] couples d[i-1] and d[i]; e[0] is ignored).
// On return d holds the singular values (unsorted, non-negative).
inline void bidiagonal_qr(std::vector<double>& d, std::vector<double>& e, int max_iterations = 75) {
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(d.size());
  if (n == 0) return;
  e[0] = 0.0;
  const double eps = std::numeric_limits<double>::epsilon();
  double anorm = 0.0;
  for (std::ptrdiff_t i = 0; i < n; ++i) anorm = std::max(anorm, std::abs(d[i]) + std::abs(e[i]));
  const double small = eps * anorm;

  for (std::ptrdiff_t k = n - 1; k >= 0; --k) {
    for (int its = 0;; ++its) {
      bool cancel = true;
      std::ptrdiff_t l = k;
      for (; l >= 0; --l) {
        if (l == 0 || std::abs(e[l]) <= small) {
          cancel = false;
          break;
        }
        if (std::abs(d[l - 1]) <= small) break;
      }
      if (cancel) {
        // d[l-1] is negligible: chase e[l] off the matrix with left rotations.
        double c = 0.0;
        double s = 1.0;
        for (std::ptrdiff_t i = l; i <= k; ++i) {
          const double f = s * e[i];
          e[i] = c * e[i];
          if (std::abs(f) <= small) break;
          const double g = d[i];
          const double h = std::hypot(f, g);
          d[i] = h;
          c = g / h;
          s = -f / h;
        }
      }
      double z = d[k];
      if (l == k) {
        if (z < 0.0) d[k] = -z;
        break;
      }
      if (its >= max_iterations) {
        throw NumericError("bidiagonal qr: no convergence for singular value " +
                           std::to_string(k));
      }
      // Wilkinson-style shift from the trailing 2x2 block.
      double x = d[l];
      const std::ptrdiff_t nm = k - 1;
      double y = d[nm];
      double g = e[nm];
      double h = e[k];
      double f = ((y - z) * (y + z) + (g - h) * (g + h)) / (2.0 * h * y);
      g = std::hypot(f, 1.0);
      f = ((x - z) * (x + z) + h * ((y / (f + std::copysign(g, f))) - h)) / x;

      double c = 1.0;
      double s = 1.0;
      for (std::ptrdiff_t j = l; j <= nm; ++j) {
        const std::ptrdiff_t i = j + 1;
        g = e[i];
        y = d[i];
        h = s * g;
        g = c * g;
        z = std::hypot(f, h);
        e[j] = z;
        if (z != 0.0) {
          c = f / z;
          s = h / z;
        } else {
          c = 1.0;
          s = 0.0;
        }
        f = x * c + g * s;
        g = g * c - x * s;
        h = y * s;
        y *= c;
        z = std::hypot(f, h);
        d[j] = z;
        if (z != 0.0) {
          c = f / z;
          s = h / z;
        }
        f = c * g + s * y;
        x = c * y - s * g;
      }
      e[l] = 0.0;
      e[k] = f;
      d[k] = x;
    }
  }
}

/// Singular values of a tall matrix, descending.
inline std::vector<double> golub_kahan_values(DenseMatrix a) {
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  if (m < n) throw DimensionError("golub-kahan: expected a tall matrix");
  std::vector<double> diag(n, 0.0);
  std::vector<double> super(n, 0.0);  // super[k+1] couples diag[k], diag[k+1]
  std::vector<double> col(m);
  std::vector<double> w(n);

  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t len = m - k;
    const std::size_t width = n - k - 1;
    for (std::size_t i = 0; i < len; ++i) col[i] = a(k + i, k);
    const HouseholderReflector left = make_reflector(col.data(), len);
    diag[k] = left.beta;
    col[0] = 1.0;

    if (width == 0) continue;

    // w = v^T A[k:, k+1:]
    std::fill(w.begin(), w.begin() + static_cast<std::ptrdiff_t>(width), 0.0);
    if (left.tau != 0.0) {
      for (std::size_t i = 0; i < len; ++i) axpy(col[i], &a(k + i, k + 1), w.data(), width);
    }

    // Row k first: it defines the right reflector used on the rows below.
    double* pivot_row = &a(k, k + 1);
    if (left.tau != 0.0) axpy(-left.tau * col[0], w.data(), pivot_row, width);
    const HouseholderReflector right = make_reflector(pivot_row, width);
    super[k + 1] = right.beta;
    pivot_row[0] = 1.0;

    for (std::size_t i = 1; i < len; ++i) {
      double* r = &a(k + i, k + 1);
      if (left.tau != 0.0) axpy(-left.tau * col[i], w.data(), r, width);
      if (right.tau != 0.0) {
        const double proj = dot(r, pivot_row, width);
        axpy(-right.tau * proj, pivot_row, r, width);
      }
    }
  }

  bidiagonal_qr(diag, super);
  std::sort(diag.begin(), diag.end(), std::greater<>());
  return diag;
}

}  // namespace nsspectra::detail
