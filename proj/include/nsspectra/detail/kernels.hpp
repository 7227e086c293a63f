#pragma once

// Low-level double-precision kernels: a packed register-blocked GEMM and
// vectorized dot/axpy helpers. Relies on the GCC/Clang vector extension; the
// compiler lowers 8-lane vectors to whatever the target ISA provides.

#include <algorithm>
#include <cstddef>
#include <cstring>
#include <vector>

namespace nsspectra::detail {

using vec8 = double __attribute__((vector_size(64)));

inline vec8 load8(const double* p) noexcept {
  vec8 v;
  std::memcpy(&v, p, sizeof(v));
  return v;
}

inline void store8(double* p, vec8 v) noexcept { std::memcpy(p, &v, sizeof(v)); }

inline double hsum(vec8 v) noexcept {
  return ((v[0] + v[4]) + (v[1] + v[5])) + ((v[2] + v[6]) + (v[3] + v[7]));
}

inline double dot(const double* x, const double* y, std::size_t n) noexcept {
  vec8 acc0{}, acc1{};
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    acc0 += load8(x + i) * load8(y + i);
    acc1 += load8(x + i + 8) * load8(y + i + 8);
  }
  double tail = 0.0;
  for (; i < n; ++i) tail += x[i] * y[i];
  return hsum(acc0 + acc1) + tail;
}

/// y += alpha * x
inline void axpy(double alpha, const double* x, double* y, std::size_t n) noexcept {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) store8(y + i, load8(y + i) + alpha * load8(x + i));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

struct Dot3 {
  double xx, yy, xy;
};

/// (x.x, y.y, x.y) in one pass.
inline Dot3 dot3(const double* x, const double* y, std::size_t n) noexcept {
  vec8 xx{}, yy{}, xy{};
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const vec8 a = load8(x + i);
    const vec8 b = load8(y + i);
    xx += a * a;
    yy += b * b;
    xy += a * b;
  }
  Dot3 r{hsum(xx), hsum(yy), hsum(xy)};
  for (; i < n; ++i) {
    r.xx += x[i] * x[i];
    r.yy += y[i] * y[i];
    r.xy += x[i] * y[i];
  }
  return r;
}

/// Plane rotation of two vectors: x <- c x - s y, y <- s x + c y.
inline void rotate(double* x, double* y, std::size_t n, double c, double s) noexcept {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const vec8 a = load8(x + i);
    const vec8 b = load8(y + i);
    store8(x + i, c * a - s * b);
    store8(y + i, s * a + c * b);
  }
  for (; i < n; ++i) {
    const double a = x[i];
    const double b = y[i];
    x[i] = c * a - s * b;
    y[i] = s * a + c * b;
  }
}

// GEMM blocking: 6x16 register tile, 256-deep k panels, 96-row A blocks.
inline constexpr std::size_t kMr = 6;
inline constexpr std::size_t kNr = 16;
inline constexpr std::size_t kKc = 256;
inline constexpr std::size_t kMc = 96;

// ap: kc x kMr (k-major), bp: kc x kNr (k-major). Accumulates into tile.
inline void micro_kernel(const double* ap, const double* bp, std::size_t kc,
                         double* tile) noexcept {
  vec8 c00{}, c01{}, c10{}, c11{}, c20{}, c21{}, c30{}, c31{}, c40{}, c41{}, c50{}, c51{};
  for (std::size_t k = 0; k < kc; ++k) {
    const vec8 b0 = load8(bp);
    const vec8 b1 = load8(bp + 8);
    const double a0 = ap[0], a1 = ap[1], a2 = ap[2], a3 = ap[3], a4 = ap[4], a5 = ap[5];
    c00 += a0 * b0;
    c01 += a0 * b1;
    c10 += a1 * b0;
    c11 += a1 * b1;
    c20 += a2 * b0;
    c21 += a2 * b1;
    c30 += a3 * b0;
    c31 += a3 * b1;
    c40 += a4 * b0;
    c41 += a4 * b1;
    c50 += a5 * b0;
    c51 += a5 * b1;
    ap += kMr;
    bp += kNr;
  }
  store8(tile + 0 * kNr, c00);
  store8(tile + 0 * kNr + 8, c01);
  store8(tile + 1 * kNr, c10);
  store8(tile + 1 * kNr + 8, c11);
  store8(tile + 2 * kNr, c20);
  store8(tile + 2 * kNr + 8, c21);
  store8(tile + 3 * kNr, c30);
  store8(tile + 3 * kNr + 8, c31);
  store8(tile + 4 * kNr, c40);
  store8(tile + 4 * kNr + 8, c41);
  store8(tile + 5 * kNr, c50);
  store8(tile + 5 * kNr + 8, c51);
}

/// C (m x n) = A (m x k) * B (k x n); all row-major and contiguous.
inline void gemm(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
                 double* c) {
  std::fill(c, c + m * n, 0.0);
  if (m == 0 || n == 0 || k == 0) return;

  const std::size_t n_panels = (n + kNr - 1) / kNr;
  std::vector<double> bpack(kKc * n_panels * kNr);
  std::vector<double> apack(kKc * kMc);
  alignas(64) double tile[kMr * kNr];

  for (std::size_t k0 = 0; k0 < k; k0 += kKc) {
    const std::size_t kc = std::min(kKc, k - k0);

    for (std::size_t p = 0; p < n_panels; ++p) {
      double* dst = bpack.data() + p * kc * kNr;
      const std::size_t j0 = p * kNr;
      const std::size_t width = std::min(kNr, n - j0);
      for (std::size_t kk = 0; kk < kc; ++kk) {
        const double* src = b + (k0 + kk) * n + j0;
        double* row = dst + kk * kNr;
        std::copy(src, src + width, row);
        std::fill(row + width, row + kNr, 0.0);
      }
    }

    for (std::size_t i0 = 0; i0 < m; i0 += kMc) {
      const std::size_t mc = std::min(kMc, m - i0);
      const std::size_t m_tiles = (mc + kMr - 1) / kMr;
      for (std::size_t t = 0; t < m_tiles; ++t) {
        double* dst = apack.data() + t * kc * kMr;
        for (std::size_t kk = 0; kk < kc; ++kk) {
          for (std::size_t r = 0; r < kMr; ++r) {
            const std::size_t i = t * kMr + r;
            dst[kk * kMr + r] = i < mc ? a[(i0 + i) * k + k0 + kk] : 0.0;
          }
        }
      }

      for (std::size_t p = 0; p < n_panels; ++p) {
        const std::size_t j0 = p * kNr;
        const std::size_t width = std::min(kNr, n - j0);
        for (std::size_t t = 0; t < m_tiles; ++t) {
          const std::size_t rows = std::min(kMr, mc - t * kMr);
          micro_kernel(apack.data() + t * kc * kMr, bpack.data() + p * kc * kNr, kc, tile);
          for (std::size_t r = 0; r < rows; ++r) {
            double* out = c + (i0 + t * kMr + r) * n + j0;
            const double* in = tile + r * kNr;
            for (std::size_t w = 0; w < width; ++w) out[w] += in[w];
          }
        }
      }
    }
  }
}

}  // namespace nsspectra::detail
