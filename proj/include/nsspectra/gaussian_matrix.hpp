#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>

#include "nsspectra/errors.hpp"
#include "nsspectra/matrix.hpp"

namespace nsspectra {

/// i.i.d. N(0, variance) matrix recipe. Identical specs give bit-identical
/// matrices wherever the C++ standard library and libm agree.
struct GaussianSpec {
  Shape shape;
  double variance = 1.0;
  std::uint64_t seed = 0;
};

/// SplitMix64 finalizer: a bijective 64-bit avalanche mix.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed for one (size, trial) cell of an experiment. Pure and order-free, so
/// trials can be scheduled on any worker. For a fixed master seed distinct
/// (size_index, trial_index) pairs always give distinct seeds: the packed
/// 64-bit key goes through a bijection.
constexpr std::uint64_t derive_trial_seed(std::uint64_t master_seed, std::uint32_t size_index,
                                          std::uint32_t trial_index) noexcept {
  const std::uint64_t key = (std::uint64_t{size_index} << 32) | std::uint64_t{trial_index};
  return mix64(mix64(master_seed) ^ key);
}

namespace detail {

// 53-bit uniform in (0, 1].
inline double open_closed_uniform(std::mt19937_64& engine) {
  return static_cast<double>((engine() >> 11) + 1) * 0x1.0p-53;
}

// 53-bit uniform in [0, 1).
inline double closed_open_uniform(std::mt19937_64& engine) {
  return static_cast<double>(engine() >> 11) * 0x1.0p-53;
}

}  // namespace detail

/// Box-Muller over mt19937_64: each pair of entries (2j, 2j+1) consumes two
/// engine outputs u1 in (0,1], u2 in [0,1) and receives
/// r*cos(2*pi*u2), r*sin(2*pi*u2) with r = sqrt(-2 ln u1).
inline DenseMatrix generate(const GaussianSpec& spec) {
  if (!(spec.variance > 0.0) || !std::isfinite(spec.variance)) {
    throw ConfigError("gaussian: variance must be finite and > 0, got " +
                      std::to_string(spec.variance));
  }
  DenseMatrix m(spec.shape.in_d(), spec.shape.out_d());
  std::mt19937_64 engine(spec.seed);
  const double sigma = std::sqrt(spec.variance);
  auto entries = m.entries();
  const std::size_t n = entries.size();
  for (std::size_t i = 0; i < n; i += 2) {
    const double u1 = detail::open_closed_uniform(engine);
    const double u2 = detail::closed_open_uniform(engine);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    entries[i] = sigma * r * std::cos(theta);
    if (i + 1 < n) entries[i + 1] = sigma * r * std::sin(theta);
  }
  return m;
}

}  // namespace nsspectra
