#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "nsspectra/dense_linalg.hpp"
#include "nsspectra/errors.hpp"

namespace nsspectra {

/// Marchenko-Pastur singular-value law for aspect ratio gamma = out_d / in_d
/// and scale sigma_bar. Support is [|1 - sqrt(gamma)|, 1 + sqrt(gamma)] * sigma_bar.
class MpParams {
 public:
  explicit MpParams(double gamma, double sigma_bar = 1.0) : gamma_(gamma), sigma_bar_(sigma_bar) {
    if (!(gamma > 0.0 && gamma <= 1.0)) {
      throw ConfigError("mp: gamma must lie in (0, 1], got " + std::to_string(gamma));
    }
    if (!(sigma_bar > 0.0) || !std::isfinite(sigma_bar)) {
      throw ConfigError("mp: sigma_bar must be finite and > 0, got " + std::to_string(sigma_bar));
    }
  }

  double gamma() const noexcept { return gamma_; }
  double sigma_bar() const noexcept { return sigma_bar_; }
  double lower_edge() const noexcept { return std::abs(1.0 - std::sqrt(gamma_)) * sigma_bar_; }
  double upper_edge() const noexcept { return (1.0 + std::sqrt(gamma_)) * sigma_bar_; }

 private:
  double gamma_;
  double sigma_bar_;
};

/// Sorted (ascending) finite sample.
class EmpiricalDistribution {
 public:
  explicit EmpiricalDistribution(std::vector<double> values) : values_(std::move(values)) {
    for (double v : values_) {
      if (!std::isfinite(v)) throw NumericError("empirical distribution: non-finite sample");
    }
    std::sort(values_.begin(), values_.end());
  }

  explicit EmpiricalDistribution(const Spectrum& s)
      : EmpiricalDistribution(std::vector<double>(s.values().begin(), s.values().end())) {}

  std::span<const double> values() const noexcept { return values_; }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

 private:
  std::vector<double> values_;
};

/// sqrt(((1+sqrt(g))^2 - s^2)(s^2 - (1-sqrt(g))^2)) / (2 pi g s), scaled as
/// (1/sigma_bar) rho(s / sigma_bar). Zero outside the support and at the edges,
/// except at s = 0 for gamma = 1 where the limit 1/(pi sigma_bar) is returned.
///
/// The expression carries total mass 1/2 over the support, not 1; mp_cdf
/// divides by the integrated mass.
inline double mp_density(double s, const MpParams& p) {
  const double x = s / p.sigma_bar();
  const double root = std::sqrt(p.gamma());
  const double lo = std::abs(1.0 - root);
  const double hi = 1.0 + root;
  if (!(x >= lo && x < hi)) return 0.0;
  if (p.gamma() == 1.0) {
    // The s^2 factor of the radicand cancels the s in the denominator.
    return std::sqrt(4.0 - x * x) / (2.0 * std::numbers::pi) / p.sigma_bar();
  }
  if (x == lo) return 0.0;
  const double radicand = (hi * hi - x * x) * (x * x - lo * lo);
  return std::sqrt(std::max(radicand, 0.0)) / (2.0 * std::numbers::pi * p.gamma() * x) /
         p.sigma_bar();
}

namespace detail {

// Integral of the density from the lower edge to s, using
// s = lo + (hi - lo)(1 - cos t)/2 to absorb the square-root edges.
inline double mp_partial_integral(double s, const MpParams& p) {
  const double lo = p.lower_edge();
  const double hi = p.upper_edge();
  if (s <= lo) return 0.0;
  const double half_width = 0.5 * (hi - lo);
  const double t_end =
      s >= hi ? std::numbers::pi : std::acos(std::clamp(1.0 - (s - lo) / half_width, -1.0, 1.0));
  auto integrand = [&](double t) {
    return mp_density(lo + half_width * (1.0 - std::cos(t)), p) * half_width * std::sin(t);
  };
  return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(integrand, 0.0, t_end, 15,
                                                                         1e-13);
}

}  // namespace detail

/// Integral of mp_density over the whole support (analytically 1/2).
inline double mp_mass(const MpParams& p) {
  return detail::mp_partial_integral(p.upper_edge(), p);
}

/// Distribution function: running integral of the density divided by its mass.
inline double mp_cdf(double s, const MpParams& p) {
  if (s <= p.lower_edge()) return 0.0;
  if (s >= p.upper_edge()) return 1.0;
  return std::clamp(detail::mp_partial_integral(s, p) / mp_mass(p), 0.0, 1.0);
}

/// Inverse of mp_cdf by bisection, to 1e-10 in s.
inline double mp_quantile(double q, const MpParams& p) {
  if (!(q >= 0.0 && q <= 1.0)) {
    throw ConfigError("mp_quantile: q must lie in [0, 1], got " + std::to_string(q));
  }
  double lo = p.lower_edge();
  double hi = p.upper_edge();
  if (q == 0.0) return lo;
  if (q == 1.0) return hi;
  const double mass = mp_mass(p);
  while (hi - lo > 1e-10) {
    const double mid = 0.5 * (lo + hi);
    if (detail::mp_partial_integral(mid, p) / mass < q) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

/// sup |F_n - F| over the sample points.
inline double ks_statistic(const EmpiricalDistribution& sample, const MpParams& p) {
  if (sample.empty()) throw ConfigError("ks_statistic: empty sample");
  const auto xs = sample.values();
  const double n = static_cast<double>(xs.size());
  const double mass = mp_mass(p);
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    double f;
    if (xs[i] <= p.lower_edge()) {
      f = 0.0;
    } else if (xs[i] >= p.upper_edge()) {
      f = 1.0;
    } else {
      f = std::clamp(detail::mp_partial_integral(xs[i], p) / mass, 0.0, 1.0);
    }
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

/// Two-sample statistic sup |F_a - F_b|.
inline double ks_statistic(const EmpiricalDistribution& a, const EmpiricalDistribution& b) {
  if (a.empty() || b.empty()) throw ConfigError("ks_statistic: empty sample");
  const auto xa = a.values();
  const auto xb = b.values();
  const double na = static_cast<double>(xa.size());
  const double nb = static_cast<double>(xb.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double d = 0.0;
  while (i < xa.size() && j < xb.size()) {
    const double x = std::min(xa[i], xb[j]);
    while (i < xa.size() && xa[i] == x) ++i;
    while (j < xb.size() && xb[j] == x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

}  // namespace nsspectra
