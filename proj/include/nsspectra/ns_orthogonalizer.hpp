#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "nsspectra/dense_linalg.hpp"
#include "nsspectra/errors.hpp"
#include "nsspectra/matrix.hpp"

namespace nsspectra {

/// Constants of the odd quintic p(s) = a s + b s^3 + c s^5.
struct NsCoefficients {
  double a = 1.0;
  double b = 0.0;
  double c = 0.0;

  /// The triple used by the Muon reference implementation.
  static constexpr NsCoefficients muon_default() noexcept { return {3.4445, -4.7750, 2.0315}; }
  static constexpr NsCoefficients identity() noexcept { return {1.0, 0.0, 0.0}; }

  bool finite() const noexcept {
    return std::isfinite(a) && std::isfinite(b) && std::isfinite(c);
  }

  friend bool operator==(const NsCoefficients&, const NsCoefficients&) = default;
};

/// Coefficients per iteration. A single triple is reused for every step.
class NsSchedule {
 public:
  NsSchedule(std::vector<NsCoefficients> coefficients, int iterations)
      : coefficients_(std::move(coefficients)), iterations_(iterations) {
    if (iterations_ < 1) {
      throw ConfigError("schedule: iterations must be >= 1, got " + std::to_string(iterations_));
    }
    if (coefficients_.size() != 1 && coefficients_.size() != static_cast<std::size_t>(iterations_)) {
      throw ConfigError("schedule: coefficient list must have length 1 or " +
                        std::to_string(iterations_) + ", got " +
                        std::to_string(coefficients_.size()));
    }
    for (const auto& k : coefficients_) {
      if (!k.finite()) throw ConfigError("schedule: coefficients must be finite");
    }
  }

  NsSchedule(NsCoefficients k, int iterations) : NsSchedule(std::vector{k}, iterations) {}

  static NsSchedule muon_default() { return NsSchedule(NsCoefficients::muon_default(), 5); }

  int iterations() const noexcept { return iterations_; }
  const std::vector<NsCoefficients>& coefficients() const noexcept { return coefficients_; }

  /// Coefficients applied at step `step` (0-based).
  const NsCoefficients& at(int step) const noexcept {
    return coefficients_.size() == 1 ? coefficients_.front()
                                     : coefficients_[static_cast<std::size_t>(step)];
  }

  friend bool operator==(const NsSchedule&, const NsSchedule&) = default;

 private:
  std::vector<NsCoefficients> coefficients_;
  int iterations_;
};

struct IterationRecord {
  int iteration = 0;
  Spectrum spectrum;
  double orthogonality_residual = 0.0;
  double min_sval = 0.0;
  double max_sval = 0.0;
  double median_sval = 0.0;
  double tail_fraction = 0.0;
};

/// One record per step; index 0 is the Frobenius-normalized input.
struct IterationTrace {
  double tail_threshold = 0.6;
  std::vector<IterationRecord> records;
};

inline double scalar_polynomial(double s, const NsCoefficients& k) noexcept {
  const double s2 = s * s;
  return s * (k.a + s2 * (k.b + s2 * k.c));
}

/// [s, p1(s), p2(p1(s)), ...], length iterations + 1.
inline std::vector<double> scalar_iterate(double s, const NsSchedule& schedule) {
  std::vector<double> trajectory;
  trajectory.reserve(static_cast<std::size_t>(schedule.iterations()) + 1);
  trajectory.push_back(s);
  for (int t = 0; t < schedule.iterations(); ++t) {
    s = scalar_polynomial(s, schedule.at(t));
    trajectory.push_back(s);
  }
  return trajectory;
}

/// One Newton-Schulz step G' = a G + b (G G^T) G + c (G G^T)^2 G.
///
/// Evaluated through the out_d x out_d Gram matrix M = G^T G as
/// G' = a G + G (b M + c M M), which is the same polynomial and costs three
/// products of the small dimension instead of five of the large one.
inline DenseMatrix ns_step(const DenseMatrix& g, const NsCoefficients& k) {
  if (!g.is_tall()) throw DimensionError("ns_step: expected in_d >= out_d");
  const DenseMatrix m = gram(g);
  const DenseMatrix mm = matmul(m, m);
  DenseMatrix poly(m.rows(), m.cols());
  auto pv = poly.entries();
  auto mv = m.entries();
  auto mmv = mm.entries();
  for (std::size_t i = 0; i < pv.size(); ++i) pv[i] = k.b * mv[i] + k.c * mmv[i];
  DenseMatrix out = matmul(g, poly);
  auto ov = out.entries();
  auto gv = g.entries();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = k.a * gv[i] + ov[i];
  return out;
}

namespace detail {

inline IterationRecord make_record(int iteration, const DenseMatrix& g, double threshold) {
  Spectrum s = singular_values(g);
  IterationRecord r{iteration, s};
  r.orthogonality_residual = orthogonality_residual(s);
  r.min_sval = s.min();
  r.max_sval = s.max();
  r.median_sval = s.median();
  r.tail_fraction = s.fraction_below(threshold);
  return r;
}

}  // namespace detail

struct NsRunResult {
  DenseMatrix output;
  IterationTrace trace;
};

/// Normalizes g by its Frobenius norm, then applies the schedule, recording
/// the spectrum and its metrics before the first step and after every step.
inline NsRunResult ns_run(const DenseMatrix& g, const NsSchedule& schedule, double tail_threshold) {
  if (!(tail_threshold > 0.0 && tail_threshold < 1.0)) {
    throw ConfigError("ns_run: tail threshold must lie in (0, 1), got " +
                      std::to_string(tail_threshold));
  }
  if (!g.is_tall()) throw DimensionError("ns_run: expected in_d >= out_d");
  NsRunResult result{normalize_frobenius(g), IterationTrace{tail_threshold, {}}};
  auto& records = result.trace.records;
  records.reserve(static_cast<std::size_t>(schedule.iterations()) + 1);
  records.push_back(detail::make_record(0, result.output, tail_threshold));
  for (int t = 0; t < schedule.iterations(); ++t) {
    result.output = ns_step(result.output, schedule.at(t));
    if (!result.output.all_finite()) {
      throw NumericError("ns_run: iterate became non-finite at step " + std::to_string(t + 1));
    }
    records.push_back(detail::make_record(t + 1, result.output, tail_threshold));
  }
  return result;
}

}  // namespace nsspectra
