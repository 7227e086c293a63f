#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nsspectra/dense_linalg.hpp"
#include "nsspectra/detail/parallel.hpp"
#include "nsspectra/errors.hpp"
#include "nsspectra/gaussian_matrix.hpp"
#include "nsspectra/matrix.hpp"
#include "nsspectra/ns_orthogonalizer.hpp"

namespace nsspectra {

struct SweepConfig {
  std::vector<std::size_t> sizes{64, 128, 256, 512, 1024};
  double gamma = 1.0;  // out_d = round(gamma * in_d)
  std::size_t trials_per_size = 32;
  NsSchedule schedule = NsSchedule::muon_default();
  double tail_threshold = 0.6;
  std::uint64_t master_seed = 1;

  void validate() const {
    if (sizes.empty()) throw ConfigError("sizes: must not be empty");
    for (std::size_t i = 0; i < sizes.size(); ++i) {
      if (sizes[i] < 8) {
        throw ConfigError("sizes: every size must be >= 8, got " + std::to_string(sizes[i]));
      }
      if (i > 0 && sizes[i] <= sizes[i - 1]) {
        throw ConfigError("sizes: must be strictly increasing");
      }
    }
    if (sizes.size() > std::numeric_limits<std::uint32_t>::max()) {
      throw ConfigError("sizes: too many entries");
    }
    if (!(gamma > 0.0 && gamma <= 1.0)) {
      throw ConfigError("gamma: must lie in (0, 1], got " + std::to_string(gamma));
    }
    if (trials_per_size < 1 || trials_per_size > std::numeric_limits<std::uint32_t>::max()) {
      throw ConfigError("trials_per_size: must be >= 1");
    }
    if (!(tail_threshold > 0.0 && tail_threshold < 1.0)) {
      throw ConfigError("tail_threshold: must lie in (0, 1), got " +
                        std::to_string(tail_threshold));
    }
  }

  Shape shape_for(std::size_t in_d) const {
    const auto out_d = static_cast<std::size_t>(std::llround(gamma * static_cast<double>(in_d)));
    return Shape(in_d, std::max<std::size_t>(out_d, 1));
  }
};

/// Spectrum metrics at one iteration of one trial.
struct IterationStats {
  double tail_fraction = 0.0;
  double orthogonality_residual = 0.0;
  double median_sval = 0.0;
  double min_sval = 0.0;
  double max_sval = 0.0;
};

struct TrialCell {
  std::size_t in_d = 0;
  std::size_t out_d = 0;
  std::size_t trial = 0;
  std::uint64_t seed = 0;
  double raw_frobenius_norm = 0.0;       // before normalization
  std::vector<double> initial_spectrum;  // normalized input, descending
  std::vector<IterationStats> iterations;  // iterations + 1 entries
};

struct Moments {
  double mean = 0.0;
  double stddev = 0.0;  // sample (n - 1) standard deviation, 0 for one value

  friend bool operator==(const Moments&, const Moments&) = default;
};

struct SizeAggregate {
  std::size_t in_d = 0;
  std::size_t out_d = 0;
  std::size_t trials = 0;
  double pooled_median_sval = 0.0;
  Moments raw_frobenius_norm;
  Moments median_sval;  // pre-iteration
  Moments min_sval;     // pre-iteration
  Moments max_sval;     // pre-iteration
  std::vector<Moments> tail_fraction;           // per iteration
  std::vector<Moments> orthogonality_residual;  // per iteration

  friend bool operator==(const SizeAggregate&, const SizeAggregate&) = default;
};

/// Cells ordered by (size, trial) plus per-size aggregates.
struct SweepResult {
  SweepConfig config;
  std::vector<TrialCell> cells;
  std::vector<SizeAggregate> aggregates;
};

struct PowerLawPoint {
  double x = 0.0;
  double y = 0.0;
};

/// Least squares line through (ln x, ln y): y ~ exp(intercept) * x^slope.
struct FitResult {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  std::size_t points_used = 0;
};

inline Moments moments(std::span<const double> xs) {
  Moments m;
  if (xs.empty()) return m;
  double sum = 0.0;
  for (double x : xs) sum += x;
  m.mean = sum / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - m.mean) * (x - m.mean);
    m.stddev = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return m;
}

/// Median of an unsorted sample (mean of the middle pair for even counts).
inline double median_of(std::vector<double> xs) {
  if (xs.empty()) throw ConfigError("median: empty sample");
  const std::size_t n = xs.size();
  auto mid = xs.begin() + static_cast<std::ptrdiff_t>(n / 2);
  std::nth_element(xs.begin(), mid, xs.end());
  const double upper = *mid;
  if (n % 2 == 1) return upper;
  const double lower = *std::max_element(xs.begin(), mid);
  return 0.5 * (lower + upper);
}

/// Recomputes per-size aggregates from cells. Cells for one size must be
/// contiguous; sizes appear in first-seen order.
inline std::vector<SizeAggregate> aggregate_cells(std::span<const TrialCell> cells) {
  std::vector<SizeAggregate> out;
  std::size_t begin = 0;
  while (begin < cells.size()) {
    std::size_t end = begin;
    while (end < cells.size() && cells[end].in_d == cells[begin].in_d) ++end;
    const auto group = cells.subspan(begin, end - begin);

    SizeAggregate agg;
    agg.in_d = group.front().in_d;
    agg.out_d = group.front().out_d;
    agg.trials = group.size();

    std::vector<double> pooled;
    std::vector<double> fro, med, mn, mx;
    for (const auto& c : group) {
      pooled.insert(pooled.end(), c.initial_spectrum.begin(), c.initial_spectrum.end());
      fro.push_back(c.raw_frobenius_norm);
      med.push_back(c.iterations.front().median_sval);
      mn.push_back(c.iterations.front().min_sval);
      mx.push_back(c.iterations.front().max_sval);
    }
    agg.pooled_median_sval = median_of(std::move(pooled));
    agg.raw_frobenius_norm = moments(fro);
    agg.median_sval = moments(med);
    agg.min_sval = moments(mn);
    agg.max_sval = moments(mx);

    const std::size_t steps = group.front().iterations.size();
    for (std::size_t t = 0; t < steps; ++t) {
      std::vector<double> tail, resid;
      for (const auto& c : group) {
        if (c.iterations.size() != steps) {
          throw DimensionError("aggregate: trials of one size have different iteration counts");
        }
        tail.push_back(c.iterations[t].tail_fraction);
        resid.push_back(c.iterations[t].orthogonality_residual);
      }
      agg.tail_fraction.push_back(moments(tail));
      agg.orthogonality_residual.push_back(moments(resid));
    }
    out.push_back(std::move(agg));
    begin = end;
  }
  return out;
}

/// True when every (size, trial) cell is present and stored aggregates match
/// a fresh recomputation.
inline bool aggregates_consistent(const SweepResult& result) {
  const auto& cfg = result.config;
  if (result.cells.size() != cfg.sizes.size() * cfg.trials_per_size) return false;
  for (std::size_t s = 0; s < cfg.sizes.size(); ++s) {
    for (std::size_t t = 0; t < cfg.trials_per_size; ++t) {
      const auto& c = result.cells[s * cfg.trials_per_size + t];
      if (c.in_d != cfg.sizes[s] || c.trial != t) return false;
      if (c.iterations.size() != static_cast<std::size_t>(cfg.schedule.iterations()) + 1) {
        return false;
      }
    }
  }
  return aggregate_cells(result.cells) == result.aggregates;
}

inline TrialCell run_trial(const SweepConfig& config, std::size_t size_index, std::size_t trial) {
  const Shape shape = config.shape_for(config.sizes[size_index]);
  TrialCell cell;
  cell.in_d = shape.in_d();
  cell.out_d = shape.out_d();
  cell.trial = trial;
  cell.seed = derive_trial_seed(config.master_seed, static_cast<std::uint32_t>(size_index),
                                static_cast<std::uint32_t>(trial));
  const DenseMatrix raw = generate(GaussianSpec{shape, 1.0, cell.seed});
  cell.raw_frobenius_norm = frobenius_norm(raw);
  const NsRunResult run = ns_run(raw, config.schedule, config.tail_threshold);
  const auto& first = run.trace.records.front().spectrum.values();
  cell.initial_spectrum.assign(first.begin(), first.end());
  for (const auto& r : run.trace.records) {
    cell.iterations.push_back(
        {r.tail_fraction, r.orthogonality_residual, r.median_sval, r.min_sval, r.max_sval});
  }
  return cell;
}

/// Generates, normalizes and iterates every (size, trial) cell. The result
/// depends only on the config: each cell's seed comes from
/// derive_trial_seed and cells are stored by index, not completion order.
inline SweepResult run_sweep(const SweepConfig& config, std::size_t threads = 1) {
  config.validate();
  SweepResult result{config, {}, {}};
  const std::size_t trials = config.trials_per_size;
  const std::size_t total = config.sizes.size() * trials;
  result.cells.resize(total);
  // Largest matrices first so the pool does not finish on one long task.
  detail::parallel_for(total, threads, [&](std::size_t task) {
    const std::size_t index = total - 1 - task;
    result.cells[index] = run_trial(config, index / trials, index % trials);
  });
  result.aggregates = aggregate_cells(result.cells);
  return result;
}

/// Per size: median of the pooled pre-iteration singular values of all trials.
inline std::vector<PowerLawPoint> median_sval_per_size(const SweepResult& result) {
  if (result.cells.empty()) throw ConfigError("median_sval_per_size: empty result");
  std::vector<PowerLawPoint> out;
  std::size_t begin = 0;
  while (begin < result.cells.size()) {
    const std::size_t in_d = result.cells[begin].in_d;
    std::vector<double> pooled;
    std::size_t end = begin;
    for (; end < result.cells.size() && result.cells[end].in_d == in_d; ++end) {
      const auto& s = result.cells[end].initial_spectrum;
      pooled.insert(pooled.end(), s.begin(), s.end());
    }
    out.push_back({static_cast<double>(in_d), median_of(std::move(pooled))});
    begin = end;
  }
  return out;
}

inline FitResult fit_power_law(std::span<const PowerLawPoint> points) {
  if (points.size() < 2) throw ConfigError("fit_power_law: need at least 2 points");
  const double n = static_cast<double>(points.size());
  double mx = 0.0;
  double my = 0.0;
  for (const auto& p : points) {
    if (!(p.x > 0.0) || !(p.y > 0.0) || !std::isfinite(p.x) || !std::isfinite(p.y)) {
      throw ConfigError("fit_power_law: x and y must be finite and > 0");
    }
    mx += std::log(p.x);
    my += std::log(p.y);
  }
  mx /= n;
  my /= n;
  double sxx = 0.0;
  double sxy = 0.0;
  double syy = 0.0;
  for (const auto& p : points) {
    const double dx = std::log(p.x) - mx;
    const double dy = std::log(p.y) - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (sxx == 0.0) throw ConfigError("fit_power_law: all x values are equal");
  FitResult fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.points_used = points.size();
  if (syy == 0.0) {
    fit.r_squared = 1.0;
  } else {
    double ss_res = 0.0;
    for (const auto& p : points) {
      const double r = std::log(p.y) - (fit.intercept + fit.slope * std::log(p.x));
      ss_res += r * r;
    }
    fit.r_squared = std::clamp(1.0 - ss_res / syy, 0.0, 1.0);
  }
  return fit;
}

struct BandSearch {
  double epsilon = 0.35;
  double quantile = 0.99;
  int max_iterations = 30;
  std::size_t trials = 4;

  void validate() const {
    if (!(epsilon > 0.0 && epsilon < 1.0)) {
      throw ConfigError("epsilon: must lie in (0, 1), got " + std::to_string(epsilon));
    }
    if (!(quantile > 0.0 && quantile <= 1.0)) {
      throw ConfigError("quantile: must lie in (0, 1], got " + std::to_string(quantile));
    }
    if (max_iterations < 1) throw ConfigError("max_iters: must be >= 1");
    if (trials < 1) throw ConfigError("trials: must be >= 1");
  }
};

/// Smallest iteration count t <= max_iterations at which, averaged over the
/// inputs, at least `quantile` of the singular values of the iterate lie in
/// [1 - epsilon, 1 + epsilon]. Inputs are Frobenius-normalized first, so
/// t = 0 is possible. nullopt means the band was never reached.
inline std::optional<int> min_iterations_for_band(std::span<const DenseMatrix> inputs,
                                                  const NsCoefficients& k,
                                                  const BandSearch& search) {
  search.validate();
  if (inputs.empty()) throw ConfigError("min_iterations_for_band: no inputs");
  std::vector<DenseMatrix> iterates;
  iterates.reserve(inputs.size());
  for (const auto& g : inputs) {
    if (!g.is_tall()) throw DimensionError("min_iterations_for_band: expected in_d >= out_d");
    iterates.push_back(normalize_frobenius(g));
  }
  const double lo = 1.0 - search.epsilon;
  const double hi = 1.0 + search.epsilon;
  for (int t = 0;; ++t) {
    double mean_inside = 0.0;
    for (const auto& g : iterates) mean_inside += singular_values(g).fraction_within(lo, hi);
    mean_inside /= static_cast<double>(iterates.size());
    if (mean_inside >= search.quantile) return t;
    if (t == search.max_iterations) return std::nullopt;
    for (auto& g : iterates) g = ns_step(g, k);
  }
}

/// Same search on `search.trials` Gaussian inputs of the given shape, seeded
/// by derive_trial_seed(master_seed, in_d, trial).
inline std::optional<int> min_iterations_for_band(const Shape& shape, const NsCoefficients& k,
                                                  const BandSearch& search,
                                                  std::uint64_t master_seed) {
  search.validate();
  std::vector<DenseMatrix> inputs;
  for (std::size_t t = 0; t < search.trials; ++t) {
    const auto seed = derive_trial_seed(master_seed, static_cast<std::uint32_t>(shape.in_d()),
                                        static_cast<std::uint32_t>(t));
    inputs.push_back(generate(GaussianSpec{shape, 1.0, seed}));
  }
  return min_iterations_for_band(inputs, k, search);
}

}  // namespace nsspectra
