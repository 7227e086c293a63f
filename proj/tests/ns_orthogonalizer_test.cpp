#include "nsspectra/ns_orthogonalizer.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "nsspectra/gaussian_matrix.hpp"
#include "oracles.hpp"

namespace {

using namespace nsspectra;

constexpr NsCoefficients kDefault = NsCoefficients::muon_default();

std::vector<double> sorted_abs_poly(const Spectrum& s, const NsCoefficients& k) {
  std::vector<double> want;
  for (double v : s.values()) {
    want.push_back(std::abs(k.a * v + k.b * v * v * v + k.c * v * v * v * v * v));
  }
  std::sort(want.begin(), want.end(), std::greater<>());
  return want;
}

double mean_tail(const std::vector<DenseMatrix>& inputs, int iterations, double threshold) {
  double acc = 0.0;
  for (const auto& g : inputs) {
    acc += ns_run(g, NsSchedule(kDefault, iterations), threshold).trace.records.back().tail_fraction;
  }
  return acc / static_cast<double>(inputs.size());
}

TEST(NsSchedule, Validation) {
  EXPECT_THROW(NsSchedule(kDefault, 0), ConfigError);
  EXPECT_THROW(NsSchedule(std::vector<NsCoefficients>{kDefault, kDefault}, 3), ConfigError);
  EXPECT_THROW(NsSchedule(std::vector<NsCoefficients>{}, 1), ConfigError);
  EXPECT_THROW(NsSchedule(NsCoefficients{std::nan(""), 0, 0}, 1), ConfigError);
  const NsSchedule per_step({{1, 0, 0}, {2, 0, 0}, {3, 0, 0}}, 3);
  EXPECT_EQ(per_step.at(2).a, 3.0);
  EXPECT_EQ(NsSchedule::muon_default().iterations(), 5);
  EXPECT_EQ(NsSchedule::muon_default().at(4), kDefault);
}

TEST(ScalarPolynomial, DefaultAtOne) {
  EXPECT_NEAR(scalar_polynomial(1.0, kDefault), 0.701, 1e-12);
  EXPECT_EQ(scalar_polynomial(0.0, kDefault), 0.0);
  EXPECT_EQ(scalar_polynomial(-0.3, kDefault), -scalar_polynomial(0.3, kDefault));
}

TEST(ScalarIterate, FiveDefaultStepsFromPointOne) {
  const auto traj = scalar_iterate(0.1, NsSchedule::muon_default());
  ASSERT_EQ(traj.size(), 6u);
  EXPECT_NEAR(traj[1], 0.33969531500000005, 1e-14);
  EXPECT_NEAR(traj[2], 0.992096932738971, 1e-13);
  EXPECT_NEAR(traj[5], 0.7121200816580746, 1e-12);
}

TEST(NsStep, IdentityCoefficientsLeaveInputUnchanged) {
  const DenseMatrix g = normalize_frobenius(generate({Shape(40, 13), 1.0, 3}));
  EXPECT_EQ(ns_step(g, NsCoefficients::identity()), g);
}

TEST(NsStep, IdentityMatrixScalesBySum) {
  const DenseMatrix out = ns_step(DenseMatrix::identity(6), kDefault);
  EXPECT_LE(max_abs_diff(out, scaled(DenseMatrix::identity(6), 0.701)), 1e-15);
  DenseMatrix one(1, 1);
  one(0, 0) = 0.5;
  EXPECT_NEAR(ns_step(one, kDefault)(0, 0), scalar_polynomial(0.5, kDefault), 1e-15);
}

TEST(NsStep, RejectsWide) {
  EXPECT_THROW(ns_step(DenseMatrix(2, 3), kDefault), DimensionError);
}

TEST(NsStep, MatchesExpandedPolynomialOracle) {
  // a G + b (G G^T) G + c (G G^T)^2 G evaluated literally.
  const DenseMatrix g = normalize_frobenius(generate({Shape(30, 11), 1.0, 8}));
  const DenseMatrix ggt = oracle::naive_matmul(g, oracle::naive_transpose(g));
  const DenseMatrix t1 = oracle::naive_matmul(ggt, g);
  const DenseMatrix t2 = oracle::naive_matmul(ggt, t1);
  DenseMatrix want = g;
  for (std::size_t i = 0; i < want.size(); ++i) {
    want.entries()[i] = kDefault.a * g.entries()[i] + kDefault.b * t1.entries()[i] +
                        kDefault.c * t2.entries()[i];
  }
  EXPECT_LE(max_abs_diff(ns_step(g, kDefault), want), 1e-14);
}

TEST(NsStep, DiagonalOracleOnConstructedSpectrum) {
  const std::vector<double> sv{0.95, 0.8, 0.4, 0.2, 0.05};
  const DenseMatrix g = oracle::with_singular_values(64, sv, 21);
  for (const auto& k : {kDefault, NsCoefficients{1.5, -0.5, 0.0}, NsCoefficients{2.0, -1.5, 0.5}}) {
    const Spectrum got = singular_values(ns_step(g, k));
    std::vector<double> want;
    for (double s : sv) want.push_back(std::abs(scalar_polynomial(s, k)));
    std::sort(want.begin(), want.end(), std::greater<>());
    for (std::size_t i = 0; i < sv.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-9);
  }
}

TEST(NsStep, DiagonalOracleOnGaussianInputs) {
  const std::size_t shapes[][2] = {{64, 32}, {96, 96}, {128, 50}, {200, 200}};
  std::uint64_t seed = 40;
  for (const auto& sh : shapes) {
    const DenseMatrix g = normalize_frobenius(generate({Shape(sh[0], sh[1]), 1.0, seed++}));
    const Spectrum before = singular_values(g);
    for (const auto& k : {kDefault, NsCoefficients{1.5, -0.5, 0.0}, NsCoefficients{3.0, -3.0, 1.0}}) {
      const Spectrum after = singular_values(ns_step(g, k));
      const auto want = sorted_abs_poly(before, k);
      for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(after[i], want[i], 1e-9);
    }
  }
}

TEST(NsStep, OddSymmetryIsExact) {
  const DenseMatrix g = normalize_frobenius(generate({Shape(33, 17), 1.0, 12}));
  EXPECT_EQ(ns_step(scaled(g, -1.0), kDefault), scaled(ns_step(g, kDefault), -1.0));
}

TEST(NsStep, FlatSpectrumFollowsScalarTrajectory) {
  DenseMatrix g = scaled(oracle::random_orthonormal_columns(64, 32, 5), 0.1);
  for (int t = 0; t < 5; ++t) g = ns_step(g, kDefault);
  for (double v : singular_values(g).values()) EXPECT_NEAR(v, 0.7121200816580746, 1e-9);
}

TEST(NsRun, Validation) {
  const DenseMatrix g = generate({Shape(8, 4), 1.0, 1});
  EXPECT_THROW(ns_run(g, NsSchedule::muon_default(), 0.0), ConfigError);
  EXPECT_THROW(ns_run(g, NsSchedule::muon_default(), 1.0), ConfigError);
  EXPECT_THROW(ns_run(DenseMatrix(4, 8), NsSchedule::muon_default(), 0.6), DimensionError);
  EXPECT_THROW(ns_run(DenseMatrix(8, 4), NsSchedule::muon_default(), 0.6), DegenerateInputError);
  EXPECT_THROW(ns_run(g, NsSchedule(NsCoefficients{1e300, 0, 0}, 3), 0.6), NumericError);
}

TEST(NsRun, TraceIsConsistentWithItsSpectra) {
  const DenseMatrix g = generate({Shape(128, 96), 1.0, 77});
  const auto run = ns_run(g, NsSchedule::muon_default(), 0.6);
  const auto& recs = run.trace.records;
  ASSERT_EQ(recs.size(), 6u);
  double sum_sq = 0.0;
  for (double v : recs[0].spectrum.values()) sum_sq += v * v;
  EXPECT_NEAR(sum_sq, 1.0, 1e-12);
  for (std::size_t t = 0; t < recs.size(); ++t) {
    const auto& r = recs[t];
    EXPECT_EQ(r.iteration, static_cast<int>(t));
    EXPECT_EQ(r.tail_fraction, r.spectrum.fraction_below(0.6));
    EXPECT_EQ(r.min_sval, r.spectrum.min());
    EXPECT_EQ(r.max_sval, r.spectrum.max());
    EXPECT_EQ(r.median_sval, r.spectrum.median());
    if (t > 0) {
      const auto want = sorted_abs_poly(recs[t - 1].spectrum, kDefault);
      for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(r.spectrum[i], want[i], 1e-8);
    }
  }
  EXPECT_NEAR(recs.back().orthogonality_residual, orthogonality_residual(run.output), 1e-8);
}

TEST(NsRun, LongerRunExtendsShorterOneBitwise) {
  const DenseMatrix g = generate({Shape(96, 96), 1.0, 4});
  const auto five = ns_run(g, NsSchedule(kDefault, 5), 0.6);
  const auto nine = ns_run(g, NsSchedule(kDefault, 9), 0.6);
  ASSERT_EQ(nine.trace.records.size(), 10u);
  for (std::size_t t = 0; t < 6; ++t) {
    const auto a = five.trace.records[t].spectrum.values();
    const auto b = nine.trace.records[t].spectrum.values();
    EXPECT_TRUE(std::equal(a.begin(), a.end(), b.begin(), b.end())) << t;
    EXPECT_EQ(five.trace.records[t].tail_fraction, nine.trace.records[t].tail_fraction);
  }
}

TEST(NsRun, TailDoesNotGrowWithMoreIterations) {
  std::vector<DenseMatrix> inputs;
  for (std::uint32_t t = 0; t < 4; ++t) {
    inputs.push_back(generate({Shape(256, 256), 1.0, derive_trial_seed(3, 0, t)}));
  }
  EXPECT_LE(mean_tail(inputs, 9, 0.6), mean_tail(inputs, 5, 0.6));
}

TEST(NsRun, TailIsHeavierForLargerInputs) {
  std::vector<DenseMatrix> small;
  std::vector<DenseMatrix> large;
  for (std::uint32_t t = 0; t < 8; ++t) {
    small.push_back(generate({Shape(64, 64), 1.0, derive_trial_seed(11, 0, t)}));
    large.push_back(generate({Shape(512, 512), 1.0, derive_trial_seed(11, 1, t)}));
  }
  EXPECT_GT(mean_tail(large, 5, 0.6), mean_tail(small, 5, 0.6));
}

}  // namespace
