#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "sgld/model.hpp"

using namespace sgld;

namespace {

Potential two_offsets() { return Potential::linear_drift(1, 1.0, {{-1.0}, {1.0}}); }

Potential mixture(Vec offsets = {}) {
  return Potential::gaussian_mixture_1d({0.5, 0.5}, {-1.0, 1.0}, 0.5, 1.0, std::move(offsets));
}

// log of the equal-weight N(+-1, v) density, written out directly
double mixture_log_density(double x, double v) {
  const double c = 1.0 / std::sqrt(2.0 * std::numbers::pi * v);
  return std::log(0.5 * c * std::exp(-(x + 1) * (x + 1) / (2 * v)) +
                  0.5 * c * std::exp(-(x - 1) * (x - 1) / (2 * v)));
}

}  // namespace

TEST(Model, LinearDriftAndBatchDrift) {
  const auto p = Potential::linear_drift(2, 2.0, {{-1.0, 0.5}, {1.0, -0.5}});
  const Vec x{0.3, -1.2};
  const auto b = drift_full(p, x);
  EXPECT_DOUBLE_EQ(b[0], -0.6);
  EXPECT_DOUBLE_EQ(b[1], 2.4);
  // b^xi = -a (x - zbar)
  const auto b0 = batch_drift(p, p.make_batch({0}), x);
  EXPECT_DOUBLE_EQ(b0[0], -2.0 * (0.3 + 1.0));
  EXPECT_DOUBLE_EQ(b0[1], -2.0 * (-1.2 - 0.5));
}

TEST(Model, OffsetsMustSumToZero) {
  EXPECT_THROW(Potential::linear_drift(1, 1.0, {{1.0}, {0.5}}), std::invalid_argument);
  EXPECT_THROW(mixture({1.0, 0.0}), std::invalid_argument);
  EXPECT_THROW(Potential::linear_drift(1, -1.0), std::invalid_argument);
}

TEST(Model, DeclaredLinearConstants) {
  const auto p = Potential::linear_drift(1, 3.0, {{-2.0}, {2.0}});
  EXPECT_DOUBLE_EQ(p.metadata().lipschitz, 3.0);
  EXPECT_DOUBLE_EQ(p.metadata().dissipation_mu, 1.5);
  EXPECT_DOUBLE_EQ(p.metadata().dissipation_sigma, 6.0);
  EXPECT_DOUBLE_EQ(p.metadata().batch_bound, 6.0);
}

TEST(Model, MixtureDriftIsScaledScore) {
  const auto p = mixture();
  const auto& mix = std::get<GaussianMixture1D>(p.kind());
  for (double x : {-3.0, -1.0, -0.2, 0.0, 0.7, 2.5}) {
    const double h = 1e-5;
    const double fd = (mixture_log_density(x + h, 0.5) - mixture_log_density(x - h, 0.5)) / (2 * h);
    EXPECT_NEAR(drift_full(p, Vec{x})[0], fd, 1e-7) << x;
    EXPECT_NEAR(mix.log_density(x), mixture_log_density(x, 0.5), 1e-12);
  }
  EXPECT_NEAR(mix.mean(), 0.0, 1e-15);
  EXPECT_NEAR(mix.total_variance(), 1.5, 1e-15);
}

TEST(Model, MixtureCdfMatchesIntegral) {
  const auto p = mixture();
  const auto& mix = std::get<GaussianMixture1D>(p.kind());
  // trapezoid oracle on a fine grid
  double acc = 0.0, prev = mix.density(-10.0);
  const double h = 1e-4;
  for (double x = -10.0 + h; x <= 0.5 + 1e-12; x += h) {
    const double f = mix.density(x);
    acc += 0.5 * h * (prev + f);
    prev = f;
  }
  EXPECT_NEAR(mix.cdf(0.5), acc, 1e-7);
  EXPECT_NEAR(mix.cdf(0.0), 0.5, 1e-15);
}

TEST(Model, BatchSpaceSizes) {
  const auto p = Potential::linear_drift(1, 1.0, {{-1.0}, {0.0}, {1.0}});
  EXPECT_EQ(enumerate_batches(p, {2, true}).size(), 9u);
  EXPECT_EQ(enumerate_batches(p, {2, false}).size(), 3u);
  EXPECT_EQ(enumerate_batches(p, {3, false}).size(), 1u);
  EXPECT_THROW(validate_batch_spec(p, {4, false}), std::invalid_argument);
  EXPECT_THROW(validate_batch_spec(p, {0, true}), std::invalid_argument);
}

TEST(Model, ExhaustiveAverageIsFullDrift) {
  const auto p = two_offsets();
  const auto r = exhaustive_consistency(p, {1, true}, Vec{0.0});
  EXPECT_EQ(r.mc_mean[0], 0.0);
  EXPECT_EQ(r.deviation, 0.0);
  const auto q = Potential::linear_drift(2, 1.5, {{-1.0, 2.0}, {0.5, -1.0}, {0.5, -1.0}});
  Stream rng(11, 0);
  for (int i = 0; i < 50; ++i) {
    const Vec x{3 * rng.normal(), 3 * rng.normal()};
    for (BatchSpec spec : {BatchSpec{1, true}, BatchSpec{2, true}, BatchSpec{2, false}})
      EXPECT_LE(exhaustive_consistency(q, spec, x).deviation, 1e-14);
  }
}

TEST(Model, MonteCarloConsistencyWithinClt) {
  const auto p = two_offsets();
  Stream rng(5, 0);
  const auto r = check_consistency(p, {1, true}, Vec{0.0}, 10000, rng);
  EXPECT_LE(r.deviation, 4.0 * 1.0 / std::sqrt(10000.0));
  EXPECT_THROW(check_consistency(p, {1, true}, Vec{0.0}, 99, rng), std::invalid_argument);
}

TEST(Model, FullBatchConsumesNoRandomness) {
  const auto p = two_offsets();
  Stream rng(9, 0);
  const auto draw = draw_batch(p, {2, false}, rng);
  EXPECT_TRUE(draw.full);
  EXPECT_EQ(rng.draws(), 0u);
  const auto b = batch_drift(p, draw, Vec{0.4});
  EXPECT_EQ(b[0], drift_full(p, Vec{0.4})[0]);
}

TEST(Model, WithoutReplacementHasDistinctIndices) {
  const auto p = Potential::linear_drift(1, 1.0, {{-2.0}, {-1.0}, {0.0}, {1.0}, {2.0}});
  Stream rng(4, 0);
  for (int i = 0; i < 1000; ++i) {
    auto d = draw_batch(p, {3, false}, rng);
    std::sort(d.indices.begin(), d.indices.end());
    EXPECT_EQ(std::adjacent_find(d.indices.begin(), d.indices.end()), d.indices.end());
  }
}

TEST(Model, InterceptVarianceMatchesEnumeration) {
  const auto p = Potential::linear_drift(1, 2.0, {{-1.5}, {0.5}, {1.0}});
  for (BatchSpec spec : {BatchSpec{1, true}, BatchSpec{2, true}, BatchSpec{2, false}}) {
    const auto all = enumerate_batches(p, spec);
    double m = 0.0, m2 = 0.0;
    for (const auto& d : all) {
      m += d.shift[0];
      m2 += d.shift[0] * d.shift[0];
    }
    m /= static_cast<double>(all.size());
    m2 /= static_cast<double>(all.size());
    EXPECT_NEAR(intercept_variance(p, spec)[0], m2 - m * m, 1e-12);
  }
  EXPECT_DOUBLE_EQ(intercept_variance(two_offsets(), {1, true})[0], 1.0);
}

TEST(Model, DeclaredConstantsHoldOnSamples) {
  Stream rng(13, 0);
  const BatchSpec one{1, true};
  EXPECT_TRUE(validate_metadata(two_offsets(), &one, rng).ok());
  EXPECT_TRUE(validate_metadata(mixture({-1.0, 1.0}), &one, rng).ok());
  const auto wide = Potential::gaussian_mixture_1d({0.3, 0.7}, {-3.0, 2.0}, 0.4, 0.5, {});
  EXPECT_TRUE(validate_metadata(wide, nullptr, rng).ok());
  const auto p3 = Potential::linear_drift(3, 0.7, {{1, 2, 3}, {-1, -2, -3}});
  const BatchSpec two{2, true};
  EXPECT_TRUE(validate_metadata(p3, &two, rng).ok());
}

TEST(Model, UnderstatedConstantsAreCaught) {
  PotentialMetadata meta{0.5, 1.0, 0.0, 0.0};  // true Lipschitz constant is 1
  const auto p = Potential::custom(
      1, [](std::span<const double> x, std::span<double> out) { out[0] = -x[0]; }, {}, meta);
  Stream rng(17, 0);
  const auto r = validate_metadata(p, nullptr, rng, 200);
  EXPECT_FALSE(r.ok());
  EXPECT_GT(r.lipschitz_violations, 0u);
}

TEST(Model, CustomComponentsAverage) {
  std::vector<DriftFn> comps;
  for (double c : {-1.0, 3.0})
    comps.push_back([c](std::span<const double>, std::span<double> out) { out[0] = c; });
  const auto p = Potential::custom(
      1, [](std::span<const double> x, std::span<double> out) { out[0] = -x[0]; }, comps, {});
  EXPECT_DOUBLE_EQ(drift_full(p, Vec{2.0})[0], -2.0 + 1.0);
  EXPECT_DOUBLE_EQ(batch_drift(p, p.make_batch({1}), Vec{2.0})[0], -2.0 + 3.0);
}
