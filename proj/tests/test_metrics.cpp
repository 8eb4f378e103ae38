#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "sgld/law.hpp"
#include "sgld/metrics.hpp"
#include "sgld/rng.hpp"

using namespace sgld;

namespace {

SampleSet gaussian_sample(Stream& rng, std::size_t n, double m, double v) {
  SampleSet s;
  s.values.resize(n);
  for (double& x : s.values) x = m + std::sqrt(v) * rng.normal();
  return s;
}

LogDensity log_normal(double m, double v) {
  return [m, v](double x) {
    return -0.5 * std::log(2 * std::numbers::pi * v) - (x - m) * (x - m) / (2 * v);
  };
}

}  // namespace

TEST(Metrics, HandComputedDistances) {
  const SampleSet a(Vec{0.0, 1.0, 5.0}), b(Vec{2.0, 1.0, 3.0});
  // sorted coupling: (0,1) (1,2) (5,3)
  EXPECT_DOUBLE_EQ(empirical_w1_1d(a, b), 4.0 / 3.0);
  EXPECT_DOUBLE_EQ(empirical_w2_1d(a, b), std::sqrt(6.0 / 3.0));
  EXPECT_EQ(empirical_w1_1d(a, a), 0.0);
}

TEST(Metrics, UnequalSizesUseQuantileCoupling) {
  const SampleSet a(Vec{0.0, 1.0, 2.0, 3.0}), b(Vec{1.5, 1.5});
  // a reduced to its quartile midpoints 0.5 and 2.5
  EXPECT_DOUBLE_EQ(empirical_w1_1d(a, b), 1.0);
  EXPECT_THROW(empirical_w1_1d(a, SampleSet{}), std::invalid_argument);
  EXPECT_THROW(empirical_w2_1d(a, SampleSet(Vec{NAN})), std::invalid_argument);
}

TEST(Metrics, MetricAxiomsOnRandomTriples) {
  Stream rng(31, 0);
  for (int i = 0; i < 1000; ++i) {
    const std::size_t n = 1 + rng.below(40);
    const auto x = gaussian_sample(rng, n, rng.normal(), 0.5 + rng.uniform());
    const auto y = gaussian_sample(rng, n, rng.normal(), 0.5 + rng.uniform());
    const auto z = gaussian_sample(rng, n, rng.normal(), 0.5 + rng.uniform());
    EXPECT_NEAR(empirical_w1_1d(x, y), empirical_w1_1d(y, x), 1e-12);
    EXPECT_NEAR(empirical_w2_1d(x, y), empirical_w2_1d(y, x), 1e-12);
    EXPECT_LE(empirical_w1_1d(x, z), empirical_w1_1d(x, y) + empirical_w1_1d(y, z) + 1e-12);
    EXPECT_LE(empirical_w2_1d(x, z), empirical_w2_1d(x, y) + empirical_w2_1d(y, z) + 1e-12);
    EXPECT_LE(empirical_w1_1d(x, y), empirical_w2_1d(x, y) + 1e-12);
  }
}

TEST(Metrics, EmpiricalW2ApproachesGaussianFormula) {
  Stream rng(32, 0);
  const std::size_t m = 100000;
  const auto x = gaussian_sample(rng, m, 0.0, 1.0);
  const auto y = gaussian_sample(rng, m, 0.5, 2.0);
  const double exact = gaussian_w2({{0.0}, {1.0}}, {{0.5}, {2.0}});
  EXPECT_LE(std::abs(empirical_w2_1d(x, y) - exact),
            5.0 / std::sqrt(static_cast<double>(m)) * (1.0 + 1.0 + std::sqrt(2.0)));
}

TEST(Metrics, HistogramTv) {
  const SampleSet a(Vec{0.1, 0.2, 0.3, 0.4}), b(Vec{0.6, 0.7, 0.8, 0.9});
  EXPECT_DOUBLE_EQ(empirical_tv_hist(a, a, 10, 0.0, 1.0), 0.0);
  EXPECT_DOUBLE_EQ(empirical_tv_hist(a, b, 10, 0.0, 1.0), 1.0);
  EXPECT_DOUBLE_EQ(empirical_tv_hist(a, b, 2, 0.0, 1.0), 1.0);
  // out-of-range mass folds into the edge bins
  EXPECT_DOUBLE_EQ(empirical_tv_hist(SampleSet(Vec{-5.0}), SampleSet(Vec{0.01}), 4, 0.0, 1.0), 0.0);
  EXPECT_THROW(empirical_tv_hist(a, b, 1, 0.0, 1.0), std::invalid_argument);
  EXPECT_THROW(empirical_tv_hist(a, b, 10, 1.0, 1.0), std::invalid_argument);
}

TEST(Metrics, QuadratureKlMatchesClosedForm) {
  Stream rng(33, 0);
  for (int i = 0; i < 100; ++i) {
    const double m1 = 6 * rng.uniform() - 3, m2 = 6 * rng.uniform() - 3;
    const double v1 = 0.3 + 2.7 * rng.uniform(), v2 = 0.3 + 2.7 * rng.uniform();
    const double span = 12 * std::sqrt(std::max(v1, v2));
    const double lo = std::min(m1, m2) - span, hi = std::max(m1, m2) + span;
    for (std::size_t n : {4001u, 4000u}) {
      const double q = kl_quadrature_1d(log_normal(m1, v1), log_normal(m2, v2), lo, hi, n);
      EXPECT_NEAR(q, gaussian_kl({{m1}, {v1}}, {{m2}, {v2}}), 1e-6);
    }
  }
}

TEST(Metrics, QuadratureRejectsBadInput) {
  EXPECT_THROW(kl_quadrature_1d(log_normal(0, 1), log_normal(0, 1), 0, 1, 99),
               std::invalid_argument);
  const LogDensity bad = [](double x) { return x > 0 ? -INFINITY : 0.0; };
  EXPECT_THROW(kl_quadrature_1d(log_normal(0, 1), bad, -1, 1, 101), std::domain_error);
}

TEST(Metrics, LogLogSlope) {
  std::vector<std::pair<double, double>> pts;
  for (double x : {0.1, 0.05, 0.025}) pts.emplace_back(x, 3.0 * x * x);
  const auto fit = loglog_slope(pts);
  EXPECT_NEAR(fit.slope, 2.0, 1e-12);
  EXPECT_NEAR(fit.intercept, std::log(3.0), 1e-12);
  EXPECT_NEAR(fit.r2, 1.0, 1e-12);
  const std::vector<std::pair<double, double>> two{{0.1, 1.4979e-3}, {0.05, 3.702e-4}};
  EXPECT_NEAR(loglog_slope(two).slope, 2.017, 1e-3);
  const std::vector<std::pair<double, double>> bad{{0.1, 1.0}, {0.1, 2.0}};
  EXPECT_THROW(loglog_slope(bad), std::invalid_argument);
}

TEST(Metrics, QuantileTableOfStandardNormal) {
  const QuantileTable t([](double x) { return std::exp(-0.5 * x * x); }, -12, 12);
  EXPECT_NEAR(t.quantile(0.975), 1.959963984540054, 1e-6);
  EXPECT_NEAR(t.quantile(0.5), 0.0, 1e-9);
  EXPECT_NEAR(t.cdf(1.0), 0.8413447460685429, 1e-9);
  // int sqrt(Phi(1 - Phi)) dx for N(0,1)
  double s = 0.0;
  for (double x = -12; x < 12; x += 1e-4) {
    const double f = 0.5 * std::erfc(-(x + 5e-5) / std::sqrt(2.0));
    s += std::sqrt(f * (1 - f)) * 1e-4;
  }
  EXPECT_NEAR(t.spread(), s, 1e-6);
}

TEST(Metrics, W1ToReferenceShrinksWithSampleSize) {
  const QuantileTable t([](double x) { return std::exp(-0.5 * x * x); }, -12, 12);
  Stream rng(34, 0);
  const auto small = w1_to_reference(gaussian_sample(rng, 1000, 0, 1), t);
  const auto large = w1_to_reference(gaussian_sample(rng, 100000, 0, 1), t);
  EXPECT_LT(large, small);
  EXPECT_LT(large, 5 * std::sqrt(2 / std::numbers::pi) * t.spread() / std::sqrt(1e5));
  // a pure shift is recovered exactly up to quantile-table error
  SampleSet shifted = gaussian_sample(rng, 100000, 0.3, 1);
  EXPECT_NEAR(w1_to_reference(shifted, t), 0.3, 0.02);
}
