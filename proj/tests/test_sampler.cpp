#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "sgld/sampler.hpp"

using namespace sgld;

namespace {

SamplerConfig ula_config(double eta, double beta_inv = 0.5, std::uint64_t seed = 1) {
  SamplerConfig c;
  c.beta_inv = beta_inv;
  c.schedule = StepSchedule::constant(eta);
  c.seed = seed;
  return c;
}

Potential zero_drift() {
  return Potential::custom(
      1, [](std::span<const double>, std::span<double> out) { out[0] = 0.0; }, {}, {});
}

}  // namespace

TEST(Sampler, UlaStepWithInjectedNoise) {
  const auto p = Potential::linear_drift(2, 2.0);
  ChainState s{{1.0, -0.5}, 0, 0.0, Stream(1, 0)};
  const Vec z{0.3, -1.1};
  const auto next = ula_step(s, p, ula_config(0.1), z);
  const double scale = std::sqrt(2 * 0.5 * 0.1);
  EXPECT_DOUBLE_EQ(next.x[0], 1.0 + 0.1 * (-2.0) + scale * 0.3);
  EXPECT_DOUBLE_EQ(next.x[1], -0.5 + 0.1 * 1.0 + scale * -1.1);
  EXPECT_EQ(next.k, 1u);
  EXPECT_DOUBLE_EQ(next.t, 0.1);
}

TEST(Sampler, SgldStepWithInjectedBatch) {
  const auto p = Potential::linear_drift(1, 1.0, {{-1.0}, {1.0}});
  auto cfg = ula_config(0.2);
  cfg.batch = BatchSpec{1, true};
  ChainState s{{0.5}, 0, 0.0, Stream(1, 0)};
  const auto batch = p.make_batch({1});
  const Vec z{0.0};
  const auto [next, used] = sgld_step(s, p, cfg, z, &batch);
  EXPECT_DOUBLE_EQ(next.x[0], 0.5 + 0.2 * (-(0.5 - 1.0)));
  EXPECT_EQ(used.indices, std::vector<std::size_t>{1});
}

TEST(Sampler, FullBatchReproducesUlaBitwise) {
  const auto p = Potential::linear_drift(1, 1.0, {{-1.0}, {1.0}});
  auto ula = ula_config(0.1, 0.5, 99);
  auto full = ula;
  full.batch = BatchSpec{2, false};
  EnsembleOptions opt;
  opt.chains = 32;
  opt.horizon = 300;
  opt.record_at = {1, 150, 300};
  opt.init = InitialLaw{{1.0}, {0.2}};
  const auto a = run_ensemble(p, ula, opt);
  const auto b = run_ensemble(p, full, opt);
  for (std::size_t r = 0; r < a.size(); ++r) EXPECT_EQ(a[r].positions, b[r].positions);
}

TEST(Sampler, InterpolationEndpoints) {
  const auto p = Potential::linear_drift(1, 1.0, {{-1.0}, {1.0}});
  auto cfg = ula_config(0.1);
  cfg.batch = BatchSpec{1, true};
  const ChainState s{{0.8}, 3, 0.30000000000000004, Stream(1, 0)};
  const auto batch = p.make_batch({0});
  const Vec w{0.7};
  EXPECT_EQ(interpolate(s, p, cfg, batch, s.t, w), s.x);
  const double t = s.t + 0.04;
  const auto x = interpolate(s, p, cfg, batch, t, w);
  EXPECT_NEAR(x[0], 0.8 + 0.04 * (-(0.8 + 1.0)) + std::sqrt(2 * 0.5 * 0.04) * 0.7, 1e-15);
  EXPECT_THROW(interpolate(s, p, cfg, batch, s.t + 0.1, w), std::invalid_argument);
}

TEST(Sampler, ZeroStepsReturnsInitialState) {
  const auto p = Potential::linear_drift(1, 1.0);
  EnsembleOptions opt;
  opt.chains = 1;
  opt.horizon = 0;
  opt.init = InitialLaw::point({1.25});
  const auto snaps = run_ensemble(p, ula_config(0.1), opt);
  ASSERT_EQ(snaps.size(), 1u);
  EXPECT_EQ(snaps[0].positions, Vec{1.25});
  EXPECT_EQ(snaps[0].t, 0.0);
}

TEST(Sampler, ThreadCountDoesNotChangeOutput) {
  const auto p = Potential::gaussian_mixture_1d({0.5, 0.5}, {-1, 1}, 0.5, 1.0, {-1, 1});
  auto cfg = ula_config(0.05, 1.0, 7);
  cfg.batch = BatchSpec{1, true};
  EnsembleOptions opt;
  opt.chains = 1001;
  opt.horizon = 100;
  opt.record_at = {10, 100};
  opt.init = InitialLaw{{0.0}, {1.0}};
  const auto one = run_ensemble(p, cfg, opt);
  for (unsigned t : {2u, 3u, 8u}) {
    opt.threads = t;
    const auto many = run_ensemble(p, cfg, opt);
    for (std::size_t r = 0; r < one.size(); ++r) EXPECT_EQ(one[r].positions, many[r].positions);
  }
}

TEST(Sampler, BrownianVariance) {
  EnsembleOptions opt;
  opt.chains = 100000;
  opt.horizon = 10;
  opt.init = InitialLaw::point({0.0});
  const auto snap = run_ensemble(zero_drift(), ula_config(0.1, 0.5, 3), opt).front();
  EXPECT_NEAR(sample_moments(snap).var[0], 1.0, 0.02);
}

TEST(Sampler, LinearStationaryMoments) {
  EnsembleOptions opt;
  opt.chains = 100000;
  opt.horizon = 500;
  opt.init = InitialLaw::point({1.0});
  const auto snap =
      run_ensemble(Potential::linear_drift(1, 1.0), ula_config(0.1, 0.5, 4), opt).front();
  const auto m = sample_moments(snap);
  EXPECT_NEAR(m.mean[0], 0.0, 0.01);
  EXPECT_NEAR(m.var[0], 1.0 / 1.9, 0.01);
}

TEST(Sampler, OneStepLawFromPointMass) {
  const auto p = Potential::linear_drift(1, 1.0);
  EnsembleOptions opt;
  opt.chains = 100000;
  opt.horizon = 1;
  opt.init = InitialLaw::point({0.7});
  const auto m = sample_moments(run_ensemble(p, ula_config(0.1, 0.5, 5), opt).front());
  EXPECT_LE(std::abs(m.mean[0] - 0.63) / m.mean_se[0], 5.0);
  EXPECT_LE(std::abs(m.var[0] - 0.1) / m.var_se[0], 5.0);
}

TEST(Sampler, DivergenceNamesChainAndStep) {
  const auto p = Potential::custom(
      1, [](std::span<const double> x, std::span<double> out) { out[0] = x[0] * x[0] * x[0]; },
      {}, {});
  EnsembleOptions opt;
  opt.chains = 4;
  opt.horizon = 1000;
  opt.init = InitialLaw::point({2.0});
  try {
    run_ensemble(p, ula_config(0.5, 0.01), opt);
    FAIL();
  } catch (const DivergenceError& e) {
    EXPECT_EQ(e.chain(), 0u);
    EXPECT_NE(std::string(e.what()).find("chain 0"), std::string::npos);
  }
}

TEST(Sampler, StabilityGuard) {
  EnsembleOptions opt;
  opt.init = InitialLaw::point({0.0});
  EXPECT_THROW(run_ensemble(Potential::linear_drift(1, 1.0), ula_config(2.0), opt),
               std::invalid_argument);
}

TEST(Sampler, SampleCsvAndMetadata) {
  Snapshot s{2, 0.25, 2, {1.0, 2.0, 0.1, 1.0 / 3.0}};
  std::ostringstream out;
  write_samples_csv(out, std::span<const Snapshot>(&s, 1));
  EXPECT_EQ(out.str(),
            "chain,k,t,x_1,x_2\n0,2,0.25,1,2\n1,2,0.25,0.10000000000000001,0.33333333333333331\n");
  std::ostringstream meta;
  write_metadata(meta, {42, 3, "0.1.0"});
  EXPECT_NE(meta.str().find("seed=42"), std::string::npos);
  EXPECT_NE(meta.str().find("generator="), std::string::npos);
  EXPECT_NE(meta.str().find("threads=3"), std::string::npos);
}

TEST(Sampler, FormatDoubleRoundTrips) {
  Stream rng(8, 0);
  for (int i = 0; i < 1000; ++i) {
    const double v = rng.normal() * std::pow(10.0, rng.normal() * 50);
    EXPECT_EQ(std::stod(format_double(v)), v);
  }
}
