#include <gtest/gtest.h>

#include <sstream>

#include "sgld/sgld.hpp"

using namespace sgld;

namespace {

double metric(const ExperimentResult& r, const std::string& name, double parameter = 0.0) {
  for (const auto& row : r.rows)
    if (row.metric == name && row.parameter == parameter) return row.value;
  throw std::runtime_error("missing metric " + name);
}

const Check* find_check(const ExperimentResult& r, const std::string& prefix) {
  for (const auto& c : r.checks)
    if (c.name.rfind(prefix, 0) == 0) return &c;
  return nullptr;
}

std::string csv(const ExperimentResult& r) {
  std::ostringstream out;
  write_results_csv(out, r);
  return out.str();
}

ExperimentConfig small_contraction() {
  auto cfg = defaults_for(ExperimentKind::Contraction);
  cfg.sampler.chains = 500;
  cfg.horizon_t = 2.0;
  cfg.checkpoints = 10;
  return cfg;
}

ExperimentConfig small_bias() {
  auto cfg = defaults_for(ExperimentKind::StationaryBias);
  cfg.sampler.chains = 300;
  cfg.samples_per_chain = 5;
  cfg.burn_in = 2.0;
  cfg.min_effective_samples = 0.0;
  cfg.ratio_min = 0.0;
  cfg.ratio_max = 1e9;
  return cfg;
}

}  // namespace

TEST(RateSweep, ReferenceRunPasses) {
  const auto r = rate_sweep(defaults_for(ExperimentKind::RateSweep));
  EXPECT_TRUE(r.passed());
  // sup-in-time KL per step, from the closed-form recursions
  EXPECT_NEAR(metric(r, "sup_kl", 0.1), 2.6277e-3, 1e-7);
  EXPECT_NEAR(metric(r, "sup_kl", 0.0125), 3.93e-5, 1e-7);
  EXPECT_NEAR(metric(r, "kl_slope"), 2.0207, 1e-4);
  EXPECT_NEAR(metric(r, "w2_slope"), 1.0160, 1e-4);
  EXPECT_NEAR(metric(r, "kl_per_dim", 8.0) / metric(r, "kl_per_dim", 1.0), 1.0, 1e-12);
}

TEST(RateSweep, UnstableStepIsReportedAndSkipped) {
  auto cfg = defaults_for(ExperimentKind::RateSweep);
  cfg.eta_grid = {2.5, 0.1, 0.05, 0.025};
  const auto r = rate_sweep(cfg);
  EXPECT_DOUBLE_EQ(metric(r, "unstable_step", 2.5), 2.5);
  EXPECT_NO_THROW(metric(r, "sup_kl", 0.025));
}

TEST(RateSweep, GridInvariants) {
  auto cfg = defaults_for(ExperimentKind::RateSweep);
  cfg.eta_grid = {0.1, 0.05};
  EXPECT_THROW(rate_sweep(cfg), std::invalid_argument);
  cfg.eta_grid = {0.1, 0.2, 0.05};
  EXPECT_THROW(rate_sweep(cfg), std::invalid_argument);
  cfg.eta_grid = {0.1, 0.05, 0.025};
  cfg.horizon_t = 0.5;  // 5 steps at the largest eta
  EXPECT_THROW(rate_sweep(cfg), std::invalid_argument);
}

TEST(RateSweep, NeedsLinearTarget) {
  auto cfg = defaults_for(ExperimentKind::RateSweep);
  cfg.potential.kind = "mixture";
  EXPECT_THROW(rate_sweep(cfg), Unsupported);
}

TEST(SgldSweep, ZeroInterceptVarianceReducesToRateSweep) {
  auto cfg = defaults_for(ExperimentKind::SgldSweep);
  cfg.sampler.batch_size = 0;
  cfg.potential.offsets.clear();
  const auto s = sgld_sweep(cfg, false);
  auto rcfg = defaults_for(ExperimentKind::RateSweep);
  rcfg.eta_grid = cfg.eta_grid;
  const auto r = rate_sweep(rcfg);
  for (double eta : cfg.eta_grid)
    EXPECT_EQ(metric(s, "sup_surrogate_kl", eta), metric(r, "sup_kl", eta));
}

TEST(SgldSweep, ClosedFormPartPasses) {
  const auto r = sgld_sweep(defaults_for(ExperimentKind::SgldSweep), false);
  EXPECT_TRUE(r.passed());
  EXPECT_DOUBLE_EQ(metric(r, "intercept_variance"), 1.0);
  EXPECT_NEAR(metric(r, "surrogate_kl_slope"), 2.0126, 1e-4);
}

TEST(ScheduleDecay, ReferenceRunPasses) {
  const auto r = schedule_decay(defaults_for(ExperimentKind::ScheduleDecay));
  EXPECT_TRUE(r.passed());
  EXPECT_NEAR(metric(r, "kl_slope", 0.5), -1.007, 1e-3);
  // eta_0 = 4^-0.3 exceeds the default cap 1/(2L) = 0.5
  EXPECT_NO_THROW(metric(r, "step_cap_exceeded", 0.3));
}

TEST(ScheduleDecay, ThetaOutsideUnitIntervalRejected) {
  auto cfg = defaults_for(ExperimentKind::ScheduleDecay);
  cfg.theta_list = {1.2};
  EXPECT_THROW(schedule_decay(cfg), std::invalid_argument);
}

TEST(ScheduleDecay, EnforcedCapRaisesOffset) {
  auto cfg = defaults_for(ExperimentKind::ScheduleDecay);
  cfg.theta_list = {0.3};
  cfg.horizon_k = 2000;
  cfg.schedule.enforce_step_cap = true;
  const auto r = schedule_decay(cfg);
  EXPECT_GT(metric(r, "ell", 0.3), 4.0);
  EXPECT_THROW(metric(r, "step_cap_exceeded", 0.3), std::runtime_error);
}

TEST(Envelope, FitDominatesAndIsTight) {
  const auto s = StepSchedule::constant(0.05);
  std::vector<double> kl(201, 0.0);
  for (std::size_t k = 1; k <= 200; ++k) kl[k] = 1e-3 * (1.0 - std::exp(-0.1 * k)) + 1e-4 / k;
  const auto fit = fit_envelope(s, kl, 2.0, 1);
  EXPECT_EQ(fit.violations, 0u);
  EXPECT_GE(fit.min_ratio, 1.0);
  EXPECT_LT(fit.min_ratio, 1.0 + 1e-9);
}

TEST(Contraction, DeterministicAndThreadInvariant) {
  auto cfg = small_contraction();
  const auto a = csv(contraction(cfg));
  EXPECT_EQ(a, csv(contraction(cfg)));
  cfg.threads = 3;
  EXPECT_EQ(a, csv(contraction(cfg)));
  cfg.seed += 1;
  EXPECT_NE(a, csv(contraction(cfg)));
}

TEST(StationaryBias, FullBatchSgldMatchesUla) {
  auto ula = small_bias();
  ula.sampler.batch_size = 0;
  ula.potential.gradient_offsets.clear();
  auto full = ula;
  full.sampler.batch_size = 1;  // N = 1 component, so every batch is the full batch
  EXPECT_EQ(csv(stationary_bias(ula)), csv(stationary_bias(full)));
}

TEST(StationaryBias, AutocorrelationOfIndependentDraws) {
  std::vector<Snapshot> snaps(20);
  Stream rng(3, 0);
  for (auto& s : snaps) {
    s.positions.resize(5000);
    for (double& v : s.positions) v = rng.normal();
  }
  EXPECT_NEAR(integrated_autocorrelation(snaps, 0.0), 1.0, 0.05);
  // perfectly persistent chains: every record repeats the first
  for (auto& s : snaps) s.positions = snaps.front().positions;
  EXPECT_GT(integrated_autocorrelation(snaps, 0.0), 19.0);
}

TEST(Verify, ClosedFormSuitePasses) {
  const auto r = closed_form_suite(defaults_for(ExperimentKind::Verify));
  EXPECT_TRUE(r.passed());
}

TEST(Verify, WrongKlOrderIsCaught) {
  auto cfg = defaults_for(ExperimentKind::Verify);
  cfg.kl_order = KlOrder::ExactDiscrete;
  const auto r = closed_form_suite(cfg);
  EXPECT_FALSE(r.passed());
  EXPECT_TRUE(find_check(r, "law: harness KL minus its lower bound")->pass);
  EXPECT_FALSE(find_check(r, "law: harness KL vs independent")->pass);
  const auto sweep = rate_sweep([&] {
    auto c = defaults_for(ExperimentKind::RateSweep);
    c.kl_order = KlOrder::ExactDiscrete;
    return c;
  }());
  EXPECT_TRUE(find_check(sweep, "rate-sweep: mean lower bound")->pass);
}

TEST(Verify, PropertySuitesPass) {
  const auto cfg = defaults_for(ExperimentKind::Verify);
  for (const auto& r : {consistency_suite(cfg), schedule_suite(cfg), law_suite(cfg),
                        metric_suite(cfg, 20000)}) {
    for (const auto& c : r.checks) EXPECT_TRUE(c.pass) << c.name << " observed " << c.observed;
  }
}

TEST(Report, CsvSchemaAndFiniteness) {
  ExperimentResult r;
  r.id = "x";
  r.row(0.1, "m", 1.0 / 3.0, 0.0);
  EXPECT_EQ(csv(r), "experiment,parameter,metric,value,stderr\nx,0.10000000000000001,m,0.33333333333333331,0\n");
  r.row(0.1, "bad", NAN);
  EXPECT_THROW(csv(r), std::runtime_error);
}

TEST(Report, VerdictLines) {
  ExperimentResult r;
  r.id = "x";
  r.check_window("slope", 2.0, 1.9, 2.1);
  r.check_at_most("count", 1.0, 0.0);
  std::ostringstream out;
  write_report(out, r, ExperimentConfig{}, RunMetadata{5, 2, "0.1.0"});
  const auto text = out.str();
  EXPECT_NE(text.find("PASS  slope  expected [1.9, 2.1]  observed 2"), std::string::npos);
  EXPECT_NE(text.find("FAIL  count"), std::string::npos);
  EXPECT_NE(text.find("verdict: FAIL"), std::string::npos);
  EXPECT_NE(text.find("threads: 2"), std::string::npos);
}
