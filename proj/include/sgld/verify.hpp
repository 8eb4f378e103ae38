#pragma once

#include <cmath>
#include <numeric>
#include <limits>
#include <string>
#include <vector>

#include "sgld/experiments.hpp"

namespace sgld {

namespace verify_detail {

inline double rel_err(double got, double want) {
  return std::abs(got - want) / std::max(std::abs(want), std::numeric_limits<double>::min());
}

/// Linear potential of the config, or the two-offset default when the config
/// names a mixture.
inline Potential linear_model(const ExperimentConfig& cfg) {
  if (cfg.potential.kind == "linear") return build_potential(cfg.potential, cfg.sampler.beta_inv);
  return Potential::linear_drift(1, 1.0, {{-1.0}, {1.0}});
}

inline BatchSpec batch_of(const ExperimentConfig& cfg) {
  return BatchSpec{std::max<std::size_t>(cfg.sampler.batch_size, 1), cfg.sampler.replacement};
}

/// max over batches of |mean_{i in xi} z_i|^2, by enumeration.
inline double max_batch_offset_sq(const Potential& p, const BatchSpec& spec) {
  const auto& lin = require_linear(p, "offset bound");
  if (lin.offsets.empty()) return 0.0;
  double best = 0.0;
  for (const auto& draw : enumerate_batches(p, spec)) {
    Vec zbar(p.dim(), 0.0);
    for (std::size_t i : draw.indices)
      for (std::size_t c = 0; c < p.dim(); ++c) zbar[c] += lin.offsets[i][c];
    for (double& v : zbar) v /= static_cast<double>(draw.indices.size());
    best = std::max(best, dot(zbar, zbar));
  }
  return best;
}

}  // namespace verify_detail

// ---------------------------------------------------------------------------

/// Reproduction of the a=1, beta_inv=1/2, eta=0.1, X0=1, T=1 pair, plus a
/// cross-check of the harness KL (in its configured order) against an
/// independent evaluation of D_KL(discrete || exact).
inline ExperimentResult closed_form_suite(const ExperimentConfig& cfg) {
  using verify_detail::rel_err;
  Stopwatch clock;
  ExperimentResult res;
  res.id = "verify";
  const double a = 1.0, beta_inv = 0.5, eta = 0.1;
  const Vec m0{1.0}, v0{0.0};
  const auto sched = StepSchedule::constant(eta);
  const auto discrete = em_law(a, beta_inv, m0, v0, sched, 10);
  const auto exact = ou_exact_law(a, beta_inv, m0, v0, 1.0);

  const double mu2 = std::pow(0.9, 10), s2 = (1.0 - std::pow(0.9, 20)) / 1.9;
  const double mu1 = std::exp(-1.0), s1 = 0.5 * (1.0 - std::exp(-2.0));
  res.check_at_most("law: discrete mean vs 0.9^10 (relative)", rel_err(discrete.mean[0], mu2), 1e-12);
  res.check_at_most("law: discrete variance vs (1 - 0.9^20)/1.9 (relative)",
                    rel_err(discrete.var[0], s2), 1e-12);
  res.check_at_most("law: exact mean vs e^-1 (relative)", rel_err(exact.mean[0], mu1), 1e-12);
  res.check_at_most("law: exact variance vs (1 - e^-2)/2 (relative)", rel_err(exact.var[0], s1),
                    1e-12);

  const double kl_display = gaussian_kl(exact, discrete);
  const double lb_display = kl_mean_lower_bound(exact, discrete);
  res.row(1.0, "kl_exact_discrete", kl_display);
  res.row(1.0, "kl_lower_bound", lb_display);
  res.check_window("law: KL(exact || discrete) at T=1", kl_display, 1.4985e-3, 1.4995e-3);
  res.check_at_least("law: KL minus mean lower bound", kl_display - lb_display, 0.0);

  // Harness KL as the sweeps compute it.
  const double harness = ordered_kl(discrete, exact, cfg.kl_order);
  const double harness_lb = ordered_lower_bound(discrete, exact, cfg.kl_order);
  const double r = s2 / s1;
  const double independent = 0.5 * (r - 1.0 - std::log(r)) + (mu2 - mu1) * (mu2 - mu1) / (2.0 * s1);
  res.row(1.0, "kl_harness", harness);
  res.row(1.0, "kl_discrete_exact_reference", independent);
  res.check_at_least("law: harness KL minus its lower bound", harness - harness_lb, 0.0);
  res.check_at_most("law: harness KL vs independent D_KL(discrete || exact) (relative)",
                    rel_err(harness, independent), 1e-10);

  // mean gap bound: |e^{-T} - (1 - eta)^{T/eta}| >= (1/4) e^{-T} T eta for T eta <= 3
  std::size_t gap_fail = 0, gap_total = 0;
  for (double h : {0.25, 0.2, 0.1, 0.05, 0.025, 0.0125})
    for (int n = 1; n <= 400; ++n) {
      const double t = n * h;
      if (t * h > kMeanGapProductCap) break;
      const double gap = std::abs(std::exp(-t) - std::pow(1.0 - h, n));
      ++gap_total;
      if (gap < mean_gap_lower_bound(1.0, t, h)) ++gap_fail;
    }
  res.check_at_most("law: mean gap below its lower bound (count of " +
                        std::to_string(gap_total) + ")",
                    static_cast<double>(gap_fail), 0.0);
  res.seconds = clock.seconds();
  return res;
}

/// Unbiasedness of the batch drift: Monte Carlo over random points and the
/// exhaustive average, plus spot checks of the declared constants.
inline ExperimentResult consistency_suite(const ExperimentConfig& cfg) {
  Stopwatch clock;
  ExperimentResult res;
  res.id = "verify";
  const Potential p = verify_detail::linear_model(cfg);
  const BatchSpec spec = verify_detail::batch_of(cfg);
  const double bound = p.metadata().batch_bound;
  const std::size_t m = cfg.consistency_samples;
  const double band = 4.0 * bound / std::sqrt(static_cast<double>(m));
  Stream rng(cfg.seed, 0xC0'5157);

  double worst_mc = 0.0, worst_exhaustive = 0.0, worst_full = 0.0;
  std::size_t mc_fail = 0;
  Vec x(p.dim());
  for (std::size_t j = 0; j < cfg.consistency_points; ++j) {
    for (double& v : x) v = 3.0 * rng.normal();
    const auto mc = check_consistency(p, spec, x, m, rng);
    worst_mc = std::max(worst_mc, mc.deviation);
    if (mc.deviation > band) ++mc_fail;
    const auto ex = exhaustive_consistency(p, spec, x);
    // machine precision relative to the size of the terms being averaged
    const double scale = std::max(1.0, norm2(drift_full(p, x)) + bound);
    worst_exhaustive = std::max(worst_exhaustive, ex.deviation / scale);
    const auto full = exhaustive_consistency(p, BatchSpec{p.components(), false}, x);
    worst_full = std::max(worst_full, full.deviation);
    res.row(static_cast<double>(j), "consistency_mc_deviation", mc.deviation);
  }
  res.row(static_cast<double>(m), "consistency_band", band);
  res.check_at_most("model: MC batch-drift deviation above 4B/sqrt(M) (count of " +
                        std::to_string(cfg.consistency_points) + " points)",
                    static_cast<double>(mc_fail), 0.0);
  res.check_at_most("model: exhaustive batch average deviation (relative)", worst_exhaustive,
                    8.0 * std::numeric_limits<double>::epsilon());
  res.check_at_most("model: full-batch deviation", worst_full, 0.0);

  const auto report = validate_metadata(p, &spec, rng);
  res.check_at_most("model: declared constants violated on linear target (count)",
                    static_cast<double>(report.dissipation_violations +
                                        report.lipschitz_violations +
                                        report.batch_bound_violations),
                    0.0);
  const auto mix = Potential::gaussian_mixture_1d({0.5, 0.5}, {-1.0, 1.0}, 0.5, 1.0, {-1.0, 1.0});
  const auto mix_report = validate_metadata(mix, &spec, rng);
  res.check_at_most("model: declared constants violated on mixture target (count)",
                    static_cast<double>(mix_report.dissipation_violations +
                                        mix_report.lipschitz_violations +
                                        mix_report.batch_bound_violations),
                    0.0);
  res.seconds = clock.seconds();
  return res;
}

/// E|X_t|^2 of the linear SGLD model against three times its stationary
/// scale, at every unit of time up to T = 100.
inline ExperimentResult moment_bound_suite(const ExperimentConfig& cfg, double eta = 0.1,
                                           double horizon = 100.0) {
  Stopwatch clock;
  ExperimentResult res;
  res.id = "verify";
  const Potential p = verify_detail::linear_model(cfg);
  const double a = require_linear(p, "moment bound").a;
  const BatchSpec spec = verify_detail::batch_of(cfg);
  const double s2 = intercept_variance(p, spec)[0];
  const auto d = static_cast<double>(p.dim());
  const InitialLaw init = build_initial(cfg.sampler, p.dim());
  const double start = dot(init.mean, init.mean) +
                       std::accumulate(init.var.begin(), init.var.end(), 0.0);
  const double stationary = d * (eta * s2 + 2.0 * cfg.sampler.beta_inv) / (a * (2.0 - eta * a)) +
                            verify_detail::max_batch_offset_sq(p, spec);
  const double bound = cfg.moment_bound_factor * std::max(start, stationary);

  SamplerConfig sc = build_sampler(cfg, StepSchedule::constant(eta), cfg.seed);
  sc.batch = spec;
  EnsembleOptions opt;
  opt.chains = cfg.sampler.chains;
  opt.threads = cfg.threads;
  opt.init = init;
  const auto steps = static_cast<std::size_t>(std::llround(horizon / eta));
  const auto per_unit = static_cast<std::size_t>(std::llround(1.0 / eta));
  for (std::size_t k = 0; k <= steps; k += per_unit) opt.record_at.push_back(k);
  opt.horizon = steps;

  double worst = 0.0;
  bool diverged = false;
  try {
    for (const auto& snap : run_ensemble(p, sc, opt)) {
      const double m2 = sample_moments(snap).mean_sq_norm;
      worst = std::max(worst, m2);
      res.row(snap.t, "second_moment", m2);
    }
  } catch (const DivergenceError& e) {
    diverged = true;
    res.notes.push_back(e.what());
  }
  res.row(eta, "second_moment_bound", bound);
  res.check_at_most("sampler: chains diverged", diverged ? 1.0 : 0.0, 0.0);
  res.check_at_most("sampler: max_t E|X_t|^2 (M=" + std::to_string(opt.chains) + ")", worst,
                    bound);
  res.seconds = clock.seconds();
  return res;
}

/// Metric axioms, W1 <= W2, quadrature KL vs closed form, and empirical W2 vs
/// the Gaussian formula.
inline ExperimentResult metric_suite(const ExperimentConfig& cfg, std::size_t w2_samples = 100000) {
  Stopwatch clock;
  ExperimentResult res;
  res.id = "verify";
  Stream rng(cfg.seed, 0x3E7'21C5);
  auto random_set = [&](std::size_t n) {
    SampleSet s;
    s.values.resize(n);
    const double shift = 2.0 * rng.normal(), scale = 0.5 + rng.uniform();
    for (double& v : s.values) v = shift + scale * rng.normal();
    return s;
  };
  std::size_t symmetry = 0, triangle = 0, identity = 0, jensen = 0;
  constexpr double kTol = 1e-12;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t n = 1 + rng.below(64);
    const auto x = random_set(n), y = random_set(n), z = random_set(n);
    const double w1xy = empirical_w1_1d(x, y), w1yx = empirical_w1_1d(y, x);
    const double w2xy = empirical_w2_1d(x, y), w2yx = empirical_w2_1d(y, x);
    const double w1xz = empirical_w1_1d(x, z), w1yz = empirical_w1_1d(y, z);
    const double w2xz = empirical_w2_1d(x, z), w2yz = empirical_w2_1d(y, z);
    symmetry += (std::abs(w1xy - w1yx) > kTol) + (std::abs(w2xy - w2yx) > kTol);
    triangle += (w1xz > w1xy + w1yz + kTol) + (w2xz > w2xy + w2yz + kTol);
    identity += (empirical_w1_1d(x, x) != 0.0) + (empirical_w2_1d(x, x) != 0.0);
    jensen += (w1xy > w2xy + kTol) + (w1xz > w2xz + kTol);
  }
  res.check_at_most("metrics: W1/W2 symmetry failures (1000 triples)", static_cast<double>(symmetry), 0.0);
  res.check_at_most("metrics: W1/W2 triangle failures (1000 triples)", static_cast<double>(triangle), 0.0);
  res.check_at_most("metrics: W(x, x) != 0 (1000 sets)", static_cast<double>(identity), 0.0);
  res.check_at_most("metrics: W1 > W2 (2000 pairs)", static_cast<double>(jensen), 0.0);

  double worst_quad = 0.0, worst_refine = 0.0;
  for (int i = 0; i < 100; ++i) {
    const double m1 = -3.0 + 6.0 * rng.uniform(), m2 = -3.0 + 6.0 * rng.uniform();
    const double v1 = 0.3 + 2.7 * rng.uniform(), v2 = 0.3 + 2.7 * rng.uniform();
    auto logn = [](double m, double v) {
      return [m, v](double x) {
        return -0.5 * std::log(2.0 * std::numbers::pi * v) - (x - m) * (x - m) / (2.0 * v);
      };
    };
    const double span = 12.0 * std::sqrt(std::max(v1, v2));
    const double lo = std::min(m1, m2) - span, hi = std::max(m1, m2) + span;
    const double q = kl_quadrature_1d(logn(m1, v1), logn(m2, v2), lo, hi, 4001);
    const double q2 = kl_quadrature_1d(logn(m1, v1), logn(m2, v2), lo, hi, 8001);
    const double exact = gaussian_kl({{m1}, {v1}}, {{m2}, {v2}});
    worst_quad = std::max(worst_quad, std::abs(q - exact));
    worst_refine = std::max(worst_refine, std::abs(q - q2));
  }
  res.row(0.0, "quadrature_kl_max_error", worst_quad);
  res.row(0.0, "quadrature_kl_refinement_change", worst_refine);
  res.check_at_most("metrics: |quadrature KL - closed form| (100 pairs)", worst_quad, 1e-6);
  res.check_at_most("metrics: quadrature x2 refinement change (100 pairs)", worst_refine, 1e-6);

  const double pairs[3][4] = {{0.0, 1.0, 0.5, 2.0}, {-1.0, 0.3, 1.0, 0.3}, {2.0, 3.0, 2.0, 1.0}};
  for (const auto& pr : pairs) {
    SampleSet x, y;
    x.values.resize(w2_samples);
    y.values.resize(w2_samples);
    for (double& v : x.values) v = pr[0] + std::sqrt(pr[1]) * rng.normal();
    for (double& v : y.values) v = pr[2] + std::sqrt(pr[3]) * rng.normal();
    const double emp = empirical_w2_1d(x, y);
    const double exact = gaussian_w2({{pr[0]}, {pr[1]}}, {{pr[2]}, {pr[3]}});
    const double tol = 5.0 / std::sqrt(static_cast<double>(w2_samples)) *
                       (1.0 + std::sqrt(pr[1]) + std::sqrt(pr[3]));
    res.check_at_most("metrics: |empirical W2 - Gaussian W2| for N(" + format_double(pr[0]) +
                          "," + format_double(pr[1]) + ") vs N(" + format_double(pr[2]) + "," +
                          format_double(pr[3]) + ")",
                      std::abs(emp - exact), tol);
  }
  res.seconds = clock.seconds();
  return res;
}

/// Schedule and envelope identities.
inline ExperimentResult schedule_suite(const ExperimentConfig& cfg) {
  using verify_detail::rel_err;
  Stopwatch clock;
  ExperimentResult res;
  res.id = "verify";
  (void)cfg;
  std::size_t monotone_fail = 0;
  for (double theta : {0.1, 0.3, 0.5, 0.8, 0.99}) {
    const auto s = StepSchedule::poly_decay(4, theta, 2000);
    const double end = s.grid_time(2000);
    double prev = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= 5000; ++i) {
      const double w = s.weight(end * i / 5000.0);
      if (w > prev) ++monotone_fail;
      prev = w;
    }
  }
  res.check_at_most("schedule: weight f increases somewhere (count)", static_cast<double>(monotone_fail), 0.0);

  double worst_analytic = 0.0, worst_curve = 0.0, worst_scaling = 0.0;
  bool monotone_limit = true;
  for (double eta : {0.2, 0.1, 0.05}) {
    const auto s = StepSchedule::constant(eta);
    const auto doubled = StepSchedule::constant(2.0 * eta);
    const BoundParams bp{1.0, 0.5, 2.0, 1};
    const auto curve = envelope_curve(s, bp, 400);
    const double limit = bp.c2 * eta * eta / bp.a0;
    double prev_gap = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k <= 400; k += (k < 20 ? 1 : 19)) {
      const double direct = bound_envelope(s, bp, k);
      const double tk = s.grid_time(k);
      const double analytic = bp.c1 * eta * eta * std::exp(-tk) + limit * (1.0 - std::exp(-tk));
      worst_analytic = std::max(worst_analytic, rel_err(direct, analytic));
      worst_curve = std::max(worst_curve, rel_err(curve[k], direct));
      // same time T_k: k steps of 2 eta against 2k steps of eta
      if (k % 2 == 0)
        worst_scaling = std::max(worst_scaling,
                                 rel_err(bound_envelope(doubled, bp, k / 2), 4.0 * direct));
      const double gap = std::abs(direct - limit);
      if (gap > prev_gap + 1e-12 * limit) monotone_limit = false;
      prev_gap = gap;
    }
  }
  res.check_at_most("schedule: envelope vs analytic constant-step form (relative)", worst_analytic, 1e-12);
  res.check_at_most("schedule: recursive envelope vs per-interval sum (relative)", worst_curve, 1e-12);
  res.check_at_most("schedule: envelope scaling under eta -> 2 eta (relative)", worst_scaling, 1e-12);
  res.check_at_most("schedule: envelope approaches its limit non-monotonically", monotone_limit ? 0.0 : 1.0, 0.0);
  res.seconds = clock.seconds();
  return res;
}

/// Closed-form law identities on random inputs.
inline ExperimentResult law_suite(const ExperimentConfig& cfg) {
  using verify_detail::rel_err;
  Stopwatch clock;
  ExperimentResult res;
  res.id = "verify";
  Stream rng(cfg.seed, 0x1A3);

  double worst_em = 0.0;
  for (int i = 0; i < 100; ++i) {
    const double eta = 0.001 + 0.498 * rng.uniform();
    const std::size_t k = rng.below(1001);
    const double a = 1.0, beta_inv = 0.5, x0 = 1.0;
    const auto law = em_law(a, beta_inv, Vec{x0}, Vec{0.0}, StepSchedule::constant(eta), k);
    const double c = 1.0 - eta * a;
    const double mean = std::pow(c, static_cast<double>(k)) * x0;
    const double var = 2.0 * beta_inv * eta * (1.0 - std::pow(c, 2.0 * static_cast<double>(k))) / (1.0 - c * c);
    worst_em = std::max(worst_em, std::abs(law.mean[0] - mean) / std::max(std::abs(mean), 1e-300));
    if (k > 0) worst_em = std::max(worst_em, rel_err(law.var[0], var));
  }
  res.check_at_most("law: ULA law vs geometric closed form (100 random eta, k)", worst_em, 1e-10);

  std::size_t lb_fail = 0, product_fail = 0;
  for (int i = 0; i < 10000; ++i) {
    GaussianLaw p{{-3.0 + 6.0 * rng.uniform()}, {0.05 + 3.0 * rng.uniform()}};
    GaussianLaw q{{-3.0 + 6.0 * rng.uniform()}, {0.05 + 3.0 * rng.uniform()}};
    if (gaussian_kl(p, q) < kl_mean_lower_bound(p, q)) ++lb_fail;
    if (i < 100) {
      const std::size_t d = 1 + rng.below(8);
      const double one = gaussian_kl(p, q);
      const double many = gaussian_kl(GaussianLaw::isotropic(d, p.mean[0], p.var[0]),
                                      GaussianLaw::isotropic(d, q.mean[0], q.var[0]));
      if (rel_err(many, static_cast<double>(d) * one) > 1e-12) ++product_fail;
    }
  }
  res.check_at_most("law: KL below mean lower bound (10000 pairs)", static_cast<double>(lb_fail), 0.0);
  res.check_at_most("law: isotropic KL != d * 1-D KL (100 cases)", static_cast<double>(product_fail), 0.0);

  double worst_ode = 0.0;
  for (int i = 0; i < 100; ++i) {
    const double a = 0.2 + 2.0 * rng.uniform(), beta_inv = 0.1 + rng.uniform();
    const double t = 0.01 + 5.0 * rng.uniform(), h = 1e-4;
    const Vec m0{-2.0 + 4.0 * rng.uniform()}, v0{2.0 * rng.uniform()};
    const auto lo = ou_exact_law(a, beta_inv, m0, v0, t - h);
    const auto mid = ou_exact_law(a, beta_inv, m0, v0, t);
    const auto hi = ou_exact_law(a, beta_inv, m0, v0, t + h);
    const double dm = (hi.mean[0] - lo.mean[0]) / (2.0 * h);
    const double dv = (hi.var[0] - lo.var[0]) / (2.0 * h);
    worst_ode = std::max({worst_ode, std::abs(dm + a * mid.mean[0]),
                          std::abs(dv + 2.0 * a * mid.var[0] - 2.0 * beta_inv)});
  }
  res.check_at_most("law: exact law vs moment ODEs (finite difference, h=1e-4)", worst_ode, 1e-6);
  res.seconds = clock.seconds();
  return res;
}

/// One-step exactness, S = N reproducing ULA, and ULA ensemble moments
/// against the closed-form law.
inline ExperimentResult sampler_suite(const ExperimentConfig& cfg) {
  Stopwatch clock;
  ExperimentResult res;
  res.id = "verify";
  const Potential p = verify_detail::linear_model(cfg);
  const double beta_inv = cfg.sampler.beta_inv, eta = cfg.mc_eta;
  SamplerConfig ula;
  ula.beta_inv = beta_inv;
  ula.schedule = StepSchedule::constant(eta);
  ula.seed = cfg.seed;

  // one step from a point mass
  {
    EnsembleOptions opt;
    opt.chains = cfg.mc_chains;
    opt.horizon = 1;
    opt.threads = cfg.threads;
    opt.init = InitialLaw::point(Vec(p.dim(), 0.7));
    const auto snap = run_ensemble(p, ula, opt).front();
    const auto mom = sample_moments(snap);
    const double mean = 0.7 + eta * drift_full(p, opt.init.mean)[0];
    const double var = 2.0 * beta_inv * eta;
    res.check_at_most("sampler: one-step mean error / se", std::abs(mom.mean[0] - mean) / mom.mean_se[0],
                      cfg.mc_sigmas);
    res.check_at_most("sampler: one-step variance error / se", std::abs(mom.var[0] - var) / mom.var_se[0],
                      cfg.mc_sigmas);
  }

  // S = N with shared noise reproduces ULA bit for bit
  if (p.finite_sum()) {
    SamplerConfig full = ula;
    full.batch = BatchSpec{p.components(), false};
    EnsembleOptions opt;
    opt.chains = 64;
    opt.horizon = 200;
    opt.threads = cfg.threads;
    opt.init = build_initial(cfg.sampler, p.dim());
    const auto u = run_ensemble(p, ula, opt);
    const auto s = run_ensemble(p, full, opt);
    res.check_at_most("sampler: |SGLD(S=N) - ULA| over 64 chains x 200 steps",
                      max_abs_diff(u.front().positions, s.front().positions), 0.0);
  }

  // ULA ensemble vs closed-form law at 10 checkpoints
  {
    const double a = require_linear(p, "sampler suite").a;
    const auto steps = static_cast<std::size_t>(std::llround(cfg.horizon_t / eta));
    EnsembleOptions opt;
    opt.chains = cfg.mc_chains;
    opt.horizon = steps;
    opt.threads = cfg.threads;
    opt.init = build_initial(cfg.sampler, p.dim());
    for (std::size_t j = 1; j <= 10; ++j) opt.record_at.push_back(steps * j / 10);
    std::size_t fails = 0, total = 0;
    for (const auto& snap : run_ensemble(p, ula, opt)) {
      const auto law = em_law(a, beta_inv, opt.init.mean, opt.init.var, ula.schedule, snap.k);
      const auto mom = sample_moments(snap);
      for (std::size_t c = 0; c < p.dim(); ++c) {
        total += 2;
        fails += (std::abs(mom.mean[c] - law.mean[c]) > cfg.mc_sigmas * mom.mean_se[c]) +
                 (std::abs(mom.var[c] - law.var[c]) > cfg.mc_sigmas * mom.var_se[c]);
      }
    }
    res.check_at_most("sampler: ULA ensemble moments outside " + format_double(cfg.mc_sigmas) +
                          " se (count of " + std::to_string(total) + ")",
                      static_cast<double>(fails), 0.0);
  }
  res.seconds = clock.seconds();
  return res;
}

/// Sub-experiment config: the reference settings for `kind` with the run
/// controls of `cfg` carried over.
inline ExperimentConfig derived_config(const ExperimentConfig& cfg, ExperimentKind kind) {
  ExperimentConfig c = defaults_for(kind);
  c.seed = cfg.seed;
  c.threads = cfg.threads;
  c.kl_order = cfg.kl_order;
  c.mc_sigmas = cfg.mc_sigmas;
  if (kind == ExperimentKind::SgldSweep) c.mc_chains = cfg.mc_chains;
  return c;
}

/// Every property suite, then the consistency, moment-bound and contraction
/// checks and the closed-form sweeps.
inline ExperimentResult verify(const ExperimentConfig& cfg) {
  Stopwatch clock;
  ExperimentResult res;
  res.id = "verify";
  res.merge(closed_form_suite(cfg));
  res.merge(consistency_suite(cfg));
  res.merge(moment_bound_suite(cfg));
  res.merge(metric_suite(cfg));
  res.merge(schedule_suite(cfg));
  res.merge(law_suite(cfg));
  res.merge(sampler_suite(cfg));
  for (auto kind : {ExperimentKind::Contraction, ExperimentKind::RateSweep,
                    ExperimentKind::ScheduleDecay, ExperimentKind::SgldSweep}) {
    auto sub = run_experiment(derived_config(cfg, kind));
    for (auto& row : sub.rows) row.experiment = "verify/" + row.experiment;
    res.merge(std::move(sub));
  }
  res.id = "verify";
  res.seconds = clock.seconds();
  return res;
}

inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  switch (cfg.kind) {
    case ExperimentKind::RateSweep: return rate_sweep(cfg);
    case ExperimentKind::ScheduleDecay: return schedule_decay(cfg);
    case ExperimentKind::SgldSweep: return sgld_sweep(cfg);
    case ExperimentKind::StationaryBias: return stationary_bias(cfg);
    case ExperimentKind::Contraction: return contraction(cfg);
    case ExperimentKind::Verify: return verify(cfg);
  }
  throw std::logic_error("unhandled experiment kind");
}

}  // namespace sgld
