#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "sgld/config.hpp"
#include "sgld/law.hpp"
#include "sgld/metrics.hpp"
#include "sgld/model.hpp"
#include "sgld/sampler.hpp"
#include "sgld/schedule.hpp"

namespace sgld {

/// One CSV line: experiment, parameter, metric, value, stderr.
struct ResultRow {
  std::string experiment;
  double parameter = 0.0;
  std::string metric;
  double value = 0.0;
  double std_error = 0.0;
};

/// One verdict line of the report.
struct Check {
  std::string name;
  std::string expected;
  double observed = 0.0;
  bool pass = false;
};

/// Two-column data for one figure.
/// Compact %g rendering for labels such as plot file names.
inline std::string short_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

struct PlotSeries {
  std::string name;
  std::vector<std::pair<double, double>> points;
};

struct ExperimentResult {
  std::string id;
  std::vector<ResultRow> rows;
  std::vector<Check> checks;
  std::vector<PlotSeries> plots;
  std::vector<std::string> notes;
  std::vector<RateFit> fits;
  std::vector<Snapshot> samples;  // kept only when dump_samples is set
  double seconds = 0.0;

  bool passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
  }

  void row(double parameter, std::string metric, double value, double se = 0.0) {
    rows.push_back({id, parameter, std::move(metric), value, se});
  }

  void check_window(std::string name, double observed, double lo, double hi) {
    std::ostringstream e;
    e << "[" << lo << ", " << hi << "]";
    checks.push_back({std::move(name), e.str(), observed, observed >= lo && observed <= hi});
  }

  void check_at_most(std::string name, double observed, double bound) {
    std::ostringstream e;
    e << "<= " << format_double(bound);
    checks.push_back({std::move(name), e.str(), observed, observed <= bound});
  }

  void check_at_least(std::string name, double observed, double bound) {
    std::ostringstream e;
    e << ">= " << format_double(bound);
    checks.push_back({std::move(name), e.str(), observed, observed >= bound});
  }

  void merge(ExperimentResult&& other) {
    for (auto& r : other.rows) rows.push_back(std::move(r));
    for (auto& c : other.checks) checks.push_back(std::move(c));
    for (auto& p : other.plots) plots.push_back(std::move(p));
    for (auto& n : other.notes) notes.push_back(std::move(n));
    for (auto& f : other.fits) fits.push_back(f);
    for (auto& s : other.samples) samples.push_back(std::move(s));
  }
};

// ---------------------------------------------------------------------------
// Builders

inline Potential build_potential(const PotentialSpec& spec, double beta_inv) {
  if (spec.kind == "mixture")
    return Potential::gaussian_mixture_1d(spec.weights, spec.means, spec.variance, beta_inv,
                                          spec.gradient_offsets);
  std::vector<Vec> offsets;
  for (const auto& z : spec.offsets) {
    if (z.size() == 1 && spec.dim > 1)
      offsets.emplace_back(spec.dim, z[0]);
    else
      offsets.push_back(z);
  }
  return Potential::linear_drift(spec.dim, spec.a, std::move(offsets));
}

/// Step cap Delta_0 = step_cap, or 1 / (2 L) when unset.
inline double step_cap(const ScheduleSpec& spec, double lipschitz) {
  if (spec.step_cap > 0.0) return spec.step_cap;
  return lipschitz > 0.0 ? 1.0 / (2.0 * lipschitz) : std::numeric_limits<double>::infinity();
}

inline StepSchedule build_schedule(const ScheduleSpec& spec, double lipschitz,
                                   std::size_t horizon_hint = 0) {
  if (spec.kind == "constant") return StepSchedule::constant(spec.eta);
  if (spec.kind == "explicit") return StepSchedule::explicit_steps(spec.steps);
  if (spec.enforce_step_cap)
    return StepSchedule::poly_decay_capped(spec.theta, step_cap(spec, lipschitz), spec.ell,
                                           horizon_hint);
  return StepSchedule::poly_decay(spec.ell, spec.theta, horizon_hint);
}

inline SamplerConfig build_sampler(const ExperimentConfig& cfg, StepSchedule schedule,
                                   std::uint64_t seed) {
  SamplerConfig s;
  s.beta_inv = cfg.sampler.beta_inv;
  s.schedule = std::move(schedule);
  if (cfg.sampler.batch_size > 0)
    s.batch = BatchSpec{cfg.sampler.batch_size, cfg.sampler.replacement};
  s.seed = seed;
  return s;
}

inline InitialLaw build_initial(const SamplerSpec& s, std::size_t dim) {
  require(!s.x0.empty() && !s.v0.empty(), "initial mean and variance must be given");
  InitialLaw init{Vec(dim), Vec(dim)};
  for (std::size_t c = 0; c < dim; ++c) {
    init.mean[c] = s.x0.size() == 1 ? s.x0[0] : s.x0.at(c);
    init.var[c] = s.v0.size() == 1 ? s.v0[0] : s.v0.at(c);
  }
  return init;
}

// ---------------------------------------------------------------------------
// Shared numerics

/// D_KL(discrete || exact) by default; the other order when configured.
inline double ordered_kl(const GaussianLaw& discrete, const GaussianLaw& exact, KlOrder o) {
  return o == KlOrder::DiscreteExact ? gaussian_kl(discrete, exact)
                                     : gaussian_kl(exact, discrete);
}

inline double ordered_lower_bound(const GaussianLaw& discrete, const GaussianLaw& exact,
                                  KlOrder o) {
  return o == KlOrder::DiscreteExact ? kl_mean_lower_bound(discrete, exact)
                                     : kl_mean_lower_bound(exact, discrete);
}

/// Least-squares slope of y against x.
inline double linear_slope(std::span<const double> x, std::span<const double> y) {
  const auto n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  return sxy / sxx;
}

/// Exponential rate at which D_KL(rho_t || pi) of the exact linear diffusion
/// decays from the configured off-equilibrium start, fitted on t in [1, 10].
/// Falls back to 2a when the start is already at equilibrium.
inline double fit_relaxation_rate(double a, double beta_inv, std::span<const double> m0,
                                  std::span<const double> v0) {
  const GaussianLaw stationary =
      GaussianLaw::isotropic(m0.size(), 0.0, beta_inv / a);
  Vec ts, logs;
  for (double t = 1.0; t <= 10.0 + 1e-12; t += 0.25) {
    const double kl = gaussian_kl(ou_exact_law(a, beta_inv, m0, v0, t), stationary);
    if (kl > 1e-280) {
      ts.push_back(t);
      logs.push_back(std::log(kl));
    }
  }
  if (ts.size() < 4) return 2.0 * a;
  const double rate = -linear_slope(ts, logs);
  return rate > 0.0 && std::isfinite(rate) ? rate : 2.0 * a;
}

struct EnvelopeFit {
  BoundParams params;
  std::vector<double> envelope;  // k = 0..K
  std::size_t violations = 0;
  double min_ratio = std::numeric_limits<double>::infinity();  // envelope / KL
};

/// Fits the envelope to a KL curve (index k = 0..K, entry 0 ignored).
/// Both laws start from the same initial law, so the warm-start term c1 is
/// KL_0 / eta_0^2 = 0 and c2 = max_k KL_k / shape_k with
/// shape_k = d int_0^{T_k} e^{-A0 (T_k - s)} f(s) ds. Dominance is then
/// re-checked pointwise on the evaluated envelope.
inline EnvelopeFit fit_envelope(const StepSchedule& sched, std::span<const double> kl,
                                double a0, std::size_t d, double initial_kl = 0.0) {
  require(kl.size() >= 2, "envelope fit needs at least one checkpoint");
  const std::size_t K = kl.size() - 1;
  const double h0 = sched.step(0);
  EnvelopeFit fit;
  fit.params = {a0, initial_kl / (h0 * h0), 0.0, d};
  const auto shape = envelope_curve(sched, {a0, 0.0, 1.0, d}, K);
  double c2 = 0.0;
  for (std::size_t k = 1; k <= K; ++k)
    if (shape[k] > 0.0) c2 = std::max(c2, kl[k] / shape[k]);
  // rounding guard so the maximizing checkpoint is not lost to the last ulp
  fit.params.c2 = c2 * (1.0 + 1e-12);
  fit.envelope = envelope_curve(sched, fit.params, K);
  for (std::size_t k = 1; k <= K; ++k) {
    if (fit.envelope[k] < kl[k]) ++fit.violations;
    if (kl[k] > 0.0) fit.min_ratio = std::min(fit.min_ratio, fit.envelope[k] / kl[k]);
  }
  return fit;
}

inline std::vector<std::pair<double, double>> to_points(std::span<const double> x,
                                                        std::span<const double> y) {
  std::vector<std::pair<double, double>> pts;
  for (std::size_t i = 0; i < x.size(); ++i) pts.emplace_back(x[i], y[i]);
  return pts;
}

/// Roughly log-spaced subset of 1..K for plotting.
inline std::vector<std::size_t> log_spaced(std::size_t K, std::size_t count = 200) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < count; ++i) {
    const auto k = static_cast<std::size_t>(
        std::llround(std::pow(static_cast<double>(K), static_cast<double>(i) / (count - 1))));
    if (out.empty() || k > out.back()) out.push_back(std::clamp<std::size_t>(k, 1, K));
  }
  return out;
}

inline void require_decreasing_grid(const Vec& grid, std::size_t min_size) {
  require(grid.size() >= min_size,
          "step grid needs at least " + std::to_string(min_size) + " values");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    require(grid[i] > 0.0, "step grid values must be positive");
    if (i > 0) require(grid[i] < grid[i - 1], "step grid must be strictly decreasing");
  }
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

// ---------------------------------------------------------------------------
// Closed-form sweep over constant steps (shared by rate-sweep and sgld-sweep)

struct SweepPoint {
  double eta = 0.0;
  std::size_t steps = 0;
  std::vector<double> kl;  // k = 0..K, entry 0 unused
  Vec times;
  double sup_kl = 0.0;
  double sup_time = 0.0;
  double final_w2 = 0.0;
  double sup_var_gap = 0.0;
  std::size_t lower_bound_violations = 0;
  std::optional<std::size_t> steps_to_eps;
  EnvelopeFit envelope;
};

inline SweepPoint closed_form_sweep_point(double a, double beta_inv, double s2, double x0,
                                          double v0, double eta, double horizon,
                                          KlOrder order, double a0, double w2_eps) {
  SweepPoint pt;
  pt.eta = eta;
  pt.steps = static_cast<std::size_t>(std::llround(horizon / eta));
  require(pt.steps >= 1, "horizon shorter than one step");
  const auto sched = StepSchedule::constant(eta);
  pt.times = sched.grid_times(pt.steps);
  pt.kl.assign(pt.steps + 1, 0.0);
  const Vec m0{x0}, var0{v0};
  const GaussianLaw stationary = GaussianLaw::isotropic(1, 0.0, beta_inv / a);
  linear_moment_recursion(
      a, beta_inv, s2, m0, var0, sched, pt.steps, [&](std::size_t k, const MomentLaw& law) {
        if (k == 0) return;
        const GaussianLaw discrete = law.as_gaussian();
        const GaussianLaw exact = ou_exact_law(a, beta_inv, m0, var0, pt.times[k]);
        const double kl = ordered_kl(discrete, exact, order);
        pt.kl[k] = kl;
        if (kl > pt.sup_kl) {
          pt.sup_kl = kl;
          pt.sup_time = pt.times[k];
        }
        if (ordered_lower_bound(discrete, exact, order) > kl) ++pt.lower_bound_violations;
        pt.sup_var_gap = std::max(pt.sup_var_gap, std::abs(discrete.var[0] - exact.var[0]));
        if (!pt.steps_to_eps && gaussian_w2(discrete, stationary) <= w2_eps) pt.steps_to_eps = k;
        if (k == pt.steps) pt.final_w2 = gaussian_w2(discrete, exact);
      });
  pt.envelope = fit_envelope(sched, pt.kl, a0, 1);
  return pt;
}

inline const LinearDrift& require_linear(const Potential& p, const char* experiment) {
  const auto* lin = std::get_if<LinearDrift>(&p.kind());
  if (lin == nullptr)
    throw Unsupported(std::string(experiment) + " needs a linear-drift potential");
  return *lin;
}

// ---------------------------------------------------------------------------
// rate-sweep

/// Exact ULA vs diffusion KL over a constant-step grid: sup-in-time KL slope,
/// terminal W2 slope, mean lower bound at every checkpoint, envelope
/// dominance, and linear-in-d scaling.
inline ExperimentResult rate_sweep(const ExperimentConfig& cfg) {
  Stopwatch clock;
  ExperimentResult res;
  res.id = "rate-sweep";
  require_decreasing_grid(cfg.eta_grid, 3);
  const Potential p = build_potential(cfg.potential, cfg.sampler.beta_inv);
  const double a = require_linear(p, "rate-sweep").a;
  const double beta_inv = cfg.sampler.beta_inv;
  const double x0 = cfg.sampler.x0.at(0), v0 = cfg.sampler.v0.at(0);
  const Vec m0v{x0}, v0v{v0};
  const double a0 = cfg.a0 > 0.0 ? cfg.a0 : fit_relaxation_rate(a, beta_inv, m0v, v0v);
  res.row(0.0, "envelope_a0", a0);

  std::vector<std::pair<double, double>> kl_pts, w2_pts;
  std::size_t lb_violations = 0, env_violations = 0, checkpoints = 0;
  for (double eta : cfg.eta_grid) {
    if (!(eta * a < 2.0)) {
      res.row(eta, "unstable_step", eta * a);
      res.notes.push_back("eta = " + format_double(eta) + " skipped: eta * a >= 2");
      continue;
    }
    const auto pt =
        closed_form_sweep_point(a, beta_inv, 0.0, x0, v0, eta, cfg.horizon_t, cfg.kl_order,
                                a0, cfg.w2_eps);
    require(pt.steps >= cfg.checkpoints, "horizon yields fewer than the required checkpoints");
    res.row(eta, "sup_kl", pt.sup_kl);
    res.row(eta, "sup_kl_time", pt.sup_time);
    res.row(eta, "final_w2", pt.final_w2);
    res.row(eta, "lower_bound_violations", static_cast<double>(pt.lower_bound_violations));
    res.row(eta, "envelope_c1", pt.envelope.params.c1);
    res.row(eta, "envelope_c2", pt.envelope.params.c2);
    res.row(eta, "envelope_violations", static_cast<double>(pt.envelope.violations));
    if (pt.steps_to_eps) res.row(eta, "steps_to_w2_eps", static_cast<double>(*pt.steps_to_eps));
    kl_pts.emplace_back(eta, pt.sup_kl);
    w2_pts.emplace_back(eta, pt.final_w2);
    lb_violations += pt.lower_bound_violations;
    env_violations += pt.envelope.violations;
    checkpoints += pt.steps;

    PlotSeries curve{"kl_curve_eta_" + short_label(eta), {}};
    PlotSeries env{"envelope_eta_" + short_label(eta), {}};
    for (std::size_t k : log_spaced(pt.steps)) {
      curve.points.emplace_back(pt.times[k], pt.kl[k]);
      env.points.emplace_back(pt.times[k], pt.envelope.envelope[k]);
    }
    res.plots.push_back(std::move(curve));
    res.plots.push_back(std::move(env));
  }
  require(kl_pts.size() >= 2, "rate sweep needs at least two stable step sizes");

  const RateFit kl_fit = loglog_slope(kl_pts);
  const RateFit w2_fit = loglog_slope(w2_pts);
  res.fits = {kl_fit, w2_fit};
  res.row(0.0, "kl_slope", kl_fit.slope);
  res.row(0.0, "kl_intercept", kl_fit.intercept);
  res.row(0.0, "kl_r2", kl_fit.r2);
  res.row(0.0, "w2_slope", w2_fit.slope);
  res.row(0.0, "w2_intercept", w2_fit.intercept);
  res.row(0.0, "w2_r2", w2_fit.r2);
  res.plots.push_back({"kl_vs_eta", kl_pts});
  res.plots.push_back({"w2_vs_eta", w2_pts});

  res.check_window("rate-sweep: sup-in-time KL slope", kl_fit.slope, cfg.kl_slope_min,
                   cfg.kl_slope_max);
  res.check_window("rate-sweep: terminal W2 slope", w2_fit.slope, cfg.w2_slope_min,
                   cfg.w2_slope_max);
  res.check_at_most("rate-sweep: mean lower bound above KL (count over " +
                        std::to_string(checkpoints) + " checkpoints)",
                    static_cast<double>(lb_violations), 0.0);
  res.check_at_most("rate-sweep: envelope below KL (count over " +
                        std::to_string(checkpoints) + " checkpoints)",
                    static_cast<double>(env_violations), 0.0);
  if (kl_pts.size() >= 3) {
    const RateFit trimmed =
        loglog_slope(std::span<const std::pair<double, double>>(kl_pts).subspan(1));
    res.row(0.0, "kl_slope_without_largest_eta", trimmed.slope);
    res.check_at_most("rate-sweep: KL slope change when dropping largest eta",
                      std::abs(trimmed.slope - kl_fit.slope), cfg.slope_stability);
  }

  // Isotropic dimension scaling at the largest stable step and final time.
  if (!cfg.dims.empty()) {
    const double eta = kl_pts.front().first;
    const auto sched = StepSchedule::constant(eta);
    const auto steps = static_cast<std::size_t>(std::llround(cfg.horizon_t / eta));
    double base = 0.0, worst = 0.0;
    for (std::size_t d : cfg.dims) {
      const Vec m(d, x0), v(d, v0);
      const double kl = ordered_kl(em_law(a, beta_inv, m, v, sched, steps),
                                   ou_exact_law(a, beta_inv, m, v, sched.grid_time(steps)),
                                   cfg.kl_order);
      const double per_dim = kl / static_cast<double>(d);
      if (base == 0.0) base = per_dim;
      worst = std::max(worst, std::abs(per_dim - base) / base);
      res.row(static_cast<double>(d), "kl_per_dim", per_dim);
    }
    res.check_at_most("rate-sweep: KL(d)/d relative spread", worst, 1e-12);
  }
  res.seconds = clock.seconds();
  return res;
}

// ---------------------------------------------------------------------------
// schedule-decay

/// KL at T_k under (ell + k)^(-theta) steps; slope of ln KL vs ln k on
/// k in [K/4, K] and envelope dominance over every k.
inline ExperimentResult schedule_decay(const ExperimentConfig& cfg) {
  Stopwatch clock;
  ExperimentResult res;
  res.id = "schedule-decay";
  const Potential p = build_potential(cfg.potential, cfg.sampler.beta_inv);
  const double a = require_linear(p, "schedule-decay").a;
  const double beta_inv = cfg.sampler.beta_inv;
  const Vec m0{cfg.sampler.x0.at(0)}, v0{cfg.sampler.v0.at(0)};
  const std::size_t K = cfg.horizon_k;
  require(K >= 8 && K / 4 >= cfg.checkpoints, "horizon_k too small for a decay fit");
  Vec thetas = cfg.theta_list;
  if (thetas.empty()) thetas.push_back(cfg.schedule.theta);
  const double a0 = cfg.a0 > 0.0 ? cfg.a0 : fit_relaxation_rate(a, beta_inv, m0, v0);
  res.row(0.0, "envelope_a0", a0);
  const double cap = step_cap(cfg.schedule, p.metadata().lipschitz);

  for (double theta : thetas) {
    require(theta > 0.0 && theta < 1.0, "theta must lie in (0, 1)");
    ScheduleSpec spec = cfg.schedule;
    spec.kind = "poly_decay";
    spec.theta = theta;
    const StepSchedule sched = build_schedule(spec, p.metadata().lipschitz, K);
    if (sched.step(0) > cap) {
      res.row(theta, "step_cap_exceeded", sched.step(0));
      res.notes.push_back("theta = " + format_double(theta) + ": eta_0 = " +
                          format_double(sched.step(0)) + " exceeds the step cap " +
                          format_double(cap) + " (set enforce_step_cap = true to raise ell)");
    }
    const auto times = sched.grid_times(K);
    std::vector<double> kl(K + 1, 0.0);
    std::size_t lb_violations = 0;
    linear_moment_recursion(a, beta_inv, 0.0, m0, v0, sched, K,
                            [&](std::size_t k, const MomentLaw& law) {
                              if (k == 0) return;
                              const auto discrete = law.as_gaussian();
                              const auto exact = ou_exact_law(a, beta_inv, m0, v0, times[k]);
                              kl[k] = ordered_kl(discrete, exact, cfg.kl_order);
                              if (ordered_lower_bound(discrete, exact, cfg.kl_order) > kl[k])
                                ++lb_violations;
                            });
    std::vector<std::pair<double, double>> window;
    for (std::size_t k = K / 4; k <= K; ++k)
      window.emplace_back(static_cast<double>(k), kl[k]);
    const RateFit fit = loglog_slope(window);
    res.fits.push_back(fit);
    const EnvelopeFit env = fit_envelope(sched, kl, a0, 1);

    res.row(theta, "ell", static_cast<double>(sched.ell()));
    res.row(theta, "kl_slope", fit.slope);
    res.row(theta, "kl_intercept", fit.intercept);
    res.row(theta, "kl_r2", fit.r2);
    res.row(theta, "kl_final", kl[K]);
    res.row(theta, "grid_time_final", times[K]);
    res.row(theta, "envelope_c1", env.params.c1);
    res.row(theta, "envelope_c2", env.params.c2);
    res.row(theta, "envelope_violations", static_cast<double>(env.violations));
    res.row(theta, "lower_bound_violations", static_cast<double>(lb_violations));

    const std::string tag = "theta=" + format_double(theta);
    res.check_window("schedule-decay: KL slope vs k, " + tag, fit.slope,
                     -2.0 * theta - cfg.decay_slope_tol, -2.0 * theta + cfg.decay_slope_tol);
    res.check_at_most("schedule-decay: envelope below KL (count over " + std::to_string(K) +
                          " checkpoints), " + tag,
                      static_cast<double>(env.violations), 0.0);
    res.check_at_most("schedule-decay: mean lower bound above KL, " + tag,
                      static_cast<double>(lb_violations), 0.0);

    PlotSeries curve{"kl_vs_k_theta_" + short_label(theta), {}};
    PlotSeries envelope{"envelope_vs_k_theta_" + short_label(theta), {}};
    for (std::size_t k : log_spaced(K)) {
      curve.points.emplace_back(static_cast<double>(k), kl[k]);
      envelope.points.emplace_back(static_cast<double>(k), env.envelope[k]);
    }
    res.plots.push_back(std::move(curve));
    res.plots.push_back(std::move(envelope));
  }
  res.seconds = clock.seconds();
  return res;
}

// ---------------------------------------------------------------------------
// sgld-sweep

struct MomentComparison {
  std::size_t comparisons = 0;
  std::size_t failures = 0;
  double worst_z = 0.0;
};

/// Ensemble mean/variance vs the SGLD moment recursion at evenly spaced
/// checkpoints, in units of Monte Carlo standard errors.
inline MomentComparison compare_ensemble_moments(ExperimentResult& res, const Potential& p,
                                                 const ExperimentConfig& cfg, double eta,
                                                 double s2, std::size_t chains,
                                                 std::size_t checkpoints) {
  const double a = require_linear(p, "moment comparison").a;
  const auto steps = static_cast<std::size_t>(std::llround(cfg.horizon_t / eta));
  require(steps >= checkpoints, "horizon yields fewer than the required checkpoints");
  SamplerConfig sc = build_sampler(cfg, StepSchedule::constant(eta), cfg.seed);
  EnsembleOptions opt;
  opt.chains = chains;
  opt.horizon = steps;
  opt.threads = cfg.threads;
  opt.init = build_initial(cfg.sampler, p.dim());
  for (std::size_t j = 1; j <= checkpoints; ++j) opt.record_at.push_back(steps * j / checkpoints);
  const auto snaps = run_ensemble(p, sc, opt);

  MomentComparison out;
  for (const auto& snap : snaps) {
    const auto law = sgld_moment_law(a, cfg.sampler.beta_inv, s2, opt.init.mean, opt.init.var,
                                      sc.schedule, snap.k);
    const auto mom = sample_moments(snap);
    for (std::size_t c = 0; c < p.dim(); ++c) {
      const double zm = std::abs(mom.mean[c] - law.mean[c]) / mom.mean_se[c];
      const double zv = std::abs(mom.var[c] - law.var[c]) / mom.var_se[c];
      out.comparisons += 2;
      out.failures += (zm > cfg.mc_sigmas) + (zv > cfg.mc_sigmas);
      out.worst_z = std::max({out.worst_z, zm, zv});
      res.row(snap.t, "mc_mean", mom.mean[c], mom.mean_se[c]);
      res.row(snap.t, "law_mean", law.mean[c]);
      res.row(snap.t, "mc_var", mom.var[c], mom.var_se[c]);
      res.row(snap.t, "law_var", law.var[c]);
    }
  }
  const auto& last = snaps.back();
  const auto mom = sample_moments(last);
  const double fixed_point = (eta * s2 + 2.0 * cfg.sampler.beta_inv) / (a * (2.0 - eta * a));
  res.row(eta, "stationary_var_fixed_point", fixed_point);
  res.row(eta, "stationary_var_mc", mom.var[0], mom.var_se[0]);
  res.check_at_most("sgld-sweep: |MC stationary variance - fixed point| / se at eta=" +
                        format_double(eta),
                    std::abs(mom.var[0] - fixed_point) / mom.var_se[0], cfg.mc_sigmas);
  return out;
}

/// Surrogate-KL sweep for SGLD on a linear target with random intercepts,
/// plus ensemble verification of the moment recursion.
inline ExperimentResult sgld_sweep(const ExperimentConfig& cfg, bool with_monte_carlo = true) {
  Stopwatch clock;
  ExperimentResult res;
  res.id = "sgld-sweep";
  require_decreasing_grid(cfg.eta_grid, 3);
  const Potential p = build_potential(cfg.potential, cfg.sampler.beta_inv);
  const double a = require_linear(p, "sgld-sweep").a;
  require(p.dim() == 1, "sgld-sweep runs on a one-dimensional linear target");
  const double beta_inv = cfg.sampler.beta_inv;
  double s2 = 0.0;
  if (cfg.sampler.batch_size > 0)
    s2 = intercept_variance(p, BatchSpec{cfg.sampler.batch_size, cfg.sampler.replacement})[0];
  res.row(0.0, "intercept_variance", s2);
  const double x0 = cfg.sampler.x0.at(0), v0 = cfg.sampler.v0.at(0);
  const Vec m0v{x0}, v0v{v0};
  const double a0 = cfg.a0 > 0.0 ? cfg.a0 : fit_relaxation_rate(a, beta_inv, m0v, v0v);

  std::vector<std::pair<double, double>> kl_pts;
  std::vector<std::pair<double, double>> gap_pts;
  std::size_t env_violations = 0;
  for (double eta : cfg.eta_grid) {
    if (!(eta * a < 2.0)) {
      res.row(eta, "unstable_step", eta * a);
      continue;
    }
    const auto pt = closed_form_sweep_point(a, beta_inv, s2, x0, v0, eta, cfg.horizon_t,
                                            cfg.kl_order, a0, cfg.w2_eps);
    res.row(eta, "sup_surrogate_kl", pt.sup_kl);
    res.row(eta, "sup_var_gap", pt.sup_var_gap);
    res.row(eta, "final_w2", pt.final_w2);
    res.row(eta, "envelope_violations", static_cast<double>(pt.envelope.violations));
    kl_pts.emplace_back(eta, pt.sup_kl);
    gap_pts.emplace_back(eta, pt.sup_var_gap);
    env_violations += pt.envelope.violations;
  }
  require(kl_pts.size() >= 2, "sgld sweep needs at least two stable step sizes");
  const RateFit fit = loglog_slope(kl_pts);
  res.fits.push_back(fit);
  res.row(0.0, "surrogate_kl_slope", fit.slope);
  res.row(0.0, "surrogate_kl_intercept", fit.intercept);
  res.row(0.0, "surrogate_kl_r2", fit.r2);
  res.plots.push_back({"surrogate_kl_vs_eta", kl_pts});
  res.plots.push_back({"var_gap_vs_eta", gap_pts});
  res.check_window("sgld-sweep: sup-in-time surrogate KL slope", fit.slope,
                   cfg.surrogate_slope_min, cfg.surrogate_slope_max);
  res.check_at_most("sgld-sweep: envelope below surrogate KL (count)",
                    static_cast<double>(env_violations), 0.0);

  // sup_t |v_sgld - v_exact| <= C eta with C fitted at the largest step.
  const double c_gap = gap_pts.front().second / gap_pts.front().first;
  double worst = 0.0;
  for (const auto& [eta, gap] : gap_pts) worst = std::max(worst, gap / (c_gap * eta));
  res.row(0.0, "var_gap_constant", c_gap);
  res.check_at_most("sgld-sweep: max_eta sup_t|v_sgld - v_exact| / (C eta)", worst,
                    1.0 + 1e-12);

  if (with_monte_carlo) {
    const auto cmp = compare_ensemble_moments(res, p, cfg, cfg.mc_eta, s2, cfg.mc_chains,
                                              cfg.checkpoints);
    res.row(cfg.mc_eta, "mc_worst_z", cmp.worst_z);
    res.check_at_most("sgld-sweep: ensemble moments outside " + format_double(cfg.mc_sigmas) +
                          " se (count of " + std::to_string(cmp.comparisons) + ")",
                      static_cast<double>(cmp.failures), 0.0);
  }
  res.seconds = clock.seconds();
  return res;
}

// ---------------------------------------------------------------------------
// stationary-bias

inline const GaussianMixture1D& require_mixture(const Potential& p, const char* experiment) {
  const auto* mix = std::get_if<GaussianMixture1D>(&p.kind());
  if (mix == nullptr) throw Unsupported(std::string(experiment) + " needs a mixture target");
  return *mix;
}

inline QuantileTable mixture_quantiles(const GaussianMixture1D& mix) {
  const double sd = std::sqrt(mix.total_variance());
  return QuantileTable([&](double x) { return mix.density(x); }, mix.mean() - 12.0 * sd,
                       mix.mean() + 12.0 * sd);
}

/// Integrated autocorrelation time of the recorded sequences, pooled over
/// chains, with the sum truncated at the first non-positive pair of lags.
inline double integrated_autocorrelation(const std::vector<Snapshot>& snaps, double mean) {
  const std::size_t len = snaps.size();
  const std::size_t chains = snaps.front().positions.size();
  auto autocov = [&](std::size_t lag) {
    double s = 0.0;
    for (std::size_t j = 0; j + lag < len; ++j)
      for (std::size_t i = 0; i < chains; ++i)
        s += (snaps[j].positions[i] - mean) * (snaps[j + lag].positions[i] - mean);
    return s / static_cast<double>((len - lag) * chains);
  };
  const double c0 = autocov(0);
  if (!(c0 > 0.0)) return 1.0;
  double tau = -1.0;
  for (std::size_t m = 0; 2 * m + 1 < len; ++m) {
    const double pair = (m == 0 ? 1.0 : autocov(2 * m) / c0) + autocov(2 * m + 1) / c0;
    if (pair <= 0.0) break;
    tau += 2.0 * pair;
  }
  return std::max(tau, 1.0);
}

/// Long-run W1 bias of pooled, thinned samples against the target quantiles.
inline ExperimentResult stationary_bias(const ExperimentConfig& cfg) {
  Stopwatch clock;
  ExperimentResult res;
  res.id = "stationary-bias";
  require_decreasing_grid(cfg.eta_grid, 3);
  const Potential p = build_potential(cfg.potential, cfg.sampler.beta_inv);
  const auto& mix = require_mixture(p, "stationary-bias");
  require(cfg.samples_per_chain >= 2, "need at least two samples per chain");
  const QuantileTable reference = mixture_quantiles(mix);
  const double spread = reference.spread();
  const double centre = mix.mean();
  const double sd = std::sqrt(mix.total_variance());

  Vec biases;
  for (double eta : cfg.eta_grid) {
    SamplerConfig sc = build_sampler(cfg, StepSchedule::constant(eta), cfg.seed);
    const auto burn = static_cast<std::size_t>(std::ceil(cfg.burn_in / eta - 1e-9));
    const auto gap =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(cfg.sample_interval / eta)));
    EnsembleOptions opt;
    opt.chains = cfg.sampler.chains;
    opt.threads = cfg.threads;
    opt.init = build_initial(cfg.sampler, 1);
    for (std::size_t j = 0; j < cfg.samples_per_chain; ++j) opt.record_at.push_back(burn + j * gap);
    opt.horizon = opt.record_at.back();
    const auto snaps = run_ensemble(p, sc, opt);

    SampleSet pooled;
    pooled.values.reserve(opt.chains * snaps.size());
    for (const auto& s : snaps) pooled.values.insert(pooled.values.end(), s.positions.begin(), s.positions.end());
    const auto n = static_cast<double>(pooled.size());
    double mean = 0.0;
    for (double v : pooled.values) mean += v;
    mean /= n;
    const double tau = integrated_autocorrelation(snaps, mean);
    const double ess = n / tau;
    const double floor = std::sqrt(2.0 / std::numbers::pi) * spread / std::sqrt(ess);
    const double bias = w1_to_reference(pooled, reference);
    if (cfg.dump_samples && eta == cfg.eta_grid.back()) res.samples = snaps;

    SampleSet ideal;
    ideal.values.resize(pooled.size());
    for (std::size_t i = 0; i < ideal.values.size(); ++i)
      ideal.values[i] = reference.quantile((static_cast<double>(i) + 0.5) / n);
    const double tv = empirical_tv_hist(pooled, ideal, cfg.tv_bins, centre - 5.0 * sd,
                                        centre + 5.0 * sd);

    const double below = static_cast<double>(std::count_if(
                             pooled.values.begin(), pooled.values.end(),
                             [&](double v) { return v < centre; })) / n;
    const double target_below = reference.cdf(centre);
    const double mixing_gap = std::abs(below - target_below);
    if (mixing_gap > 5.0 * std::sqrt(target_below * (1.0 - target_below) / ess) + 0.01) {
      res.row(eta, "mixing_warning", mixing_gap);
      res.notes.push_back("eta = " + format_double(eta) +
                          ": mode masses differ from the target by " + format_double(mixing_gap) +
                          "; modes may be too separated to mix within the horizon");
    }

    res.row(eta, "w1_bias", bias, floor);
    res.row(eta, "pooled_samples", n);
    res.row(eta, "effective_samples", ess);
    res.row(eta, "integrated_autocorrelation", tau);
    res.row(eta, "noise_floor", floor);
    res.row(eta, "tv_hist", tv);
    res.check_at_least("stationary-bias: W1 bias >= 0 at eta=" + format_double(eta), bias, 0.0);
    res.check_at_least("stationary-bias: effective samples at eta=" + format_double(eta), ess,
                       cfg.min_effective_samples);
    biases.push_back(bias);
    res.notes.push_back("eta = " + format_double(eta) + ": Monte Carlo noise floor of W1 ~ " +
                        format_double(floor) + " (" + format_double(ess) +
                        " effective samples)");
  }
  std::vector<std::pair<double, double>> pts;
  for (std::size_t i = 0; i < biases.size(); ++i) pts.emplace_back(cfg.eta_grid[i], biases[i]);
  res.plots.push_back({"w1_bias_vs_eta", pts});
  for (std::size_t i = 0; i + 1 < biases.size(); ++i) {
    const double ratio = biases[i] / biases[i + 1];
    res.row(cfg.eta_grid[i + 1], "bias_ratio", ratio);
    res.check_window("stationary-bias: bias(" + format_double(cfg.eta_grid[i]) + ")/bias(" +
                         format_double(cfg.eta_grid[i + 1]) + ")",
                     ratio, cfg.ratio_min, cfg.ratio_max);
  }
  const RateFit fit = loglog_slope(pts);
  res.fits.push_back(fit);
  res.row(0.0, "w1_bias_slope", fit.slope);
  res.seconds = clock.seconds();
  return res;
}

// ---------------------------------------------------------------------------
// contraction

/// Two ensembles started from point masses at init_left and init_right; W1
/// between them should shrink by the contraction factor over the horizon.
inline ExperimentResult contraction(const ExperimentConfig& cfg) {
  Stopwatch clock;
  ExperimentResult res;
  res.id = "contraction";
  const Potential p = build_potential(cfg.potential, cfg.sampler.beta_inv);
  require(p.dim() == 1, "contraction runs on a one-dimensional target");
  ScheduleSpec spec = cfg.schedule;
  if (spec.kind != "constant") spec.kind = "constant";
  SamplerConfig sc = build_sampler(cfg, StepSchedule::constant(spec.eta), cfg.seed);
  const auto steps = static_cast<std::size_t>(std::llround(cfg.horizon_t / spec.eta));
  require(steps >= cfg.checkpoints && cfg.checkpoints >= 1,
          "horizon yields fewer than the required checkpoints");

  EnsembleOptions opt;
  opt.chains = cfg.sampler.chains;
  opt.horizon = steps;
  opt.threads = cfg.threads;
  for (std::size_t j = 0; j <= cfg.checkpoints; ++j) opt.record_at.push_back(steps * j / cfg.checkpoints);
  opt.init = InitialLaw::point({cfg.init_left});
  const auto left = run_ensemble(p, sc, opt);
  opt.init = InitialLaw::point({cfg.init_right});
  opt.stream_offset = opt.chains;  // disjoint streams for the second ensemble
  const auto right = run_ensemble(p, sc, opt);

  PlotSeries curve{"w1_vs_t", {}};
  Vec w1(left.size());
  for (std::size_t r = 0; r < left.size(); ++r) {
    w1[r] = empirical_w1_1d(SampleSet(left[r].positions), SampleSet(right[r].positions));
    res.row(left[r].t, "w1", w1[r]);
    curve.points.emplace_back(left[r].t, w1[r]);
  }
  res.plots.push_back(std::move(curve));
  if (cfg.dump_samples) res.samples = {left.front(), left.back()};
  const double ratio = w1.front() / std::max(w1.back(), std::numeric_limits<double>::min());
  res.row(cfg.horizon_t, "contraction_ratio", ratio);
  // empirical rate over the stretch where W1 is still above 10% of its start
  Vec ts, logs;
  for (std::size_t r = 0; r < w1.size(); ++r)
    if (w1[r] > 0.1 * w1.front()) {
      ts.push_back(left[r].t);
      logs.push_back(std::log(w1[r]));
    }
  if (ts.size() >= 2) res.row(0.0, "w1_decay_rate", -linear_slope(ts, logs));
  res.check_at_most("contraction: W1(T) / W1(0)", w1.back() / w1.front(),
                    1.0 / cfg.contraction_factor);
  res.seconds = clock.seconds();
  return res;
}

inline ExperimentResult run_experiment(const ExperimentConfig& cfg);

}  // namespace sgld
