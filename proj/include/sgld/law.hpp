#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "sgld/core.hpp"
#include "sgld/schedule.hpp"

namespace sgld {

/// Diagonal-covariance Gaussian N(mean, diag(var)).
struct GaussianLaw {
  Vec mean;
  Vec var;

  std::size_t dim() const noexcept { return mean.size(); }

  static GaussianLaw isotropic(std::size_t d, double m, double v) {
    return {Vec(d, m), Vec(d, v)};
  }
};

/// Exact mean and variance of a possibly non-Gaussian marginal. When
/// `gaussian` is false the law is a Gaussian mixture and as_gaussian() is a
/// moment-matched surrogate.
struct MomentLaw {
  Vec mean;
  Vec var;
  bool gaussian = true;

  GaussianLaw as_gaussian() const { return {mean, var}; }
};

namespace detail {

inline void check_law_inputs(double a, double beta_inv, std::span<const double> m0,
                             std::span<const double> v0) {
  require(a > 0.0 && std::isfinite(a), "drift rate a must be positive");
  require(beta_inv > 0.0 && std::isfinite(beta_inv), "beta_inv must be positive");
  require(m0.size() == v0.size() && !m0.empty(), "initial mean/variance dimension mismatch");
  require(all_finite(m0), "initial mean must be finite");
  for (double v : v0) require(v >= 0.0 && std::isfinite(v), "initial variance must be >= 0");
}

inline void check_positive_law(const GaussianLaw& p, const char* which) {
  for (double v : p.var)
    require(v > 0.0 && std::isfinite(v), std::string(which) + " variance must be positive");
  require(all_finite(p.mean), std::string(which) + " mean must be finite");
}

inline void check_pair(const GaussianLaw& p, const GaussianLaw& q) {
  require(p.mean.size() == q.mean.size() && p.var.size() == p.mean.size() &&
              q.var.size() == q.mean.size(),
          "law dimensions do not match");
  check_positive_law(p, "first law");
  check_positive_law(q, "second law");
}

inline void check_stable_step(double h, double a, std::size_t j) {
  if (!(h * a < 2.0))
    throw std::invalid_argument("unstable step at index " + std::to_string(j) +
                                ": eta * a >= 2");
}

}  // namespace detail

/// Law of dX = -a X dt + sqrt(2 beta_inv) dW at time t from N(m0, v0):
/// m(t) = e^{-at} m0, v(t) = e^{-2at} v0 + (beta_inv / a)(1 - e^{-2at}).
inline GaussianLaw ou_exact_law(double a, double beta_inv, std::span<const double> m0,
                                std::span<const double> v0, double t) {
  detail::check_law_inputs(a, beta_inv, m0, v0);
  require(t >= 0.0, "time must be non-negative");
  const double decay = std::exp(-a * t);
  const double stationary = beta_inv / a;
  // 1 - e^{-2at} via expm1 keeps small-t variances accurate.
  const double fill = -std::expm1(-2.0 * a * t);
  GaussianLaw law{Vec(m0.size()), Vec(m0.size())};
  for (std::size_t i = 0; i < m0.size(); ++i) {
    law.mean[i] = decay * m0[i];
    law.var[i] = decay * decay * v0[i] + stationary * fill;
  }
  return law;
}

/// Moment recursion of the linear SGLD iterate with intercept variance s2:
///   m_{j+1} = (1 - eta_j a) m_j,
///   v_{j+1} = (1 - eta_j a)^2 v_j + eta_j^2 s2 + 2 beta_inv eta_j.
/// Calls visit(k, law) after each step, starting with k = 0.
template <typename Visitor>
MomentLaw linear_moment_recursion(double a, double beta_inv, double s2,
                                  std::span<const double> m0, std::span<const double> v0,
                                  const StepSchedule& sched, std::size_t steps,
                                  Visitor&& visit) {
  detail::check_law_inputs(a, beta_inv, m0, v0);
  require(s2 >= 0.0 && std::isfinite(s2), "intercept variance must be >= 0");
  for (std::size_t j = 0; j < steps; ++j) detail::check_stable_step(sched.step(j), a, j);
  MomentLaw law{Vec(m0.begin(), m0.end()), Vec(v0.begin(), v0.end()), s2 == 0.0};
  visit(std::size_t{0}, std::as_const(law));
  for (std::size_t j = 0; j < steps; ++j) {
    const double h = sched.step(j);
    const double contraction = 1.0 - h * a;
    const double injected = h * h * s2 + 2.0 * beta_inv * h;
    for (std::size_t i = 0; i < law.mean.size(); ++i) {
      law.mean[i] *= contraction;
      law.var[i] = contraction * contraction * law.var[i] + injected;
    }
    visit(j + 1, std::as_const(law));
  }
  return law;
}

/// Exact law of the ULA iterate after `steps` steps for drift -a x.
inline GaussianLaw em_law(double a, double beta_inv, std::span<const double> m0,
                          std::span<const double> v0, const StepSchedule& sched,
                          std::size_t steps) {
  return linear_moment_recursion(a, beta_inv, 0.0, m0, v0, sched, steps,
                                 [](std::size_t, const MomentLaw&) {})
      .as_gaussian();
}

/// Mean and variance of the SGLD iterate for b^xi(x) = -a x + c^xi with
/// E c^xi = 0 and Var c^xi = s2 per coordinate.
inline MomentLaw sgld_moment_law(double a, double beta_inv, double s2,
                                 std::span<const double> m0, std::span<const double> v0,
                                 const StepSchedule& sched, std::size_t steps) {
  return linear_moment_recursion(a, beta_inv, s2, m0, v0, sched, steps,
                                 [](std::size_t, const MomentLaw&) {});
}

/// D_KL(p || q) for diagonal Gaussians.
inline double gaussian_kl(const GaussianLaw& p, const GaussianLaw& q) {
  detail::check_pair(p, q);
  double kl = 0.0;
  for (std::size_t i = 0; i < p.dim(); ++i) {
    const double ratio = p.var[i] / q.var[i];
    const double dm = p.mean[i] - q.mean[i];
    // 0.5 (r - 1 - ln r), with log1p for ratios near 1
    const double var_term = std::max(0.5 * ((ratio - 1.0) - std::log1p(ratio - 1.0)), 0.0);
    kl += var_term + dm * dm / (2.0 * q.var[i]);
  }
  return std::max(kl, 0.0);
}

/// Mean-shift part of gaussian_kl; never exceeds it.
inline double kl_mean_lower_bound(const GaussianLaw& p, const GaussianLaw& q) {
  detail::check_pair(p, q);
  double s = 0.0;
  for (std::size_t i = 0; i < p.dim(); ++i) {
    const double dm = p.mean[i] - q.mean[i];
    s += dm * dm / (2.0 * q.var[i]);
  }
  return s;
}

/// Largest step for which mean_gap_lower_bound is validated.
inline constexpr double kMeanGapStepCap = 0.25;

/// Largest T eta for which the mean gap bound holds. The gap is
/// e^{-T}(1 - e^{-x}) with x >= T eta / 2, which saturates while the bound
/// grows linearly in T, so the inequality needs 1 - e^{-T eta/2} >= T eta/4,
/// true up to T eta ~ 3.18.
inline constexpr double kMeanGapProductCap = 3.0;

/// (1/4)|E X_0| e^{-T} T eta: lower bound on |e^{-T} - (1 - eta)^{T/eta}| |E X_0|
/// for the unit-rate process when T eta <= kMeanGapProductCap. Rejects eta
/// outside (0, 0.25] and T that is not a multiple of eta.
inline double mean_gap_lower_bound(double ex0, double t, double eta) {
  require(eta > 0.0 && eta <= kMeanGapStepCap,
          "mean gap bound is validated only for 0 < eta <= 0.25");
  require(t >= 0.0 && std::isfinite(t), "time must be non-negative");
  const double steps = t / eta;
  require(std::abs(steps - std::round(steps)) <= 1e-9 * std::max(1.0, steps),
          "time must be a multiple of the step");
  return 0.25 * std::abs(ex0) * std::exp(-t) * t * eta;
}

/// W2 between diagonal Gaussians.
inline double gaussian_w2(const GaussianLaw& p, const GaussianLaw& q) {
  detail::check_pair(p, q);
  double s = 0.0;
  for (std::size_t i = 0; i < p.dim(); ++i) {
    const double dm = p.mean[i] - q.mean[i];
    const double ds = std::sqrt(p.var[i]) - std::sqrt(q.var[i]);
    s += dm * dm + ds * ds;
  }
  return std::sqrt(s);
}

}  // namespace sgld
