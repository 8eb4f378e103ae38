#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "sgld/core.hpp"

namespace sgld {

/// Step-size sequence {eta_k} with grid times T_k = sum_{i<k} eta_i.
///
/// Prefix sums are cached at construction (up to the horizon hint for
/// polynomial decay, fully for explicit lists) and never mutated afterwards,
/// so a schedule can be shared freely across threads.
class StepSchedule {
 public:
  enum class Kind { Constant, PolyDecay, Explicit };

  static StepSchedule constant(double eta) {
    require(eta > 0.0 && std::isfinite(eta), "constant step must be positive");
    StepSchedule s(Kind::Constant);
    s.eta_ = eta;
    return s;
  }

  /// eta_k = (ell + k)^(-theta).
  static StepSchedule poly_decay(std::size_t ell, double theta,
                                 std::size_t horizon_hint = 0) {
    require(ell >= 1, "poly decay offset ell must be a positive integer");
    require(theta > 0.0 && theta < 1.0, "poly decay exponent theta must lie in (0, 1)");
    StepSchedule s(Kind::PolyDecay);
    s.ell_ = ell;
    s.theta_ = theta;
    s.prefix_.reserve(horizon_hint + 1);
    s.prefix_.push_back(0.0);
    for (std::size_t k = 0; k < horizon_hint; ++k)
      s.prefix_.push_back(s.prefix_.back() + s.step(k));
    return s;
  }

  /// Smallest offset ell >= min_ell such that the first step is at most cap.
  static StepSchedule poly_decay_capped(double theta, double cap, std::size_t min_ell,
                                        std::size_t horizon_hint = 0) {
    require(cap > 0.0, "step cap must be positive");
    require(theta > 0.0 && theta < 1.0, "poly decay exponent theta must lie in (0, 1)");
    const std::size_t floor_ell = std::max<std::size_t>(min_ell, 1);
    auto ell = std::max(floor_ell,
                        static_cast<std::size_t>(std::ceil(std::pow(cap, -1.0 / theta))));
    while (std::pow(static_cast<double>(ell), -theta) > cap) ++ell;
    while (ell > floor_ell && std::pow(static_cast<double>(ell - 1), -theta) <= cap) --ell;
    return poly_decay(ell, theta, horizon_hint);
  }

  static StepSchedule explicit_steps(std::vector<double> steps) {
    require(!steps.empty(), "explicit schedule needs at least one step");
    StepSchedule s(Kind::Explicit);
    s.prefix_.reserve(steps.size() + 1);
    s.prefix_.push_back(0.0);
    for (double h : steps) {
      require(h > 0.0 && std::isfinite(h), "explicit steps must be positive");
      s.prefix_.push_back(s.prefix_.back() + h);
    }
    s.steps_ = std::move(steps);
    return s;
  }

  Kind kind() const noexcept { return kind_; }
  double eta() const noexcept { return eta_; }
  std::size_t ell() const noexcept { return ell_; }
  double theta() const noexcept { return theta_; }

  /// Number of defined steps (max size_t for unbounded schedules).
  std::size_t length() const noexcept {
    return kind_ == Kind::Explicit ? steps_.size()
                                   : std::numeric_limits<std::size_t>::max();
  }

  double step(std::size_t k) const {
    switch (kind_) {
      case Kind::Constant:
        return eta_;
      case Kind::PolyDecay:
        return std::pow(static_cast<double>(ell_ + k), -theta_);
      case Kind::Explicit:
        if (k >= steps_.size())
          throw std::out_of_range("step index " + std::to_string(k) +
                                  " past end of explicit schedule");
        return steps_[k];
    }
    return 0.0;
  }

  double grid_time(std::size_t k) const {
    switch (kind_) {
      case Kind::Constant:
        return static_cast<double>(k) * eta_;
      case Kind::PolyDecay: {
        if (k < prefix_.size()) return prefix_[k];
        double t = prefix_.back();
        for (std::size_t i = prefix_.size() - 1; i < k; ++i) t += step(i);
        return t;
      }
      case Kind::Explicit:
        if (k >= prefix_.size())
          throw std::out_of_range("grid index " + std::to_string(k) +
                                  " past end of explicit schedule");
        return prefix_[k];
    }
    return 0.0;
  }

  /// T_0..T_count, consistent with grid_time().
  std::vector<double> grid_times(std::size_t count) const {
    std::vector<double> t(count + 1);
    if (kind_ == Kind::Constant) {
      for (std::size_t k = 0; k <= count; ++k) t[k] = static_cast<double>(k) * eta_;
      return t;
    }
    if (kind_ == Kind::Explicit && count >= prefix_.size())
      throw std::out_of_range("grid index past end of explicit schedule");
    const std::size_t cached = std::min(count + 1, prefix_.size());
    std::copy_n(prefix_.begin(), cached, t.begin());
    for (std::size_t k = cached; k <= count; ++k) t[k] = t[k - 1] + step(k - 1);
    return t;
  }

  /// Index i with T_i <= t < T_{i+1}.
  std::size_t interval(double t) const {
    require(t >= 0.0 && std::isfinite(t), "time must be non-negative");
    if (kind_ == Kind::Constant) {
      auto i = static_cast<std::size_t>(std::floor(t / eta_));
      while (i > 0 && grid_time(i) > t) --i;
      while (grid_time(i + 1) <= t) ++i;
      return i;
    }
    if (t < prefix_.back()) {
      const auto it = std::upper_bound(prefix_.begin(), prefix_.end(), t);
      return static_cast<std::size_t>(it - prefix_.begin()) - 1;
    }
    if (kind_ == Kind::Explicit)
      throw std::out_of_range("time beyond explicit schedule horizon");
    std::size_t i = prefix_.size() - 1;
    double ti = prefix_.back();
    while (ti + step(i) <= t) ti += step(i++);
    return i;
  }

  /// f(t) = eta_i^2 on [T_i, T_{i+1}).
  double weight(double t) const {
    const double h = step(interval(t));
    return h * h;
  }

  /// Whether eta_{k+1} <= eta_k for every k < count (whole list by default).
  bool non_increasing(std::size_t count = std::numeric_limits<std::size_t>::max()) const {
    if (kind_ != Kind::Explicit) return true;
    const std::size_t n = std::min(count, steps_.size());
    for (std::size_t k = 1; k < n; ++k)
      if (steps_[k] > steps_[k - 1]) return false;
    return true;
  }

 private:
  explicit StepSchedule(Kind kind) : kind_(kind) {}

  Kind kind_;
  double eta_ = 0.0;
  std::size_t ell_ = 0;
  double theta_ = 0.0;
  std::vector<double> steps_;
  std::vector<double> prefix_;
};

inline double step(const StepSchedule& s, std::size_t k) { return s.step(k); }
inline double grid_time(const StepSchedule& s, std::size_t k) { return s.grid_time(k); }
inline double weight_f(const StepSchedule& s, double t) { return s.weight(t); }

/// Constants of the error envelope
///   c1 eta_0^2 exp(-A0 T_k) + c2 d int_0^{T_k} exp(-A0 (T_k - s)) f(s) ds.
struct BoundParams {
  double a0 = 1.0;
  double c1 = 0.0;
  double c2 = 1.0;
  std::size_t d = 1;
};

inline void validate(const BoundParams& p) {
  require(p.a0 > 0.0 && std::isfinite(p.a0), "envelope rate A0 must be positive");
  require(p.c1 >= 0.0 && std::isfinite(p.c1), "envelope c1 must be finite and >= 0");
  require(p.c2 >= 0.0 && std::isfinite(p.c2), "envelope c2 must be finite and >= 0");
  require(p.d >= 1, "envelope dimension must be positive");
}

/// Envelope at grid index k, integrating f exactly interval by interval.
inline double bound_envelope(const StepSchedule& s, const BoundParams& p, std::size_t k) {
  validate(p);
  if (!s.non_increasing(k))
    throw std::invalid_argument("envelope requires a non-increasing step schedule");
  const auto t = s.grid_times(k);
  const double tk = t[k];
  double integral = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double h = s.step(i);
    integral += h * h *
                (std::exp(-p.a0 * (tk - t[i + 1])) - std::exp(-p.a0 * (tk - t[i]))) / p.a0;
  }
  const double h0 = s.step(0);
  return p.c1 * h0 * h0 * std::exp(-p.a0 * tk) +
         p.c2 * static_cast<double>(p.d) * integral;
}

/// Envelope at every grid index 0..count in O(count), using
/// I_{k+1} = exp(-A0 eta_k) I_k + eta_k^2 (1 - exp(-A0 eta_k)) / A0.
inline std::vector<double> envelope_curve(const StepSchedule& s, const BoundParams& p,
                                          std::size_t count) {
  validate(p);
  if (!s.non_increasing(count))
    throw std::invalid_argument("envelope requires a non-increasing step schedule");
  const auto t = s.grid_times(count);
  const double h0 = s.step(0);
  std::vector<double> out(count + 1);
  double integral = 0.0;
  for (std::size_t k = 0; k <= count; ++k) {
    if (k > 0) {
      const double h = s.step(k - 1);
      const double decay = std::exp(-p.a0 * (t[k] - t[k - 1]));
      integral = decay * integral - h * h * std::expm1(-p.a0 * (t[k] - t[k - 1])) / p.a0;
    }
    out[k] = p.c1 * h0 * h0 * std::exp(-p.a0 * t[k]) +
             p.c2 * static_cast<double>(p.d) * integral;
  }
  return out;
}

}  // namespace sgld
