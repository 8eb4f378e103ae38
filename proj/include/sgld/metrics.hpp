#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <utility>
#include <vector>

#include "sgld/core.hpp"

namespace sgld {

/// Equally weighted one-dimensional sample set.
struct SampleSet {
  Vec values;

  SampleSet() = default;
  explicit SampleSet(Vec v) : values(std::move(v)) {}

  std::size_t size() const noexcept { return values.size(); }
};

namespace detail {

inline Vec sorted_checked(const SampleSet& s) {
  require(!s.values.empty(), "sample set must be non-empty");
  require(all_finite(s.values), "sample set entries must be finite");
  Vec v = s.values;
  std::sort(v.begin(), v.end());
  return v;
}

/// Empirical quantiles of sorted data at levels (i + 1/2)/m, linearly
/// interpolated between order statistics.
inline Vec midpoint_quantiles(const Vec& sorted, std::size_t m) {
  const auto n = static_cast<double>(sorted.size());
  Vec q(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double pos = (static_cast<double>(i) + 0.5) / static_cast<double>(m) * n - 0.5;
    if (pos <= 0.0) {
      q[i] = sorted.front();
    } else if (pos >= n - 1.0) {
      q[i] = sorted.back();
    } else {
      const auto lo = static_cast<std::size_t>(std::floor(pos));
      const double frac = pos - static_cast<double>(lo);
      q[i] = sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
    }
  }
  return q;
}

/// Sorted samples of equal size; the larger set is reduced to the smaller
/// size by quantile interpolation.
inline std::pair<Vec, Vec> coupled_order_statistics(const SampleSet& a, const SampleSet& b) {
  Vec x = sorted_checked(a);
  Vec y = sorted_checked(b);
  if (x.size() > y.size()) x = midpoint_quantiles(x, y.size());
  if (y.size() > x.size()) y = midpoint_quantiles(y, x.size());
  return {std::move(x), std::move(y)};
}

}  // namespace detail

/// Exact W1 between two equal-size empirical measures on R (sorted coupling).
inline double empirical_w1_1d(const SampleSet& a, const SampleSet& b) {
  const auto [x, y] = detail::coupled_order_statistics(a, b);
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += std::abs(x[i] - y[i]);
  return s / static_cast<double>(x.size());
}

inline double empirical_w2_1d(const SampleSet& a, const SampleSet& b) {
  const auto [x, y] = detail::coupled_order_statistics(a, b);
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - y[i]) * (x[i] - y[i]);
  return std::sqrt(s / static_cast<double>(x.size()));
}

/// Half the L1 distance between histograms on shared edges over [lo, hi];
/// mass outside the range is folded into the edge bins.
inline double empirical_tv_hist(const SampleSet& a, const SampleSet& b, std::size_t bins,
                                double lo, double hi) {
  require(bins >= 2, "TV histogram needs at least two bins");
  require(std::isfinite(lo) && std::isfinite(hi) && hi > lo, "degenerate histogram range");
  require(!a.values.empty() && !b.values.empty(), "sample set must be non-empty");
  auto histogram = [&](const SampleSet& s) {
    Vec h(bins, 0.0);
    const double width = (hi - lo) / static_cast<double>(bins);
    for (double v : s.values) {
      require(std::isfinite(v), "sample set entries must be finite");
      double pos = std::floor((v - lo) / width);
      pos = std::clamp(pos, 0.0, static_cast<double>(bins - 1));
      h[static_cast<std::size_t>(pos)] += 1.0;
    }
    for (double& x : h) x /= static_cast<double>(s.values.size());
    return h;
  };
  const Vec p = histogram(a);
  const Vec q = histogram(b);
  double s = 0.0;
  for (std::size_t i = 0; i < bins; ++i) s += std::abs(p[i] - q[i]);
  return 0.5 * s;
}

using LogDensity = std::function<double(double)>;

/// Composite Simpson estimate of int p log(p / q) over [lo, hi] with n grid
/// points. An even point count finishes with a 3/8 panel.
inline double kl_quadrature_1d(const LogDensity& logp, const LogDensity& logq, double lo,
                               double hi, std::size_t n) {
  require(n >= 100, "quadrature grid needs at least 100 points");
  require(std::isfinite(lo) && std::isfinite(hi) && hi > lo, "degenerate quadrature range");
  const double h = (hi - lo) / static_cast<double>(n - 1);
  Vec f(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = lo + static_cast<double>(i) * h;
    const double lp = logp(x);
    const double lq = logq(x);
    f[i] = std::exp(lp) * (lp - lq);
    if (!std::isfinite(f[i]))
      throw std::domain_error("non-finite KL integrand at x = " + std::to_string(x));
  }
  const std::size_t intervals = n - 1;
  const std::size_t simpson_end = intervals % 2 == 0 ? intervals : intervals - 3;
  double s = 0.0;
  for (std::size_t i = 0; i + 2 <= simpson_end; i += 2)
    s += f[i] + 4.0 * f[i + 1] + f[i + 2];
  s *= h / 3.0;
  if (simpson_end != intervals) {
    const std::size_t j = simpson_end;
    s += 3.0 * h / 8.0 * (f[j] + 3.0 * f[j + 1] + 3.0 * f[j + 2] + f[j + 3]);
  }
  return s;
}

/// Least-squares fit of ln y = intercept + slope ln x.
struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

inline RateFit loglog_slope(std::span<const std::pair<double, double>> points) {
  require(points.size() >= 2, "rate fit needs at least two points");
  double mx = 0.0, my = 0.0;
  for (const auto& [x, y] : points) {
    require(x > 0.0 && y > 0.0 && std::isfinite(x) && std::isfinite(y),
            "rate fit needs positive finite values");
    mx += std::log(x);
    my += std::log(y);
  }
  const auto n = static_cast<double>(points.size());
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (const auto& [x, y] : points) {
    const double u = std::log(x) - mx;
    const double v = std::log(y) - my;
    sxx += u * u;
    sxy += u * v;
    syy += v * v;
  }
  require(sxx > 0.0, "rate fit needs distinct abscissae");
  RateFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  const double residual = std::max(syy - fit.slope * sxy, 0.0);
  fit.r2 = syy > 0.0 ? std::clamp(1.0 - residual / syy, 0.0, 1.0) : 1.0;
  return fit;
}

/// Quantile function of a density on [lo, hi], tabulated by cumulative
/// Simpson quadrature on a uniform grid and inverted by linear interpolation.
class QuantileTable {
 public:
  QuantileTable(const std::function<double(double)>& density, double lo, double hi,
                std::size_t cells = 1u << 18)
      : lo_(lo), h_((hi - lo) / static_cast<double>(cells)) {
    require(hi > lo && cells >= 2, "degenerate quantile table");
    cdf_.assign(cells + 1, 0.0);
    double prev = density(lo);
    for (std::size_t i = 0; i < cells; ++i) {
      const double x0 = lo + static_cast<double>(i) * h_;
      const double mid = density(x0 + 0.5 * h_);
      const double next = density(x0 + h_);
      cdf_[i + 1] = cdf_[i] + h_ / 6.0 * (prev + 4.0 * mid + next);
      prev = next;
    }
    const double total = cdf_.back();
    require(total > 0.0, "density integrates to zero on the table range");
    for (double& c : cdf_) c /= total;
  }

  double cdf(double x) const {
    if (x <= lo_) return 0.0;
    const double pos = (x - lo_) / h_;
    const auto i = static_cast<std::size_t>(pos);
    if (i + 1 >= cdf_.size()) return 1.0;
    return cdf_[i] + (pos - static_cast<double>(i)) * (cdf_[i + 1] - cdf_[i]);
  }

  double quantile(double u) const {
    require(u >= 0.0 && u <= 1.0, "quantile level must lie in [0, 1]");
    const auto it = std::lower_bound(cdf_.begin(), cdf_.end(), u);
    if (it == cdf_.begin()) return lo_;
    if (it == cdf_.end()) return lo_ + h_ * static_cast<double>(cdf_.size() - 1);
    const auto i = static_cast<std::size_t>(it - cdf_.begin());
    const double span = cdf_[i] - cdf_[i - 1];
    const double frac = span > 0.0 ? (u - cdf_[i - 1]) / span : 0.0;
    return lo_ + h_ * (static_cast<double>(i - 1) + frac);
  }

  /// int sqrt(F (1 - F)) dx: sets the scale of the Monte Carlo W1 noise floor,
  /// E W1(empirical_n, pi) ~ sqrt(2/pi) * this / sqrt(n).
  double spread() const {
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < cdf_.size(); ++i) {
      const double f = 0.5 * (cdf_[i] + cdf_[i + 1]);
      s += std::sqrt(f * (1.0 - f)) * h_;
    }
    return s;
  }

 private:
  double lo_;
  double h_;
  Vec cdf_;
};

/// W1 between an empirical measure and a reference law given by its quantile
/// function, via the quantile coupling at levels (i + 1/2)/n.
inline double w1_to_reference(const SampleSet& samples, const QuantileTable& reference) {
  const Vec x = detail::sorted_checked(samples);
  const auto n = static_cast<double>(x.size());
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
    s += std::abs(x[i] - reference.quantile((static_cast<double>(i) + 0.5) / n));
  return s / n;
}

}  // namespace sgld
