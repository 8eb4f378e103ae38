#pragma once

#include <functional>
#include <limits>
#include <numbers>
#include <span>
#include <variant>
#include <vector>

#include "sgld/core.hpp"
#include "sgld/rng.hpp"

namespace sgld {

/// In-place drift evaluation: writes b(x) into out.
using DriftFn =
    std::function<void(std::span<const double> x, std::span<double> out)>;

/// Declared regularity constants of a drift field. They are hypotheses about
/// the potential; validate_metadata() spot-checks them by sampling.
struct PotentialMetadata {
  double lipschitz = 0.0;           // |b(x) - b(y)| <= L |x - y|
  double dissipation_mu = 0.0;      // x . b(x) <= -mu |x|^2 + sigma
  double dissipation_sigma = 0.0;
  double batch_bound = std::numeric_limits<double>::infinity();  // sup |b^xi - b|_inf
};

/// Quadratic components U_i(x) = (a/2)|x - z_i|^2 with offsets summing to
/// zero, so the full drift is exactly -a x and a batch drift is
/// -a (x - mean_{i in xi} z_i).
struct LinearDrift {
  double a = 1.0;
  std::vector<Vec> offsets;
};

/// One-dimensional equal-variance Gaussian mixture target pi, with the
/// potential scaled so that exp(-U / beta_inv) is proportional to pi.
/// Optional gradient offsets c_i (summing to zero) give it finite-sum
/// structure: b^xi(x) = b(x) + mean_{i in xi} c_i.
struct GaussianMixture1D {
  Vec weights;
  Vec means;
  double variance = 1.0;
  double beta_inv = 1.0;
  Vec gradient_offsets;

  double log_density(double x) const {
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < means.size(); ++j)
      peak = std::max(peak, log_term(j, x));
    double s = 0.0;
    for (std::size_t j = 0; j < means.size(); ++j)
      s += std::exp(log_term(j, x) - peak);
    return peak + std::log(s) - 0.5 * std::log(2.0 * std::numbers::pi * variance);
  }

  double density(double x) const { return std::exp(log_density(x)); }

  /// Exact CDF, used only as a cross-check for quadrature-based quantiles.
  double cdf(double x) const {
    double s = 0.0;
    for (std::size_t j = 0; j < means.size(); ++j)
      s += weights[j] * 0.5 *
           std::erfc(-(x - means[j]) / std::sqrt(2.0 * variance));
    return s;
  }

  double mean() const {
    double s = 0.0;
    for (std::size_t j = 0; j < means.size(); ++j) s += weights[j] * means[j];
    return s;
  }

  double total_variance() const {
    const double m = mean();
    double s = variance;
    for (std::size_t j = 0; j < means.size(); ++j)
      s += weights[j] * (means[j] - m) * (means[j] - m);
    return s;
  }

  /// grad log pi(x) scaled by beta_inv.
  double drift(double x) const {
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < means.size(); ++j)
      peak = std::max(peak, log_term(j, x));
    double num = 0.0, den = 0.0;
    for (std::size_t j = 0; j < means.size(); ++j) {
      const double r = std::exp(log_term(j, x) - peak);
      num += r * (means[j] - x);
      den += r;
    }
    return beta_inv * num / (den * variance);
  }

 private:
  double log_term(std::size_t j, double x) const {
    const double u = x - means[j];
    return std::log(weights[j]) - u * u / (2.0 * variance);
  }
};

/// Arbitrary drift b(x) = b_0(x) + (1/N) sum_i b_i(x). With no components
/// the base drift is the full drift and batches are unsupported.
struct CustomPotential {
  DriftFn base;
  std::vector<DriftFn> components;
};

/// Mini-batch sampling rule.
struct BatchSpec {
  std::size_t size = 1;
  bool replacement = true;
};

/// A realized batch xi. For linear and mixture potentials the batch drift is
/// the full drift plus a constant shift, which is precomputed here.
struct BatchDraw {
  std::vector<std::size_t> indices;  // zero-based component indices
  bool full = false;                 // b^xi == b exactly
  Vec shift;                         // b^xi - b, additive kinds only
};

class Potential {
 public:
  using Kind = std::variant<LinearDrift, GaussianMixture1D, CustomPotential>;

  /// b(x) = -a x on R^dim. Offsets are centred component minimizers; they
  /// must sum to zero. Declared constants: L = a, mu = a/2,
  /// sigma = (a/2) max_i |z_i|^2, B = a max_i |z_i|_inf.
  static Potential linear_drift(std::size_t dim, double a,
                                std::vector<Vec> offsets = {}) {
    require(dim >= 1, "potential dimension must be positive");
    require(a > 0.0 && std::isfinite(a), "linear drift rate a must be positive");
    Vec total(dim, 0.0);
    double scale = 0.0, max_sq = 0.0, max_inf = 0.0;
    for (const auto& z : offsets) {
      require(z.size() == dim, "offset dimension does not match potential");
      require(all_finite(z), "offsets must be finite");
      for (std::size_t c = 0; c < dim; ++c) {
        total[c] += z[c];
        scale = std::max(scale, std::abs(z[c]));
        max_inf = std::max(max_inf, std::abs(z[c]));
      }
      max_sq = std::max(max_sq, dot(z, z));
    }
    for (double t : total)
      require(std::abs(t) <= 1e-12 * std::max(1.0, scale) *
                                 static_cast<double>(offsets.size()),
              "linear drift offsets must sum to zero");
    PotentialMetadata meta;
    meta.lipschitz = a;
    meta.dissipation_mu = a / 2.0;
    meta.dissipation_sigma = a / 2.0 * max_sq;
    meta.batch_bound = offsets.empty() ? 0.0 : a * max_inf;
    return Potential(dim, LinearDrift{a, std::move(offsets)}, meta);
  }

  /// Mixture target on R. Weights are normalized; gradient offsets, when
  /// given, must sum to zero.
  static Potential gaussian_mixture_1d(Vec weights, Vec means, double variance,
                                       double beta_inv = 1.0,
                                       Vec gradient_offsets = {}) {
    require(!weights.empty() && weights.size() == means.size(),
            "mixture needs matching non-empty weights and means");
    require(variance > 0.0 && std::isfinite(variance),
            "mixture variance must be positive");
    require(beta_inv > 0.0 && std::isfinite(beta_inv), "beta_inv must be positive");
    double wsum = 0.0;
    for (double w : weights) {
      require(w > 0.0 && std::isfinite(w), "mixture weights must be positive");
      wsum += w;
    }
    for (double& w : weights) w /= wsum;
    require(all_finite(means), "mixture means must be finite");
    double csum = 0.0, cmax = 0.0;
    for (double c : gradient_offsets) {
      require(std::isfinite(c), "gradient offsets must be finite");
      csum += c;
      cmax = std::max(cmax, std::abs(c));
    }
    require(std::abs(csum) <= 1e-12 * std::max(1.0, cmax) *
                                  static_cast<double>(gradient_offsets.size()),
            "gradient offsets must sum to zero");

    const auto [lo, hi] = std::minmax_element(means.begin(), means.end());
    const double range = *hi - *lo;
    const double reach = std::max(std::abs(*lo), std::abs(*hi));
    // b'(x) = beta_inv (Var_r(m)/v^2 - 1/v), with 0 <= Var_r(m) <= range^2/4.
    PotentialMetadata meta;
    meta.lipschitz = beta_inv * std::max(1.0 / variance,
                                         range * range / (4.0 * variance * variance) -
                                             1.0 / variance);
    // x b(x) <= (beta_inv/v)(-x^2/2 + reach^2/2); the shift costs half of mu.
    meta.dissipation_mu = beta_inv / (4.0 * variance);
    meta.dissipation_sigma =
        beta_inv * reach * reach / (2.0 * variance) + cmax * cmax * variance / beta_inv;
    meta.batch_bound = cmax;
    return Potential(1,
                     GaussianMixture1D{std::move(weights), std::move(means), variance,
                                       beta_inv, std::move(gradient_offsets)},
                     meta);
  }

  static Potential custom(std::size_t dim, DriftFn base,
                          std::vector<DriftFn> components, PotentialMetadata meta) {
    require(dim >= 1, "potential dimension must be positive");
    require(static_cast<bool>(base), "custom potential needs a base drift");
    return Potential(dim, CustomPotential{std::move(base), std::move(components)},
                     meta);
  }

  std::size_t dim() const noexcept { return dim_; }
  const Kind& kind() const noexcept { return kind_; }
  const PotentialMetadata& metadata() const noexcept { return meta_; }

  /// Number of finite-sum components N (0 when there is no batch structure).
  std::size_t components() const noexcept {
    if (const auto* lin = std::get_if<LinearDrift>(&kind_)) return lin->offsets.size();
    if (const auto* mix = std::get_if<GaussianMixture1D>(&kind_))
      return std::max<std::size_t>(1, mix->gradient_offsets.size());
    return std::get<CustomPotential>(kind_).components.size();
  }

  bool finite_sum() const noexcept { return components() > 0; }

  /// Full drift b(x) = -grad U(x), unchecked.
  void drift_into(std::span<const double> x, std::span<double> out) const {
    if (const auto* lin = std::get_if<LinearDrift>(&kind_)) {
      for (std::size_t c = 0; c < dim_; ++c) out[c] = -lin->a * x[c];
    } else if (const auto* mix = std::get_if<GaussianMixture1D>(&kind_)) {
      out[0] = mix->drift(x[0]);
    } else {
      const auto& cus = std::get<CustomPotential>(kind_);
      cus.base(x, out);
      if (!cus.components.empty()) {
        Vec tmp(dim_);
        Vec acc(dim_, 0.0);
        for (const auto& comp : cus.components) {
          comp(x, tmp);
          for (std::size_t c = 0; c < dim_; ++c) acc[c] += tmp[c];
        }
        const double inv_n = 1.0 / static_cast<double>(cus.components.size());
        for (std::size_t c = 0; c < dim_; ++c) out[c] += acc[c] * inv_n;
      }
    }
  }

  /// Batch drift b^xi(x) for a realized batch, unchecked.
  void batch_drift_into(const BatchDraw& batch, std::span<const double> x,
                        std::span<double> out) const {
    if (batch.full) {
      drift_into(x, out);
      return;
    }
    if (!batch.shift.empty()) {
      drift_into(x, out);
      for (std::size_t c = 0; c < dim_; ++c) out[c] += batch.shift[c];
      return;
    }
    const auto& cus = std::get<CustomPotential>(kind_);
    cus.base(x, out);
    Vec tmp(dim_);
    Vec acc(dim_, 0.0);
    for (std::size_t i : batch.indices) {
      cus.components[i](x, tmp);
      for (std::size_t c = 0; c < dim_; ++c) acc[c] += tmp[c];
    }
    const double inv_s = 1.0 / static_cast<double>(batch.indices.size());
    for (std::size_t c = 0; c < dim_; ++c) out[c] += acc[c] * inv_s;
  }

  /// Builds the batch drift for the given component indices (zero-based).
  BatchDraw make_batch(std::vector<std::size_t> indices, bool full = false) const {
    const std::size_t n = components();
    if (n == 0) throw Unsupported("potential has no finite-sum components");
    require(!indices.empty(), "batch must contain at least one index");
    for (std::size_t i : indices) require(i < n, "batch index out of range");
    BatchDraw draw;
    draw.indices = std::move(indices);
    draw.full = full;
    fill_shift(draw);
    return draw;
  }

  /// Recomputes the additive shift after draw.indices has been overwritten.
  void fill_shift(BatchDraw& draw) const {
    const double inv_s = 1.0 / static_cast<double>(draw.indices.size());
    if (const auto* lin = std::get_if<LinearDrift>(&kind_)) {
      draw.shift.assign(dim_, 0.0);
      for (std::size_t i : draw.indices)
        for (std::size_t c = 0; c < dim_; ++c) draw.shift[c] += lin->offsets[i][c];
      for (double& s : draw.shift) s *= lin->a * inv_s;
    } else if (const auto* mix = std::get_if<GaussianMixture1D>(&kind_)) {
      draw.shift.assign(1, 0.0);
      if (!mix->gradient_offsets.empty()) {
        for (std::size_t i : draw.indices) draw.shift[0] += mix->gradient_offsets[i];
        draw.shift[0] *= inv_s;
      }
    } else {
      draw.shift.clear();
    }
  }

 private:
  Potential(std::size_t dim, Kind kind, PotentialMetadata meta)
      : dim_(dim), kind_(std::move(kind)), meta_(meta) {}

  std::size_t dim_;
  Kind kind_;
  PotentialMetadata meta_;
};

/// Full drift b(x) = -grad U(x).
inline Vec drift_full(const Potential& p, std::span<const double> x) {
  require(x.size() == p.dim(), "point dimension does not match potential");
  Vec out(p.dim());
  p.drift_into(x, out);
  return out;
}

/// Batch drift b^xi(x).
inline Vec batch_drift(const Potential& p, const BatchDraw& batch,
                       std::span<const double> x) {
  require(x.size() == p.dim(), "point dimension does not match potential");
  Vec out(p.dim());
  p.batch_drift_into(batch, x, out);
  return out;
}

/// True when every draw under spec is the whole component set, in which case
/// no randomness is consumed.
inline bool is_full_batch(const Potential& p, const BatchSpec& spec) {
  return p.components() == 1 || (!spec.replacement && spec.size == p.components());
}

inline void validate_batch_spec(const Potential& p, const BatchSpec& spec) {
  if (!p.finite_sum()) throw Unsupported("potential has no finite-sum components");
  require(spec.size >= 1, "batch size must be at least 1");
  require(spec.replacement || spec.size <= p.components(),
          "batch size exceeds component count without replacement");
}

/// Redraws a batch into an existing BatchDraw (no allocation after the first
/// call). Without replacement uses a partial Fisher-Yates shuffle.
inline void redraw_batch(const Potential& p, const BatchSpec& spec, Stream& rng,
                         BatchDraw& out) {
  const std::size_t n = p.components();
  if (is_full_batch(p, spec)) {
    if (!out.full || out.indices.size() != (spec.replacement ? spec.size : n)) {
      out.indices.resize(spec.replacement ? spec.size : n);
      for (std::size_t i = 0; i < out.indices.size(); ++i)
        out.indices[i] = n == 1 ? 0 : i;
      out.full = true;
      p.fill_shift(out);
    }
    return;
  }
  out.full = false;
  out.indices.resize(spec.size);
  if (spec.replacement) {
    for (auto& i : out.indices) i = static_cast<std::size_t>(rng.below(n));
  } else {
    thread_local std::vector<std::size_t> pool;
    pool.resize(n);
    for (std::size_t i = 0; i < n; ++i) pool[i] = i;
    for (std::size_t j = 0; j < spec.size; ++j) {
      const auto r = j + static_cast<std::size_t>(rng.below(n - j));
      std::swap(pool[j], pool[r]);
      out.indices[j] = pool[j];
    }
  }
  p.fill_shift(out);
}

/// Draws a uniformly random batch xi and returns b^xi.
inline BatchDraw draw_batch(const Potential& p, const BatchSpec& spec, Stream& rng) {
  validate_batch_spec(p, spec);
  BatchDraw draw;
  redraw_batch(p, spec, rng, draw);
  return draw;
}

/// Every batch of the (finite) batch space, each equally likely under spec.
/// With replacement this is all N^S ordered tuples; without, all S-subsets.
inline std::vector<BatchDraw> enumerate_batches(const Potential& p,
                                                const BatchSpec& spec,
                                                std::size_t limit = 1u << 16) {
  validate_batch_spec(p, spec);
  const std::size_t n = p.components();
  std::vector<BatchDraw> all;
  if (is_full_batch(p, spec)) {
    Stream unused;
    all.push_back(draw_batch(p, spec, unused));
    return all;
  }
  std::vector<std::size_t> idx(spec.size, 0);
  if (!spec.replacement)
    for (std::size_t j = 0; j < spec.size; ++j) idx[j] = j;
  while (true) {
    if (all.size() >= limit) throw Unsupported("batch space too large to enumerate");
    all.push_back(p.make_batch(idx));
    // advance to the next tuple / combination
    std::size_t pos = spec.size;
    if (spec.replacement) {
      while (pos > 0 && idx[pos - 1] + 1 == n) --pos;
      if (pos == 0) break;
      ++idx[pos - 1];
      for (std::size_t j = pos; j < spec.size; ++j) idx[j] = 0;
    } else {
      while (pos > 0 && idx[pos - 1] == n - spec.size + pos - 1) --pos;
      if (pos == 0) break;
      ++idx[pos - 1];
      for (std::size_t j = pos; j < spec.size; ++j) idx[j] = idx[j - 1] + 1;
    }
  }
  return all;
}

struct ConsistencyResult {
  Vec mc_mean;
  double deviation = 0.0;  // |mc_mean - b(x)|_inf
};

/// Monte Carlo estimate of E_xi[b^xi(x)] from M independent batches. The
/// deviation is measured in the sup norm, matching the declared batch bound,
/// so callers can compare it against the CLT band 4 B / sqrt(M).
inline ConsistencyResult check_consistency(const Potential& p, const BatchSpec& spec,
                                           std::span<const double> x, std::size_t samples,
                                           Stream& rng) {
  require(samples >= 100, "consistency check needs at least 100 batches");
  require(x.size() == p.dim(), "point dimension does not match potential");
  validate_batch_spec(p, spec);
  ConsistencyResult result;
  result.mc_mean.assign(p.dim(), 0.0);
  BatchDraw draw;
  Vec b(p.dim());
  for (std::size_t m = 0; m < samples; ++m) {
    redraw_batch(p, spec, rng, draw);
    p.batch_drift_into(draw, x, b);
    for (std::size_t c = 0; c < p.dim(); ++c) result.mc_mean[c] += b[c];
  }
  for (double& v : result.mc_mean) v /= static_cast<double>(samples);
  result.deviation = max_abs_diff(result.mc_mean, drift_full(p, x));
  return result;
}

/// Average of b^xi(x) over the whole batch space.
inline ConsistencyResult exhaustive_consistency(const Potential& p,
                                                const BatchSpec& spec,
                                                std::span<const double> x) {
  require(x.size() == p.dim(), "point dimension does not match potential");
  const auto batches = enumerate_batches(p, spec);
  ConsistencyResult result;
  result.mc_mean.assign(p.dim(), 0.0);
  Vec b(p.dim());
  for (const auto& draw : batches) {
    p.batch_drift_into(draw, x, b);
    for (std::size_t c = 0; c < p.dim(); ++c) result.mc_mean[c] += b[c];
  }
  for (double& v : result.mc_mean) v /= static_cast<double>(batches.size());
  result.deviation = max_abs_diff(result.mc_mean, drift_full(p, x));
  return result;
}

/// Per-coordinate variance of the batch shift b^xi - b, for additive kinds.
/// For LinearDrift this is a^2 Var(mean z_xi); used as the intercept variance
/// of the SGLD moment recursion.
inline Vec intercept_variance(const Potential& p, const BatchSpec& spec) {
  validate_batch_spec(p, spec);
  const std::size_t n = p.components();
  Vec var(p.dim(), 0.0);
  if (is_full_batch(p, spec)) return var;
  double scale = 1.0;
  auto accumulate = [&](std::span<const double> z, double factor) {
    for (std::size_t c = 0; c < p.dim(); ++c) var[c] += factor * z[c] * z[c];
  };
  if (const auto* lin = std::get_if<LinearDrift>(&p.kind())) {
    for (const auto& z : lin->offsets) accumulate(z, 1.0 / static_cast<double>(n));
    scale = lin->a * lin->a;
  } else if (const auto* mix = std::get_if<GaussianMixture1D>(&p.kind())) {
    for (double c : mix->gradient_offsets)
      accumulate(std::span<const double>(&c, 1), 1.0 / static_cast<double>(n));
  } else {
    throw Unsupported("intercept variance needs an additive batch structure");
  }
  const auto s = static_cast<double>(spec.size);
  double factor = scale / s;
  if (!spec.replacement)
    factor *= static_cast<double>(n - spec.size) / static_cast<double>(n - 1);
  for (double& v : var) v *= factor;
  return var;
}

struct MetadataReport {
  std::size_t samples = 0;
  std::size_t batches_checked = 0;
  std::size_t dissipation_violations = 0;
  std::size_t lipschitz_violations = 0;
  std::size_t batch_bound_violations = 0;
  double max_batch_deviation = 0.0;
  double max_lipschitz_ratio = 0.0;
  double min_dissipation_slack = std::numeric_limits<double>::infinity();

  bool ok() const noexcept {
    return dissipation_violations == 0 && lipschitz_violations == 0 &&
           batch_bound_violations == 0;
  }
};

/// Spot-checks the declared constants on `samples` random points with
/// |x| <= 10 sqrt(d): dissipation and Lipschitz for the full drift and every
/// batch drift, and sup |b^xi - b|_inf <= B. Batch spaces too large to
/// enumerate are sampled instead.
inline MetadataReport validate_metadata(const Potential& p, const BatchSpec* spec,
                                        Stream& rng, std::size_t samples = 1000) {
  const std::size_t d = p.dim();
  const auto& meta = p.metadata();
  const double radius = 10.0 * std::sqrt(static_cast<double>(d));
  constexpr double kTol = 1e-9;

  std::vector<BatchDraw> batches;
  bool enumerable = true;
  if (spec != nullptr) {
    try {
      batches = enumerate_batches(p, *spec, 4096);
    } catch (const Unsupported&) {
      enumerable = false;
    }
  }

  auto random_point = [&](Vec& x) {
    double len = 0.0;
    do {
      for (auto& v : x) v = rng.normal();
      len = norm2(x);
    } while (len == 0.0);
    const double r = radius * rng.uniform();
    for (auto& v : x) v *= r / len;
  };

  MetadataReport report;
  report.samples = samples;
  Vec x(d), y(d), bx(d), by(d), full(d);
  BatchDraw scratch;
  for (std::size_t s = 0; s < samples; ++s) {
    random_point(x);
    random_point(y);
    p.drift_into(x, full);

    auto check_field = [&](const BatchDraw* batch) {
      if (batch) {
        p.batch_drift_into(*batch, x, bx);
        p.batch_drift_into(*batch, y, by);
      } else {
        bx = full;
        p.drift_into(y, by);
      }
      const double x2 = dot(x, x);
      const double slack = -meta.dissipation_mu * x2 + meta.dissipation_sigma - dot(x, bx);
      report.min_dissipation_slack = std::min(report.min_dissipation_slack, slack);
      if (slack < -kTol * (1.0 + x2)) ++report.dissipation_violations;
      const double dxy = dist2(x, y);
      if (dxy > 0.0) {
        const double ratio = dist2(bx, by) / dxy;
        report.max_lipschitz_ratio = std::max(report.max_lipschitz_ratio, ratio);
        if (ratio > meta.lipschitz * (1.0 + kTol) + kTol) ++report.lipschitz_violations;
      }
      if (batch) {
        const double dev = max_abs_diff(bx, full);
        report.max_batch_deviation = std::max(report.max_batch_deviation, dev);
        if (dev > meta.batch_bound * (1.0 + kTol) + kTol) ++report.batch_bound_violations;
      }
    };

    check_field(nullptr);
    if (spec == nullptr) continue;
    if (enumerable) {
      for (const auto& b : batches) check_field(&b);
      report.batches_checked = batches.size();
    } else {
      for (int r = 0; r < 16; ++r) {
        redraw_batch(p, *spec, rng, scratch);
        check_field(&scratch);
        ++report.batches_checked;
      }
    }
  }
  return report;
}

}  // namespace sgld
