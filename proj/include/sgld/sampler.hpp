#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <fstream>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "sgld/core.hpp"
#include "sgld/model.hpp"
#include "sgld/rng.hpp"
#include "sgld/schedule.hpp"

namespace sgld {

/// ULA when `batch` is empty, SGLD otherwise.
struct SamplerConfig {
  double beta_inv = 1.0;
  StepSchedule schedule = StepSchedule::constant(0.01);
  std::optional<BatchSpec> batch;
  std::uint64_t seed = 0;
};

/// Checks beta_inv > 0, the batch spec, and the linear-stability guard
/// eta < 2 / L for constant schedules.
inline void validate(const SamplerConfig& cfg, const Potential& p) {
  require(cfg.beta_inv > 0.0 && std::isfinite(cfg.beta_inv), "beta_inv must be positive");
  if (cfg.batch) validate_batch_spec(p, *cfg.batch);
  const double lip = p.metadata().lipschitz;
  if (cfg.schedule.kind() == StepSchedule::Kind::Constant && lip > 0.0)
    require(cfg.schedule.eta() < 2.0 / lip,
            "constant step must satisfy eta < 2 / L for linear stability");
}

struct ChainState {
  Vec x;
  std::size_t k = 0;
  double t = 0.0;
  Stream rng;
};

/// Point mass when every variance is zero.
struct InitialLaw {
  Vec mean;
  Vec var;

  static InitialLaw point(Vec x) {
    Vec v(x.size(), 0.0);
    return {std::move(x), std::move(v)};
  }
};

/// Starting state of chain `index`, with its stream derived from (seed, index).
inline ChainState initial_state(const InitialLaw& init, std::uint64_t seed,
                                std::uint64_t index) {
  require(init.mean.size() == init.var.size() && !init.mean.empty(),
          "initial law dimension mismatch");
  ChainState s{init.mean, 0, 0.0, Stream(seed, index)};
  for (std::size_t c = 0; c < s.x.size(); ++c)
    if (init.var[c] > 0.0) s.x[c] += std::sqrt(init.var[c]) * s.rng.normal();
  return s;
}

namespace detail {

/// x <- x + eta b + sqrt(2 beta_inv eta) z, drawing z from the chain stream
/// unless supplied.
inline void euler_update(ChainState& s, std::span<const double> drift, double h,
                         double beta_inv, std::optional<std::span<const double>> z,
                         std::size_t chain) {
  const double scale = std::sqrt(2.0 * beta_inv * h);
  for (std::size_t c = 0; c < s.x.size(); ++c) {
    const double noise = z ? (*z)[c] : s.rng.normal();
    s.x[c] += h * drift[c] + scale * noise;
  }
  if (!all_finite(s.x))
    throw DivergenceError(chain, s.k,
                          "chain " + std::to_string(chain) + " diverged at step " +
                              std::to_string(s.k));
  ++s.k;
  s.t += h;
}

inline void check_noise(std::optional<std::span<const double>> z, std::size_t d) {
  if (z) require(z->size() == d, "noise vector dimension does not match potential");
}

}  // namespace detail

/// Reusable per-thread buffers for the in-place steppers.
struct StepScratch {
  Vec drift;
  BatchDraw batch;
};

/// One ULA step in place.
inline void advance_ula(ChainState& s, const Potential& p, const SamplerConfig& cfg,
                        StepScratch& scratch, std::size_t chain = 0,
                        std::optional<std::span<const double>> z = std::nullopt) {
  scratch.drift.resize(p.dim());
  p.drift_into(s.x, scratch.drift);
  detail::euler_update(s, scratch.drift, cfg.schedule.step(s.k), cfg.beta_inv, z, chain);
}

/// One SGLD step in place; the batch used is left in scratch.batch. The batch
/// is drawn before the Gaussian noise, and full batches consume no
/// randomness, so S = N reproduces ULA exactly.
inline void advance_sgld(ChainState& s, const Potential& p, const SamplerConfig& cfg,
                         StepScratch& scratch, std::size_t chain = 0,
                         std::optional<std::span<const double>> z = std::nullopt,
                         const BatchDraw* injected = nullptr) {
  if (injected == nullptr) {
    require(cfg.batch.has_value(), "SGLD step needs a batch spec or an injected batch");
    redraw_batch(p, *cfg.batch, s.rng, scratch.batch);
  } else {
    scratch.batch = *injected;
  }
  scratch.drift.resize(p.dim());
  p.batch_drift_into(scratch.batch, s.x, scratch.drift);
  detail::euler_update(s, scratch.drift, cfg.schedule.step(s.k), cfg.beta_inv, z, chain);
}

inline void advance(ChainState& s, const Potential& p, const SamplerConfig& cfg,
                    StepScratch& scratch, std::size_t chain = 0) {
  if (cfg.batch)
    advance_sgld(s, p, cfg, scratch, chain);
  else
    advance_ula(s, p, cfg, scratch, chain);
}

/// x' = x + eta_k b(x) + sqrt(2 beta_inv eta_k) z.
inline ChainState ula_step(const ChainState& state, const Potential& p,
                           const SamplerConfig& cfg,
                           std::optional<std::span<const double>> z = std::nullopt) {
  require(state.x.size() == p.dim(), "state dimension does not match potential");
  detail::check_noise(z, p.dim());
  ChainState next = state;
  StepScratch scratch;
  advance_ula(next, p, cfg, scratch, 0, z);
  return next;
}

/// x' = x + eta_k b^xi(x) + sqrt(2 beta_inv eta_k) z; returns the batch used.
inline std::pair<ChainState, BatchDraw> sgld_step(
    const ChainState& state, const Potential& p, const SamplerConfig& cfg,
    std::optional<std::span<const double>> z = std::nullopt,
    const BatchDraw* batch = nullptr) {
  require(state.x.size() == p.dim(), "state dimension does not match potential");
  detail::check_noise(z, p.dim());
  if (batch == nullptr && cfg.batch) validate_batch_spec(p, *cfg.batch);
  ChainState next = state;
  StepScratch scratch;
  advance_sgld(next, p, cfg, scratch, 0, z, batch);
  return {std::move(next), std::move(scratch.batch)};
}

/// Continuous interpolation on [T_k, T_{k+1}):
/// X_{T_k} + (t - T_k) b^xi(X_{T_k}) + sqrt(2 beta_inv (t - T_k)) w.
inline Vec interpolate(const ChainState& state, const Potential& p,
                       const SamplerConfig& cfg, const BatchDraw& batch, double t,
                       std::span<const double> w) {
  require(state.x.size() == p.dim() && w.size() == p.dim(),
          "interpolation dimension mismatch");
  const double next = state.t + cfg.schedule.step(state.k);
  require(t >= state.t && t < next, "interpolation time outside [T_k, T_{k+1})");
  const double elapsed = t - state.t;
  if (elapsed == 0.0) return state.x;
  Vec b(p.dim());
  p.batch_drift_into(batch, state.x, b);
  const double scale = std::sqrt(2.0 * cfg.beta_inv * elapsed);
  Vec out(state.x);
  for (std::size_t c = 0; c < out.size(); ++c) out[c] += elapsed * b[c] + scale * w[c];
  return out;
}

/// M chains with streams derived from (seed, stream_offset + chain index).
struct ChainEnsemble {
  std::vector<ChainState> chains;

  static ChainEnsemble make(const InitialLaw& init, std::uint64_t seed, std::size_t m,
                            std::uint64_t stream_offset = 0) {
    ChainEnsemble e;
    e.chains.reserve(m);
    for (std::size_t i = 0; i < m; ++i)
      e.chains.push_back(initial_state(init, seed, stream_offset + i));
    return e;
  }
};

/// Positions of every chain at grid index k, chain-major.
struct Snapshot {
  std::size_t k = 0;
  double t = 0.0;
  std::size_t dim = 1;
  Vec positions;

  std::size_t chains() const noexcept { return dim == 0 ? 0 : positions.size() / dim; }
  std::span<const double> chain(std::size_t i) const {
    return std::span<const double>(positions).subspan(i * dim, dim);
  }
  Vec coordinate(std::size_t c) const {
    Vec out(chains());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = positions[i * dim + c];
    return out;
  }
};

using Observer = std::function<void(const Snapshot&)>;

struct EnsembleOptions {
  std::size_t chains = 1;
  std::size_t horizon = 1;              // final grid index K
  std::vector<std::size_t> record_at;   // grid indices to snapshot; {K} if empty
  unsigned threads = 1;                 // 0 = hardware concurrency
  InitialLaw init;
  std::uint64_t stream_offset = 0;
};

/// Evolves M independent chains to T_K and snapshots them at the requested
/// grid indices. Each chain is a unit of work with its own stream and results
/// land in fixed slots, so output is bit-identical for any thread count.
/// Observers run afterwards, once per snapshot in increasing k.
inline std::vector<Snapshot> run_ensemble(const Potential& p, const SamplerConfig& cfg,
                                          const EnsembleOptions& opt,
                                          std::span<const Observer> observers = {}) {
  require(opt.chains >= 1, "ensemble needs at least one chain");
  require(opt.init.mean.size() == p.dim(), "initial law dimension does not match potential");
  validate(cfg, p);

  std::vector<std::size_t> record = opt.record_at;
  if (record.empty()) record.push_back(opt.horizon);
  std::sort(record.begin(), record.end());
  record.erase(std::unique(record.begin(), record.end()), record.end());
  require(record.back() <= opt.horizon, "record index beyond horizon");
  if (cfg.schedule.kind() == StepSchedule::Kind::Explicit)
    require(opt.horizon <= cfg.schedule.length(), "horizon beyond explicit schedule");

  const std::size_t d = p.dim();
  const auto times = cfg.schedule.grid_times(opt.horizon);
  std::vector<Snapshot> snaps(record.size());
  for (std::size_t r = 0; r < record.size(); ++r) {
    snaps[r].k = record[r];
    snaps[r].t = times[record[r]];
    snaps[r].dim = d;
    snaps[r].positions.assign(opt.chains * d, 0.0);
  }

  unsigned threads = opt.threads == 0 ? std::max(1u, std::thread::hardware_concurrency())
                                      : opt.threads;
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, opt.chains));

  struct Failure {
    std::size_t chain = static_cast<std::size_t>(-1);
    std::exception_ptr error;
  };
  std::vector<Failure> failures(threads);

  auto work = [&](unsigned tid) {
    const std::size_t begin = opt.chains * tid / threads;
    const std::size_t end = opt.chains * (tid + 1) / threads;
    StepScratch scratch;
    for (std::size_t i = begin; i < end; ++i) {
      try {
        ChainState s = initial_state(opt.init, cfg.seed, opt.stream_offset + i);
        for (std::size_t r = 0; r < record.size(); ++r) {
          while (s.k < record[r]) advance(s, p, cfg, scratch, i);
          std::copy(s.x.begin(), s.x.end(), snaps[r].positions.begin() + i * d);
        }
      } catch (...) {
        failures[tid] = {i, std::current_exception()};
        return;
      }
    }
  };

  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work, t);
    for (auto& th : pool) th.join();
  }
  const auto first = std::min_element(
      failures.begin(), failures.end(),
      [](const Failure& a, const Failure& b) { return a.chain < b.chain; });
  if (first->error) std::rethrow_exception(first->error);

  for (const auto& snap : snaps)
    for (const auto& obs : observers) obs(snap);
  return snaps;
}

/// Per-coordinate sample moments of a snapshot with standard errors of the
/// mean and of the (unbiased) variance.
struct SampleMoments {
  Vec mean;
  Vec var;
  Vec mean_se;
  Vec var_se;
  double mean_sq_norm = 0.0;  // E|X|^2
};

inline SampleMoments sample_moments(const Snapshot& snap) {
  const std::size_t n = snap.chains();
  const std::size_t d = snap.dim;
  require(n >= 2, "sample moments need at least two chains");
  SampleMoments m{Vec(d, 0.0), Vec(d, 0.0), Vec(d, 0.0), Vec(d, 0.0), 0.0};
  const auto nn = static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = snap.chain(i);
    for (std::size_t c = 0; c < d; ++c) m.mean[c] += x[c];
    m.mean_sq_norm += dot(x, x);
  }
  m.mean_sq_norm /= nn;
  for (double& v : m.mean) v /= nn;
  Vec m4(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = snap.chain(i);
    for (std::size_t c = 0; c < d; ++c) {
      const double u = x[c] - m.mean[c];
      m.var[c] += u * u;
      m4[c] += u * u * u * u;
    }
  }
  for (std::size_t c = 0; c < d; ++c) {
    const double biased = m.var[c] / nn;
    m.var[c] /= nn - 1.0;
    m4[c] /= nn;
    m.mean_se[c] = std::sqrt(m.var[c] / nn);
    m.var_se[c] = std::sqrt(std::max(m4[c] - biased * biased, 0.0) / nn);
  }
  return m;
}

/// "%.17g": round-trips every double.
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Sample dump with columns chain,k,t,x_1..x_d.
inline void write_samples_csv(std::ostream& out, std::span<const Snapshot> snaps) {
  const std::size_t d = snaps.empty() ? 0 : snaps.front().dim;
  out << "chain,k,t";
  for (std::size_t c = 1; c <= d; ++c) out << ",x_" << c;
  out << '\n';
  for (const auto& snap : snaps)
    for (std::size_t i = 0; i < snap.chains(); ++i) {
      out << i << ',' << snap.k << ',' << format_double(snap.t);
      for (double v : snap.chain(i)) out << ',' << format_double(v);
      out << '\n';
    }
}

struct RunMetadata {
  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::string version = "0.1.0";
};

/// Sidecar recording what is needed to reproduce a sample dump.
inline void write_metadata(std::ostream& out, const RunMetadata& meta) {
  out << "seed=" << meta.seed << '\n'
      << "generator=" << kGeneratorName << '\n'
      << "version=" << meta.version << '\n'
      << "threads=" << meta.threads << '\n';
}

}  // namespace sgld
