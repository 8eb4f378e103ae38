#pragma once

#include <cctype>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "sgld/core.hpp"

namespace sgld {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ExperimentKind {
  RateSweep,
  ScheduleDecay,
  SgldSweep,
  StationaryBias,
  Contraction,
  Verify
};

inline std::string_view to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::RateSweep: return "rate-sweep";
    case ExperimentKind::ScheduleDecay: return "schedule-decay";
    case ExperimentKind::SgldSweep: return "sgld-sweep";
    case ExperimentKind::StationaryBias: return "stationary-bias";
    case ExperimentKind::Contraction: return "contraction";
    case ExperimentKind::Verify: return "verify";
  }
  return "";
}

inline ExperimentKind parse_experiment_kind(std::string_view s) {
  for (auto k : {ExperimentKind::RateSweep, ExperimentKind::ScheduleDecay,
                 ExperimentKind::SgldSweep, ExperimentKind::StationaryBias,
                 ExperimentKind::Contraction, ExperimentKind::Verify})
    if (to_string(k) == s) return k;
  throw ConfigError("unknown experiment kind '" + std::string(s) + "'");
}

struct PotentialSpec {
  std::string kind = "linear";  // linear | mixture
  std::size_t dim = 1;
  double a = 1.0;
  std::vector<Vec> offsets;
  Vec weights{0.5, 0.5};
  Vec means{-1.0, 1.0};
  double variance = 0.5;
  Vec gradient_offsets;
};

struct SamplerSpec {
  double beta_inv = 0.5;
  std::size_t batch_size = 0;  // 0 selects ULA
  bool replacement = true;
  Vec x0{1.0};
  Vec v0{0.0};
  std::size_t chains = 10000;
};

struct ScheduleSpec {
  std::string kind = "constant";  // constant | poly_decay | explicit
  double eta = 0.1;
  std::size_t ell = 4;
  double theta = 0.5;
  Vec steps;
  double step_cap = 0.0;  // 0 selects 1 / (2 L)
  bool enforce_step_cap = false;
};

enum class KlOrder { DiscreteExact, ExactDiscrete };

/// Everything an experiment needs. Defaults reproduce the reference runs of
/// each subcommand; see defaults_for().
struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::Verify;
  PotentialSpec potential;
  SamplerSpec sampler;
  ScheduleSpec schedule;

  Vec eta_grid;
  Vec theta_list;
  double horizon_t = 50.0;
  std::size_t horizon_k = 10000;
  std::size_t checkpoints = 10;
  std::vector<std::size_t> dims{1};
  std::uint64_t seed = 20240611;
  unsigned threads = 1;
  KlOrder kl_order = KlOrder::DiscreteExact;
  bool dump_samples = false;  // keep recorded ensemble snapshots for samples.csv

  // envelope fitting; a0 <= 0 fits A0 from the exact relaxation of KL
  double a0 = 0.0;

  // Monte Carlo
  double mc_eta = 0.1;
  std::size_t mc_chains = 100000;
  double burn_in = 10.0;
  double sample_interval = 1.0;
  std::size_t samples_per_chain = 50;
  double min_effective_samples = 0.0;
  std::size_t tv_bins = 64;
  double w2_eps = 0.05;
  double init_left = -2.0;
  double init_right = 2.0;
  std::size_t consistency_points = 20;
  std::size_t consistency_samples = 10000;

  // acceptance windows
  double kl_slope_min = 1.9, kl_slope_max = 2.1;
  double w2_slope_min = 0.9, w2_slope_max = 1.1;
  double decay_slope_tol = 0.15;
  double surrogate_slope_min = 1.85, surrogate_slope_max = 2.15;
  double ratio_min = 1.4, ratio_max = 2.8;
  double contraction_factor = 5.0;
  double moment_bound_factor = 3.0;
  double mc_sigmas = 5.0;
  double slope_stability = 0.05;
};

/// Reference settings for each experiment kind.
inline ExperimentConfig defaults_for(ExperimentKind kind) {
  ExperimentConfig c;
  c.kind = kind;
  switch (kind) {
    case ExperimentKind::RateSweep:
      c.eta_grid = {0.1, 0.05, 0.025, 0.0125};
      c.horizon_t = 50.0;
      c.dims = {1, 2, 4, 8};
      break;
    case ExperimentKind::ScheduleDecay:
      c.schedule.kind = "poly_decay";
      c.schedule.ell = 4;
      c.theta_list = {0.3, 0.5, 0.8};
      c.horizon_k = 10000;
      break;
    case ExperimentKind::SgldSweep:
      c.potential.offsets = {{-1.0}, {1.0}};
      c.sampler.batch_size = 1;
      c.eta_grid = {0.2, 0.1, 0.05, 0.025};
      c.horizon_t = 50.0;
      c.mc_eta = 0.1;
      c.mc_chains = 100000;
      break;
    case ExperimentKind::StationaryBias:
      c.potential.kind = "mixture";
      c.potential.gradient_offsets = {-1.0, 1.0};
      c.sampler.beta_inv = 1.0;
      c.sampler.batch_size = 1;
      c.sampler.chains = 40000;
      c.sampler.x0 = {0.0};
      c.eta_grid = {0.2, 0.1, 0.05};
      c.burn_in = 10.0;
      c.sample_interval = 2.0;
      c.samples_per_chain = 50;
      c.min_effective_samples = 1e6;
      break;
    case ExperimentKind::Contraction:
      c.potential.kind = "mixture";
      c.potential.gradient_offsets = {-1.0, 1.0};
      c.sampler.beta_inv = 1.0;
      c.sampler.batch_size = 1;
      c.sampler.chains = 10000;
      c.schedule.eta = 0.05;
      c.horizon_t = 20.0;
      c.checkpoints = 20;
      break;
    case ExperimentKind::Verify:
      c.potential.offsets = {{-1.0}, {1.0}};
      c.sampler.batch_size = 1;
      c.sampler.chains = 10000;
      c.eta_grid = {0.1, 0.05, 0.025, 0.0125};
      c.horizon_t = 50.0;
      c.mc_chains = 20000;
      break;
  }
  return c;
}

namespace config_detail {

inline std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::string where(const std::string& key) { return "config key '" + key + "'"; }

inline double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end || v.empty())
    throw ConfigError(where(key) + ": expected a number, got '" + v + "'");
  return out;
}

inline std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end || v.empty()) {
    // accept integral values written in floating notation, e.g. 1e4
    const double d = to_double(key, v);
    if (d < 0.0 || d != std::floor(d) || d > 1.8e19)
      throw ConfigError(where(key) + ": expected a non-negative integer, got '" + v + "'");
    return static_cast<std::uint64_t>(d);
  }
  return out;
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(where(key) + ": expected true/false, got '" + v + "'");
}

inline Vec to_list(const std::string& key, const std::string& v) {
  Vec out;
  if (trim(v).empty()) return out;
  for (const auto& item : split(v, ',')) out.push_back(to_double(key, item));
  return out;
}

}  // namespace config_detail

/// Parses the flat sectioned key-value format:
///
///   # comment
///   [potential]
///   kind = linear
///   offsets = -1; 1        # vectors separated by ';', coordinates by ','
///
/// Sections are potential, sampler, schedule and experiment. Unknown sections
/// or keys, duplicate keys and malformed values are errors. Values not given
/// keep the defaults of `base`.
inline ExperimentConfig parse_config(std::istream& in, ExperimentConfig base) {
  using namespace config_detail;
  ExperimentConfig& c = base;
  std::string section;
  std::string line;
  std::size_t lineno = 0;
  std::map<std::string, std::size_t> seen;

  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string text = trim(line);
    if (text.empty()) continue;
    const std::string at = " (line " + std::to_string(lineno) + ")";
    if (text.front() == '[') {
      if (text.back() != ']') throw ConfigError("malformed section header" + at);
      section = trim(std::string_view(text).substr(1, text.size() - 2));
      if (section != "potential" && section != "sampler" && section != "schedule" &&
          section != "experiment")
        throw ConfigError("unknown section [" + section + "]" + at);
      continue;
    }
    const auto eq = text.find('=');
    if (eq == std::string::npos) throw ConfigError("expected key = value" + at);
    const std::string key = trim(std::string_view(text).substr(0, eq));
    const std::string value = trim(std::string_view(text).substr(eq + 1));
    if (section.empty()) throw ConfigError("key '" + key + "' outside any section" + at);
    for (char ch : key)
      if (!(std::islower(static_cast<unsigned char>(ch)) ||
            std::isdigit(static_cast<unsigned char>(ch)) || ch == '_'))
        throw ConfigError("keys must be lower_snake_case: '" + key + "'" + at);
    const std::string full = section + "." + key;
    if (seen.count(full)) throw ConfigError("duplicate key '" + full + "'" + at);
    seen[full] = lineno;

    auto num = [&] { return to_double(full, value); };
    auto count = [&] { return static_cast<std::size_t>(to_u64(full, value)); };
    auto list = [&] { return to_list(full, value); };
    bool known = true;

    if (section == "potential") {
      auto& p = c.potential;
      if (key == "kind") {
        if (value != "linear" && value != "mixture")
          throw ConfigError(where(full) + ": kind must be linear or mixture" + at);
        p.kind = value;
      } else if (key == "dim") p.dim = count();
      else if (key == "a") p.a = num();
      else if (key == "offsets") {
        p.offsets.clear();
        if (!value.empty())
          for (const auto& vec : split(value, ';')) p.offsets.push_back(to_list(full, vec));
      } else if (key == "weights") p.weights = list();
      else if (key == "means") p.means = list();
      else if (key == "variance") p.variance = num();
      else if (key == "gradient_offsets") p.gradient_offsets = list();
      else known = false;
    } else if (section == "sampler") {
      auto& s = c.sampler;
      if (key == "beta_inv") s.beta_inv = num();
      else if (key == "batch_size") s.batch_size = count();
      else if (key == "replacement") s.replacement = to_bool(full, value);
      else if (key == "x0") s.x0 = list();
      else if (key == "v0") s.v0 = list();
      else if (key == "chains") s.chains = count();
      else known = false;
    } else if (section == "schedule") {
      auto& s = c.schedule;
      if (key == "kind") {
        if (value != "constant" && value != "poly_decay" && value != "explicit")
          throw ConfigError(where(full) + ": kind must be constant, poly_decay or explicit" +
                            at);
        s.kind = value;
      } else if (key == "eta") s.eta = num();
      else if (key == "ell") s.ell = count();
      else if (key == "theta") s.theta = num();
      else if (key == "steps") s.steps = list();
      else if (key == "step_cap") s.step_cap = num();
      else if (key == "enforce_step_cap") s.enforce_step_cap = to_bool(full, value);
      else known = false;
    } else {
      if (key == "kind") c.kind = parse_experiment_kind(value);
      else if (key == "eta_grid") c.eta_grid = list();
      else if (key == "theta_list") c.theta_list = list();
      else if (key == "horizon_t") c.horizon_t = num();
      else if (key == "horizon_k") c.horizon_k = count();
      else if (key == "checkpoints") c.checkpoints = count();
      else if (key == "dims") {
        c.dims.clear();
        for (double d : list()) {
          if (d < 1 || d != std::floor(d))
            throw ConfigError(where(full) + ": dimensions must be positive integers" + at);
          c.dims.push_back(static_cast<std::size_t>(d));
        }
      } else if (key == "seed") c.seed = to_u64(full, value);
      else if (key == "threads") c.threads = static_cast<unsigned>(count());
      else if (key == "kl_order") {
        if (value == "discrete_exact") c.kl_order = KlOrder::DiscreteExact;
        else if (value == "exact_discrete") c.kl_order = KlOrder::ExactDiscrete;
        else throw ConfigError(where(full) + ": kl_order must be discrete_exact or exact_discrete" + at);
      } else if (key == "dump_samples") c.dump_samples = to_bool(full, value);
      else if (key == "a0") c.a0 = num();
      else if (key == "mc_eta") c.mc_eta = num();
      else if (key == "mc_chains") c.mc_chains = count();
      else if (key == "burn_in") c.burn_in = num();
      else if (key == "sample_interval") c.sample_interval = num();
      else if (key == "samples_per_chain") c.samples_per_chain = count();
      else if (key == "min_effective_samples") c.min_effective_samples = num();
      else if (key == "tv_bins") c.tv_bins = count();
      else if (key == "w2_eps") c.w2_eps = num();
      else if (key == "init_left") c.init_left = num();
      else if (key == "init_right") c.init_right = num();
      else if (key == "consistency_points") c.consistency_points = count();
      else if (key == "consistency_samples") c.consistency_samples = count();
      else if (key == "kl_slope_min") c.kl_slope_min = num();
      else if (key == "kl_slope_max") c.kl_slope_max = num();
      else if (key == "w2_slope_min") c.w2_slope_min = num();
      else if (key == "w2_slope_max") c.w2_slope_max = num();
      else if (key == "decay_slope_tol") c.decay_slope_tol = num();
      else if (key == "surrogate_slope_min") c.surrogate_slope_min = num();
      else if (key == "surrogate_slope_max") c.surrogate_slope_max = num();
      else if (key == "ratio_min") c.ratio_min = num();
      else if (key == "ratio_max") c.ratio_max = num();
      else if (key == "contraction_factor") c.contraction_factor = num();
      else if (key == "moment_bound_factor") c.moment_bound_factor = num();
      else if (key == "mc_sigmas") c.mc_sigmas = num();
      else if (key == "slope_stability") c.slope_stability = num();
      else known = false;
    }
    if (!known) throw ConfigError("unknown key '" + full + "'" + at);
  }
  return c;
}

inline ExperimentConfig parse_config_string(const std::string& text, ExperimentConfig base) {
  std::istringstream in(text);
  return parse_config(in, std::move(base));
}

inline ExperimentConfig load_config(const std::string& path, ExperimentConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  return parse_config(in, std::move(base));
}

}  // namespace sgld
