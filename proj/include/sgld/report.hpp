#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <stdexcept>
#include <string>

#include "sgld/config.hpp"
#include "sgld/experiments.hpp"
#include "sgld/sampler.hpp"

namespace sgld {

/// results.csv: experiment,parameter,metric,value,stderr with %.17g numbers.
/// Non-finite values are rejected rather than written.
inline void write_results_csv(std::ostream& out, const ExperimentResult& res) {
  out << "experiment,parameter,metric,value,stderr\n";
  for (const auto& r : res.rows) {
    if (!std::isfinite(r.parameter) || !std::isfinite(r.value) || !std::isfinite(r.std_error))
      throw std::runtime_error("non-finite value in row " + r.experiment + "/" + r.metric);
    out << r.experiment << ',' << format_double(r.parameter) << ',' << r.metric << ','
        << format_double(r.value) << ',' << format_double(r.std_error) << '\n';
  }
}

/// Plain-text verdict: tolerances in force, then one line per check.
inline void write_report(std::ostream& out, const ExperimentResult& res,
                         const ExperimentConfig& cfg, const RunMetadata& meta) {
  out << "experiment: " << res.id << '\n'
      << "seed: " << meta.seed << '\n'
      << "threads: " << meta.threads << '\n'
      << "generator: " << kGeneratorName << '\n'
      << "version: " << meta.version << '\n'
      << "kl order: "
      << (cfg.kl_order == KlOrder::DiscreteExact ? "D_KL(discrete || exact)"
                                                 : "D_KL(exact || discrete)")
      << '\n'
      << "tolerances:\n"
      << "  KL slope window [" << cfg.kl_slope_min << ", " << cfg.kl_slope_max << "]\n"
      << "  W2 slope window [" << cfg.w2_slope_min << ", " << cfg.w2_slope_max << "]\n"
      << "  decay slope -2 theta +/- " << cfg.decay_slope_tol << '\n'
      << "  surrogate KL slope window [" << cfg.surrogate_slope_min << ", "
      << cfg.surrogate_slope_max << "]\n"
      << "  bias ratio window [" << cfg.ratio_min << ", " << cfg.ratio_max << "]\n"
      << "  slope stability " << cfg.slope_stability << '\n'
      << "  Monte Carlo agreement " << cfg.mc_sigmas << " standard errors\n"
      << "  contraction factor " << cfg.contraction_factor << '\n'
      << "  moment bound factor " << cfg.moment_bound_factor << '\n'
      << '\n';
  std::size_t failed = 0;
  for (const auto& c : res.checks) {
    out << (c.pass ? "PASS  " : "FAIL  ") << c.name << "  expected " << c.expected
        << "  observed " << format_double(c.observed) << '\n';
    failed += !c.pass;
  }
  if (!res.notes.empty()) {
    out << "\nnotes:\n";
    for (const auto& n : res.notes) out << "  " << n << '\n';
  }
  char secs[32];
  std::snprintf(secs, sizeof secs, "%.3f", res.seconds);
  out << '\n'
      << res.checks.size() - failed << " of " << res.checks.size() << " checks passed in "
      << secs << " s\n"
      << "verdict: " << (failed == 0 ? "PASS" : "FAIL") << '\n';
}

/// One two-column file per plot series, named <series>.dat.
inline void write_plot_data(const std::filesystem::path& dir, const ExperimentResult& res) {
  std::filesystem::create_directories(dir);
  for (const auto& s : res.plots) {
    std::ofstream out(dir / (s.name + ".dat"));
    if (!out) throw std::runtime_error("cannot write plot data " + s.name);
    for (const auto& [x, y] : s.points) out << format_double(x) << ' ' << format_double(y) << '\n';
  }
}

/// Writes results.csv, report.txt and meta.txt (and plot/ when asked) into
/// `dir`, creating it if needed.
inline void write_outputs(const std::filesystem::path& dir, const ExperimentResult& res,
                          const ExperimentConfig& cfg, const RunMetadata& meta,
                          bool plot_data) {
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream f(dir / name);
    if (!f) throw std::runtime_error("cannot write " + (dir / name).string());
    return f;
  };
  {
    auto f = open("results.csv");
    write_results_csv(f, res);
  }
  {
    auto f = open("report.txt");
    write_report(f, res, cfg, meta);
  }
  {
    auto f = open("meta.txt");
    write_metadata(f, meta);
  }
  if (!res.samples.empty()) {
    {
      auto f = open("samples.csv");
      write_samples_csv(f, res.samples);
    }
    auto f = open("samples.meta.txt");
    write_metadata(f, meta);
  }
  if (plot_data) write_plot_data(dir / "plot", res);
}

}  // namespace sgld
