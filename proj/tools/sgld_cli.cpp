// Command-line front end: one subcommand per experiment.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "sgld/sgld.hpp"

namespace {

struct Options {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  bool plot_data = false;
};

int run(sgld::ExperimentKind kind, const Options& opt) {
  sgld::ExperimentConfig cfg = sgld::defaults_for(kind);
  if (!opt.config.empty()) {
    cfg = sgld::load_config(opt.config, cfg);
    if (cfg.kind != kind)
      throw sgld::ConfigError("config names experiment '" + std::string(sgld::to_string(cfg.kind)) +
                              "' but subcommand is '" + std::string(sgld::to_string(kind)) + "'");
  }
  if (opt.seed) cfg.seed = *opt.seed;
  if (opt.threads) cfg.threads = *opt.threads;

  const auto result = sgld::run_experiment(cfg);
  sgld::RunMetadata meta;
  meta.seed = cfg.seed;
  meta.threads = cfg.threads;
  const std::string dir = opt.out.empty() ? "out/" + std::string(sgld::to_string(kind)) : opt.out;
  sgld::write_outputs(dir, result, cfg, meta, opt.plot_data);

  std::size_t failed = 0;
  for (const auto& c : result.checks) {
    std::cout << (c.pass ? "PASS  " : "FAIL  ") << c.name << "  observed "
              << sgld::format_double(c.observed) << "  expected " << c.expected << '\n';
    failed += !c.pass;
  }
  for (const auto& n : result.notes) std::cout << "note: " << n << '\n';
  std::cout << result.id << ": " << result.checks.size() - failed << "/" << result.checks.size()
            << " checks passed, outputs in " << dir << '\n';
  return failed == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Langevin sampler rate-verification harness"};
  app.require_subcommand(1);
  Options opt;
  std::optional<sgld::ExperimentKind> chosen;

  for (auto kind : {sgld::ExperimentKind::RateSweep, sgld::ExperimentKind::ScheduleDecay,
                    sgld::ExperimentKind::SgldSweep, sgld::ExperimentKind::StationaryBias,
                    sgld::ExperimentKind::Contraction, sgld::ExperimentKind::Verify}) {
    auto* sub = app.add_subcommand(std::string(sgld::to_string(kind)));
    sub->add_option("--config", opt.config, "config file")->check(CLI::ExistingFile);
    sub->add_option("--out", opt.out, "output directory");
    sub->add_option("--seed", opt.seed, "master seed (overrides config)");
    sub->add_option("--threads", opt.threads, "worker threads, 0 = hardware");
    sub->add_flag("--emit-plot-data", opt.plot_data, "write two-column plot data files");
    sub->callback([&chosen, kind] { chosen = kind; });
  }

  CLI11_PARSE(app, argc, argv);
  try {
    return run(*chosen, opt);
  } catch (const sgld::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid argument: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
}
