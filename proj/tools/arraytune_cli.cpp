#include <cstdio>
#include <exception>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "arraytune/acoustic_sim.hpp"
#include "arraytune/errors.hpp"
#include "arraytune/harness.hpp"
#include "arraytune/perf_metrics.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  bool trace_every_block = false;
};

arraytune::harness::ExperimentConfig load(const std::string& path, const Overrides& ov) {
  auto cfg = arraytune::harness::load_config(path);
  if (ov.seed) cfg.seed = *ov.seed;
  if (ov.out_dir) cfg.output.dir = *ov.out_dir;
  if (ov.trace_every_block) cfg.output.trace_every_block = true;
  for (const auto& w : cfg.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  return cfg;
}

int cmd_run(const std::string& path, const Overrides& ov) {
  namespace h = arraytune::harness;
  const auto cfg = load(path, ov);
  const auto result = h::run_adaptation_experiment(cfg);
  h::write_experiment_outputs(cfg, result);
  h::emit_plot_data(result.trace, cfg.output.dir);
  std::printf("%4s %8s %8s %8s %8s %6s %10s %s\n", "j", "d1", "d2", "f1", "f2", "sel", "sir_out", "event");
  for (const auto& s : result.steps) {
    double sir_out = 0.0;
    for (const auto& r : result.trace) {
      if (r.j == s.j && r.segment_end) sir_out = r.sir_mean_out;
    }
    std::printf("%4zu %8.4f %8.4f %8.4f %8.4f %6d %10.2f %s\n", s.j, s.d1, s.d2, s.f1, s.f2, s.selected_output,
                sir_out, std::string(arraytune::adapt::to_string(s.event)).c_str());
  }
  std::printf("outputs written to %s\n", cfg.output.dir.string().c_str());
  return 0;
}

int cmd_sweep(const std::string& path, const Overrides& ov) {
  namespace h = arraytune::harness;
  const auto cfg = load(path, ov);
  const auto rows = h::run_spacing_sweep(cfg);
  h::write_sweep_csv(cfg.output.dir / cfg.output.sweep, rows);
  std::printf("%8s %8s %10s\n", "spacing", "msc", "sir_mean");
  std::vector<double> msc, sir;
  for (const auto& r : rows) {
    std::printf("%8.4f %8.4f %10.2f\n", r.spacing, r.msc, r.sir_mean);
    msc.push_back(r.msc);
    sir.push_back(r.sir_mean);
  }
  if (rows.size() >= 2) {
    std::printf("spearman(msc, sir_mean) = %.3f\n", arraytune::metrics::spearman_correlation(msc, sir));
  }
  return 0;
}

int cmd_rir(const std::string& path, const Overrides& ov) {
  const auto cfg = load(path, ov);
  const auto paths = arraytune::harness::dump_rirs(cfg);
  for (const auto& p : paths) std::printf("%s\n", p.string().c_str());
  if (cfg.scenario.t60 > 0.0) {
    std::printf("critical distance %.3f m\n", arraytune::sim::critical_distance(cfg.scenario));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive microphone-spacing experiments for two-source blind source separation"};
  app.require_subcommand(1);

  Overrides ov;
  std::string config;
  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("config", config, "JSON experiment config")->required();
    sub->add_option("--seed", ov.seed, "override the config seed");
    sub->add_option("--out-dir", ov.out_dir, "override the output directory");
  };
  auto* run = app.add_subcommand("run", "adaptation experiment: traces, geometry steps and selected output audio");
  add_common(run);
  run->add_flag("--trace-every-block", ov.trace_every_block, "one trace row per block instead of per iteration");
  auto* sweep = app.add_subcommand("sweep", "fixed-spacing sweep of sub-array 2: MSC and SIR per spacing");
  add_common(sweep);
  auto* rir = app.add_subcommand("rir", "write the room impulse responses of the initial geometry");
  add_common(rir);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (run->parsed()) return cmd_run(config, ov);
    if (sweep->parsed()) return cmd_sweep(config, ov);
    return cmd_rir(config, ov);
  } catch (const arraytune::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
}
