// Command-line front end: train, sweep, plot, selftest.
//
// Exit codes: 0 success, 1 run failure, 2 usage error (bad arguments or an
// invalid configuration / preset file).

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "acpo/config.hpp"
#include "acpo/plot.hpp"
#include "acpo/selftest.hpp"
#include "acpo/sweep.hpp"
#include "acpo/trainer.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kRunFailure = 1;
constexpr int kUsage = 2;

int cmd_train(const std::string& config_path, const std::string& out_dir) {
  acpo::TrainConfig cfg;
  try {
    cfg = acpo::parse_config(config_path);
  } catch (const acpo::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  }
  try {
    const auto result = acpo::run(cfg, out_dir);
    const auto window = acpo::final_window_means(acpo::read_metrics_csv(result.metrics_path));
    std::printf("metrics: %s\nfinal-window mean_reward %.4f  clip_fraction %.4f\n",
                result.metrics_path.string().c_str(), window.mean_reward, window.clip_fraction);
  } catch (const std::exception& e) {
    std::cerr << "error: run failed: " << e.what() << '\n';
    return kRunFailure;
  }
  return kOk;
}

int cmd_sweep(const std::string& preset_name, const std::string& out_dir,
              const std::string& seeds, std::size_t parallel) {
  acpo::ExperimentPreset preset;
  try {
    preset = acpo::resolve_preset(preset_name);
    if (!seeds.empty()) preset.seeds = acpo::parse_seed_list(seeds);
    preset.validate();
  } catch (const acpo::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  }
  acpo::SweepResult result;
  try {
    result = acpo::run_sweep(preset, out_dir, parallel);
  } catch (const std::exception& e) {
    std::cerr << "error: sweep failed: " << e.what() << '\n';
    return kRunFailure;
  }
  std::printf("%-14s %5s %7s %22s %22s\n", "label", "ok", "failed", "reward mean +- std",
              "clip mean +- std");
  for (const auto& s : result.summary)
    std::printf("%-14s %5zu %7zu %12.4f +- %6.4f %12.4f +- %6.4f\n", s.label.c_str(), s.n_ok,
                s.n_failed, s.reward_mean, s.reward_std, s.clip_mean, s.clip_std);
  for (const auto& r : result.runs)
    if (!r.ok)
      std::cerr << "error: " << r.label << " seed " << r.seed << ": " << r.error << '\n';
  std::printf("summary: %s\n", (std::filesystem::path(out_dir) / "summary.csv").string().c_str());
  return result.all_ok() ? kOk : kRunFailure;
}

int cmd_plot(const std::string& out_dir, const std::vector<std::string>& inputs) {
  std::vector<std::filesystem::path> paths(inputs.begin(), inputs.end());
  try {
    const auto result = acpo::render_plots(paths, out_dir);
    std::printf("wrote %s, %s, %s (%zu series)\n", result.reward_image.string().c_str(),
                result.clip_image.string().c_str(), result.sidecar.string().c_str(),
                result.series.size());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRunFailure;
  }
  return kOk;
}

int cmd_selftest() {
  const auto reports = acpo::run_selftest(&std::cout);
  for (const auto& r : reports)
    if (!r.passed) return kRunFailure;
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive curriculum policy optimization on synthetic addition tasks"};
  app.require_subcommand(1);

  std::string config_path, train_out;
  auto* train = app.add_subcommand("train", "Run one training configuration");
  train->add_option("--config", config_path, "key=value config file")->required();
  train->add_option("--out", train_out, "output directory")->required();

  std::string preset, sweep_out, seeds;
  std::size_t parallel = 1;
  auto* sweep = app.add_subcommand("sweep", "Run every label of a preset over several seeds");
  sweep->add_option("--preset", preset, "built-in preset name or preset file")->required();
  sweep->add_option("--out", sweep_out, "output directory")->required();
  sweep->add_option("--seeds", seeds, "comma-separated seeds (overrides the preset)");
  sweep->add_option("--parallel", parallel, "concurrent runs")->check(CLI::PositiveNumber);

  std::string plot_out;
  std::vector<std::string> metrics;
  auto* plot = app.add_subcommand("plot", "Render reward and clip-fraction curves");
  plot->add_option("--out", plot_out, "output directory")->required();
  plot->add_option("metrics", metrics, "metrics CSV files")->required();

  auto* selftest = app.add_subcommand("selftest", "Run the brute-force and finite-difference oracles");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  if (*train) return cmd_train(config_path, train_out);
  if (*sweep) return cmd_sweep(preset, sweep_out, seeds, parallel);
  if (*plot) return cmd_plot(plot_out, metrics);
  if (*selftest) return cmd_selftest();
  return kUsage;
}
