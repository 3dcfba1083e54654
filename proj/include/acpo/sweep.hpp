#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "acpo/config.hpp"
#include "acpo/metrics.hpp"

namespace acpo {

struct PresetRun {
  std::string label;
  TrainConfig config;  // seed is replaced per sweep seed
};

struct ExperimentPreset {
  std::string name;
  std::vector<PresetRun> runs;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  double final_window = kDefaultFinalWindow;

  // Throws ConfigError on duplicate labels, empty seed list or no runs.
  void validate() const;
};

// Built-in presets:
//   default     - acpo (delta 0.05) against fixedclip
//   delta_sweep - acpo_d003, acpo_d005, acpo_d010 and fixedclip ("w/o AAAC")
//   baselines   - grpo (kl_beta 0.001), fixedclip and acpo
ExperimentPreset builtin_preset(const std::string& name);
std::vector<std::string> builtin_preset_names();

// INI-style preset file. `[preset]` may set name, seeds (comma list) and
// final_window; `[common]` holds config keys applied to every run; every
// other `[label]` section defines one run on top of common.
ExperimentPreset parse_preset_text(const std::string& text, const std::string& source);
ExperimentPreset load_preset(const std::filesystem::path& path);

// A built-in name, or else a path to a preset file.
ExperimentPreset resolve_preset(const std::string& name_or_path);

std::vector<std::uint64_t> parse_seed_list(const std::string& text);

struct SeedResult {
  std::string label;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  WindowMeans window;
  std::filesystem::path metrics_path;
};

struct LabelSummary {
  std::string label;
  std::size_t n_ok = 0;
  std::size_t n_failed = 0;
  double reward_mean = 0.0;
  double reward_std = 0.0;  // population std across seeds
  double clip_mean = 0.0;
  double clip_std = 0.0;
};

struct SweepResult {
  std::vector<SeedResult> runs;  // label-major, then seed order
  std::vector<LabelSummary> summary;
  bool all_ok() const;
};

// Population mean/std summary of per-seed final-window values.
std::vector<LabelSummary> summarize(const std::vector<SeedResult>& runs,
                                    const std::vector<std::string>& label_order);

// Runs every label x seed into out_dir/<label>/seed_<s>/, then writes
// out_dir/runs.csv and out_dir/summary.csv. A failing run is recorded and
// does not stop the others.
SweepResult run_sweep(const ExperimentPreset& preset, const std::filesystem::path& out_dir,
                      std::size_t parallelism = 1);

void write_summary_csv(const std::filesystem::path& path, const std::vector<LabelSummary>& rows);
void write_runs_csv(const std::filesystem::path& path, const std::vector<SeedResult>& rows);

}  // namespace acpo
