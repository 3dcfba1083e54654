#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "acpo/advantage.hpp"
#include "acpo/config.hpp"
#include "acpo/curriculum.hpp"
#include "acpo/gating.hpp"
#include "acpo/objective.hpp"
#include "acpo/policy.hpp"

namespace acpo {

struct EpochReport {
  double loss = 0.0;
  double clip_fraction = 0.0;
  double mean_ratio = 0.0;
  double kl_value = 0.0;
  double grad_norm = 0.0;
  std::size_t ratio_overflow = 0;
};

struct StepMetrics {
  std::int64_t iteration = 1;
  std::int64_t step = 1;
  std::int64_t k = 1;
  Phase phase = Phase::Exploration;
  GateStats gate;
  double mean_reward = 0.0;
  double mean_reward_valid = 0.0;
  // loss, clip_fraction, mean_ratio and grad_norm are means over the epochs
  double loss = 0.0;
  double clip_fraction = 0.0;
  double mean_ratio = 1.0;
  double grad_norm = 0.0;
  std::size_t ratio_overflow = 0;
  double wall_ms = 0.0;

  std::int64_t epochs_run = 0;
  std::vector<EpochReport> epochs;
};

inline constexpr const char* kMetricsHeader =
    "iteration,step,k,phase,n_valid,n_zero,n_saturated,mean_reward,mean_reward_valid,"
    "loss,clip_fraction,mean_ratio,grad_norm,ratio_overflow,wall_ms";

std::string metrics_row(const StepMetrics& m);

// What an observer sees at the start of each update epoch, before the
// parameter step.
struct EpochView {
  std::int64_t epoch = 0;  // 1-based
  const Batch& valid;
  const AdvantageTensor& advantages;
  const PerToken& new_logprobs;
  const ObjectiveReport& report;
};

using EpochObserver = std::function<void(const EpochView&)>;

struct TrainerState {
  PolicyParams policy;
  std::optional<PolicySnapshot> reference;
  std::int64_t global_step = 0;  // completed steps
};

TrainerState init_state(const TrainConfig& cfg);

// The M queries for a given global step (0-based), deterministic in the seed.
std::vector<Query> sample_queries(const TrainConfig& cfg, std::int64_t global_step);

class NonFiniteLossError : public std::runtime_error {
 public:
  NonFiniteLossError(const std::string& what, Batch offending)
      : std::runtime_error(what), batch(std::move(offending)) {}
  Batch batch;
};

// One Algorithm-1 inner step: snapshot, sample, score, gate, advantages,
// reuse count, K update epochs on fixed old logprobs and advantages.
StepMetrics train_step(const TrainConfig& cfg, TrainerState& state,
                       const std::vector<Query>& queries, std::int64_t iteration,
                       std::int64_t step, const EpochObserver& observer = {});

struct RunResult {
  PolicyParams policy;
  std::vector<StepMetrics> metrics;
  std::filesystem::path metrics_path;
};

// Full run: I x T steps, reference reset per iteration, metrics CSV,
// checkpoints every cfg.checkpoint_every steps and at the end, resolved
// config echo next to the metrics file.
RunResult run(const TrainConfig& cfg, const std::filesystem::path& out_dir,
              const EpochObserver& observer = {});

}  // namespace acpo
