#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "acpo/gating.hpp"
#include "acpo/objective.hpp"
#include "acpo/policy.hpp"
#include "acpo/synth_env.hpp"

namespace acpo {

struct TrainConfig {
  std::int64_t outer_iterations = 1;
  std::int64_t steps_per_iteration = 2000;
  std::size_t batch_size = 16;
  std::size_t group_size = 8;
  std::int64_t max_reuse = 8;
  GateConfig gate{0.5, 7};
  ClipConfig clip{};
  double learning_rate = 3.0;
  std::size_t max_response_len = 4;
  std::uint64_t seed = 0;
  TierMix tier_mix{MixMode::Staged, {0.95, 0.05, 0.0}, 0};
  std::string metrics_file = "metrics.csv";

  // policy features
  std::size_t context_window = 2;
  bool difficulty_features = true;
  bool prompt_bag = true;
  std::size_t prompt_buckets = 4096;
  double shared_feature_scale = 0.1;
  double init_scale = 0.01;

  std::int64_t checkpoint_every = 100;
  // Restart the reuse schedule at every outer iteration.
  bool schedule_reset = true;
  // Wall-clock timing is off by default so metrics stay byte-reproducible.
  bool record_wall_time = false;

  FeatureConfig feature_config() const;
  std::int64_t total_steps() const { return outer_iterations * steps_per_iteration; }
  // Horizon of the staged tier mix; 0 in tier_mix means the whole run.
  std::int64_t mix_horizon() const;

  // Throws ConfigError describing the first violated constraint.
  void validate() const;

  bool operator==(const TrainConfig&) const;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Flat `key = value` text; `#` starts a comment. Unknown keys, malformed
// values and constraint violations raise ConfigError naming the line.
TrainConfig parse_config_text(const std::string& text, const std::string& source = "<config>");
TrainConfig parse_config(const std::filesystem::path& path);

// Every key with its resolved value, in a stable order; parses back to an
// equal TrainConfig.
void write_resolved_config(std::ostream& out, const TrainConfig& cfg);
std::string resolved_config_text(const TrainConfig& cfg);

// Keys accepted by the parser, in echo order.
const std::vector<std::string>& config_keys();

}  // namespace acpo
