#pragma once

#include <cstddef>
#include <vector>

#include "acpo/rollout.hpp"

namespace acpo {

struct GateConfig {
  double tau = 0.5;
  // Upper bound on above-threshold responses per group; must be in [1, G].
  std::size_t n_max = 7;
};

struct GateStats {
  std::size_t n_total = 0;
  std::size_t n_valid = 0;
  std::size_t n_zero = 0;
  std::size_t n_saturated = 0;
};

struct GateResult {
  Batch valid;  // kept groups, input order, same step / snapshot_id
  std::vector<bool> mask;
  GateStats stats;
};

// Number of responses with reward strictly above tau.
std::size_t count_high_reward(const RolloutGroup& group, double tau);

// Keeps a group iff 0 < count_high_reward(group, tau) <= n_max.
bool keep_group(std::size_t high_reward_count, const GateConfig& cfg);

GateResult gate_batch(const Batch& batch, const GateConfig& cfg);

}  // namespace acpo
