#include "acpo/gating.hpp"

namespace acpo {

std::size_t count_high_reward(const RolloutGroup& group, double tau) {
  std::size_t n = 0;
  for (const auto& r : group.responses)
    if (r.reward > tau) ++n;
  return n;
}

bool keep_group(std::size_t high_reward_count, const GateConfig& cfg) {
  return high_reward_count > 0 && high_reward_count <= cfg.n_max;
}

GateResult gate_batch(const Batch& batch, const GateConfig& cfg) {
  GateResult result;
  result.valid.step = batch.step;
  result.valid.snapshot_id = batch.snapshot_id;
  result.mask.reserve(batch.groups.size());
  result.stats.n_total = batch.groups.size();

  for (const auto& group : batch.groups) {
    const std::size_t count = count_high_reward(group, cfg.tau);
    const bool keep = keep_group(count, cfg);
    result.mask.push_back(keep);
    if (keep) {
      ++result.stats.n_valid;
      result.valid.groups.push_back(group);
    } else if (count == 0) {
      ++result.stats.n_zero;
    } else {
      ++result.stats.n_saturated;
    }
  }
  return result;
}

}  // namespace acpo
