#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "acpo/random.hpp"
#include "acpo/rollout.hpp"

namespace acpo {

// Token vocabulary of the addition tasks. Digits map to themselves; the
// terminator is the last id, which is what the policy stops on.
namespace vocab {
inline constexpr TokenId kPlus = 10;
inline constexpr TokenId kEquals = 11;
inline constexpr TokenId kEnd = 12;
inline constexpr std::size_t kSize = 13;
}  // namespace vocab

struct OperandRange {
  std::int64_t lo = 0;
  std::int64_t hi = 9;
  std::size_t count = 2;
};

// AddChain family: Easy a+b over single digits, Middle a+b over two
// digits, Difficult a+b+c over two digits.
struct TaskSpec {
  std::array<OperandRange, 3> tiers{{{0, 9, 2}, {10, 99, 2}, {10, 99, 3}}};

  const OperandRange& range(Difficulty tier) const {
    return tiers[static_cast<std::size_t>(tier)];
  }
  // Longest canonical answer plus terminator, over all tiers.
  std::size_t max_answer_tokens() const;
};

std::vector<TokenId> digits_of(std::int64_t value);

// Query for explicit operands; target is the canonical digit sequence of the sum.
Query make_query(Difficulty tier, const std::vector<std::int64_t>& operands);

Query gen_task(const TaskSpec& spec, Difficulty tier, Rng& rng);

// 1 iff the response, cut at the first terminator, equals the target.
double verify_reward(const Query& query, const Response& response);
double verify_reward(const Query& query, const std::vector<TokenId>& tokens);

enum class MixMode { Static, Staged };

// Tier weights (Easy, Middle, Difficult). Staged mode interpolates
// linearly from (1, 0, 0) at step 0 to `weights` at step `horizon`.
struct TierMix {
  MixMode mode = MixMode::Static;
  std::array<double, 3> weights{1.0, 0.0, 0.0};
  std::int64_t horizon = 1;

  void validate() const;
  std::array<double, 3> weights_at(std::int64_t step) const;
};

Difficulty mix_sampler(const TierMix& mix, std::int64_t step, Rng& rng);

}  // namespace acpo
