#include "acpo/synth_env.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace acpo {

std::vector<TokenId> digits_of(std::int64_t value) {
  if (value < 0) throw std::invalid_argument("negative value has no digit encoding");
  std::vector<TokenId> out;
  do {
    out.push_back(static_cast<TokenId>(value % 10));
    value /= 10;
  } while (value > 0);
  std::reverse(out.begin(), out.end());
  return out;
}

std::size_t TaskSpec::max_answer_tokens() const {
  std::size_t longest = 0;
  for (const auto& r : tiers)
    longest = std::max(longest, digits_of(r.hi * static_cast<std::int64_t>(r.count)).size());
  return longest + 1;
}

Query make_query(Difficulty tier, const std::vector<std::int64_t>& operands) {
  if (operands.empty()) throw std::invalid_argument("no operands");
  Query q;
  q.difficulty = tier;
  std::int64_t sum = 0;
  for (std::size_t i = 0; i < operands.size(); ++i) {
    if (i) {
      q.prompt_tokens.push_back(vocab::kPlus);
      q.id += '+';
    }
    const auto d = digits_of(operands[i]);
    q.prompt_tokens.insert(q.prompt_tokens.end(), d.begin(), d.end());
    q.id += std::to_string(operands[i]);
    sum += operands[i];
  }
  q.prompt_tokens.push_back(vocab::kEquals);
  q.target = digits_of(sum);
  return q;
}

Query gen_task(const TaskSpec& spec, Difficulty tier, Rng& rng) {
  const auto& r = spec.range(tier);
  std::vector<std::int64_t> operands(r.count);
  for (auto& v : operands) v = rng.uniform_int(r.lo, r.hi);
  return make_query(tier, operands);
}

double verify_reward(const Query& query, const std::vector<TokenId>& tokens) {
  auto end = std::find(tokens.begin(), tokens.end(), vocab::kEnd);
  return std::equal(tokens.begin(), end, query.target.begin(), query.target.end()) ? 1.0 : 0.0;
}

double verify_reward(const Query& query, const Response& response) {
  return verify_reward(query, response.tokens);
}

void TierMix::validate() const {
  double sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw std::invalid_argument("tier mix weights must be >= 0");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("tier mix weights must sum to 1");
  if (horizon < 1) throw std::invalid_argument("tier mix horizon must be >= 1");
}

std::array<double, 3> TierMix::weights_at(std::int64_t step) const {
  if (mode == MixMode::Static || step >= horizon) return weights;
  const double frac =
      std::clamp(static_cast<double>(step) / static_cast<double>(horizon), 0.0, 1.0);
  const std::array<double, 3> start{1.0, 0.0, 0.0};
  std::array<double, 3> w{};
  for (std::size_t i = 0; i < 3; ++i) w[i] = start[i] + frac * (weights[i] - start[i]);
  return w;
}

Difficulty mix_sampler(const TierMix& mix, std::int64_t step, Rng& rng) {
  const auto w = mix.weights_at(step);
  const double u = rng.uniform() * (w[0] + w[1] + w[2]);
  double acc = 0.0;
  std::size_t last = 0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (w[i] <= 0.0) continue;
    last = i;
    acc += w[i];
    if (u < acc) return static_cast<Difficulty>(i);
  }
  return static_cast<Difficulty>(last);
}

}  // namespace acpo
