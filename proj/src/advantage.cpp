#include "acpo/advantage.hpp"

#include <cmath>

namespace acpo {

namespace {

struct Moments {
  double mean = 0.0;
  double std = 0.0;
};

// Two-pass population moments; fixed summation order.
template <typename Range>
Moments population_moments(const Range& values, std::size_t n) {
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / static_cast<double>(n);
  double sq = 0.0;
  for (double v : values) sq += (v - mean) * (v - mean);
  return {mean, std::sqrt(sq / static_cast<double>(n))};
}

}  // namespace

std::vector<double> group_advantages(std::span<const double> rewards) {
  std::vector<double> out(rewards.size(), 0.0);
  if (rewards.empty()) return out;
  const auto m = population_moments(rewards, rewards.size());
  // constant rewards up to rounding in the mean
  if (m.std < kSigmaFloor) return out;
  for (std::size_t i = 0; i < rewards.size(); ++i) out[i] = (rewards[i] - m.mean) / m.std;
  return out;
}

std::vector<double> group_advantages(const RolloutGroup& group) {
  std::vector<double> rewards;
  rewards.reserve(group.responses.size());
  for (const auto& r : group.responses) rewards.push_back(r.reward);
  return group_advantages(rewards);
}

double batch_sigma(std::span<const double> token_advantages) {
  if (token_advantages.empty()) throw std::invalid_argument("no tokens");
  return population_moments(token_advantages, token_advantages.size()).std;
}

double batch_sigma(const PerToken& a_hat) {
  std::vector<double> flat;
  for (const auto& group : a_hat)
    for (const auto& resp : group) flat.insert(flat.end(), resp.begin(), resp.end());
  return batch_sigma(flat);
}

double normalize_advantage(double a_hat, double sigma_a) {
  if (sigma_a < kSigmaFloor) return 0.5;
  return 0.5 * (1.0 + std::erf(a_hat / (std::sqrt(2.0) * sigma_a)));
}

AdvantageTensor compute_advantages(const Batch& batch) {
  AdvantageTensor adv;
  adv.a_hat = zeros_like(batch);
  for (std::size_t g = 0; g < batch.groups.size(); ++g) {
    const auto per_response = group_advantages(batch.groups[g]);
    for (std::size_t r = 0; r < per_response.size(); ++r)
      for (auto& v : adv.a_hat[g][r]) v = per_response[r];
  }
  adv.sigma_a = batch_sigma(adv.a_hat);
  adv.normalized = adv.a_hat;
  for (auto& group : adv.normalized)
    for (auto& resp : group)
      for (auto& v : resp) v = normalize_advantage(v, adv.sigma_a);
  return adv;
}

}  // namespace acpo
