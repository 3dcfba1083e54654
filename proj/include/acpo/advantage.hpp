#pragma once

#include <span>
#include <stdexcept>
#include <vector>

#include "acpo/rollout.hpp"

namespace acpo {

// Per-token advantages for a (gated) batch plus the erf-normalized values
// that drive the adaptive upper clip bound.
struct AdvantageTensor {
  PerToken a_hat;
  double sigma_a = 0.0;
  PerToken normalized;  // each entry in [0, 1]
};

// Standardized group rewards, (R_i - mean) / std with the population std.
// A constant reward vector yields all zeros.
std::vector<double> group_advantages(std::span<const double> rewards);
std::vector<double> group_advantages(const RolloutGroup& group);

// Population standard deviation over every token-level advantage.
// Throws std::invalid_argument("no tokens") on empty input.
double batch_sigma(std::span<const double> token_advantages);
double batch_sigma(const PerToken& a_hat);

inline constexpr double kSigmaFloor = 1e-12;

// Standard normal CDF of a_hat / sigma_a via erf; 0.5 when sigma_a < 1e-12.
double normalize_advantage(double a_hat, double sigma_a);

// Full pipeline for one training step: group advantages broadcast to
// tokens, sigma over all tokens, normalized values. Requires >= 1 token.
AdvantageTensor compute_advantages(const Batch& batch);

}  // namespace acpo
