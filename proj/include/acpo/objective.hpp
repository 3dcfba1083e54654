#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "acpo/advantage.hpp"
#include "acpo/rollout.hpp"

namespace acpo {

enum class Variant { GRPO, FixedClip, ACPO };

const char* to_string(Variant v);
Variant variant_from_string(const std::string& s);

struct ClipConfig {
  double eps_low = 0.2;
  double eps_high_base = 0.2;
  double delta = 0.05;
  Variant variant = Variant::ACPO;
  double kl_beta = 0.0;  // GRPO only

  // Throws std::invalid_argument naming the violated bound.
  void validate() const;
};

inline constexpr double kRatioCeiling = 1e6;

// exp(new - old), clamped at kRatioCeiling. Each clamp increments
// *overflow_count when provided.
double ratio(double new_logprob, double old_logprob,
             std::size_t* overflow_count = nullptr);

// eps_high_base + delta * normalize_advantage(a_hat, sigma_a).
double adaptive_eps_high(double a_hat, double sigma_a, const ClipConfig& cfg);

struct TokenTerm {
  double value = 0.0;
  bool clipped = false;
  double grad_wrt_logprob = 0.0;  // d value / d log pi_theta
};

// min(r * a, clip(r, 1 - eps_low, 1 + eps_high) * a). Ties take the
// unclipped branch and its gradient r * a.
TokenTerm token_term(double r, double a_hat, double eps_low, double eps_high);

// k3 estimator rho - log(rho) - 1 with rho = exp(ref - new).
double kl_penalty(double new_logprob, double ref_logprob);

struct ObjectiveReport {
  double loss = 0.0;  // -J
  PerToken grad_logprob;  // d loss / d log pi_theta per token
  double clip_fraction = 0.0;
  double mean_ratio = 0.0;
  double kl_value = 0.0;  // mean per-token k3, GRPO only
  std::size_t ratio_overflow = 0;
};

class EmptyBatchError : public std::invalid_argument {
 public:
  EmptyBatchError() : std::invalid_argument("empty batch") {}
};

// Token-normalized clipped surrogate over the whole valid batch. ACPO uses
// the advantage-aware upper bound; FixedClip uses eps_high_base. No KL term.
ObjectiveReport loss_acpo(const Batch& batch, const AdvantageTensor& adv,
                          const PerToken& new_logprobs, const ClipConfig& cfg);

// Per-response token mean, averaged over responses, symmetric band of
// width eps_low, minus kl_beta * k3 against the reference policy.
ObjectiveReport loss_grpo(const Batch& batch, const AdvantageTensor& adv,
                          const PerToken& new_logprobs, const PerToken& ref_logprobs,
                          const ClipConfig& cfg);

// Dispatch on cfg.variant. ref_logprobs is only read for GRPO.
ObjectiveReport evaluate_objective(const Batch& batch, const AdvantageTensor& adv,
                                   const PerToken& new_logprobs,
                                   const PerToken& ref_logprobs, const ClipConfig& cfg);

// Running means of clip_fraction and mean_ratio over a stream of reports.
class ClipStats {
 public:
  void add(const ObjectiveReport& report) { add(report.clip_fraction, report.mean_ratio); }
  void add(double clip_fraction, double mean_ratio);

  std::size_t count() const { return count_; }
  double mean_clip_fraction() const;
  double mean_ratio() const;

 private:
  std::size_t count_ = 0;
  double clip_sum_ = 0.0;
  double ratio_sum_ = 0.0;
};

}  // namespace acpo
