#include "acpo/objective.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace acpo {

namespace {

void check_shapes(const Batch& batch, const AdvantageTensor& adv, const PerToken& lp) {
  if (batch.groups.empty() || batch.token_count() == 0) throw EmptyBatchError();
  if (!same_shape(adv.a_hat, batch) || !same_shape(adv.normalized, batch) ||
      !same_shape(lp, batch))
    throw std::invalid_argument("per-token tensor shape does not match batch");
}

}  // namespace

const char* to_string(Variant v) {
  switch (v) {
    case Variant::GRPO: return "grpo";
    case Variant::FixedClip: return "fixedclip";
    case Variant::ACPO: return "acpo";
  }
  return "?";
}

Variant variant_from_string(const std::string& s) {
  if (s == "grpo") return Variant::GRPO;
  if (s == "fixedclip") return Variant::FixedClip;
  if (s == "acpo") return Variant::ACPO;
  throw std::invalid_argument("unknown variant '" + s + "' (expected grpo|fixedclip|acpo)");
}

void ClipConfig::validate() const {
  if (!(eps_low > 0.0 && eps_low < 1.0))
    throw std::invalid_argument("eps_low must be in (0, 1)");
  if (!(eps_high_base > 0.0)) throw std::invalid_argument("eps_high must be > 0");
  if (!(delta >= 0.0)) throw std::invalid_argument("delta must be >= 0");
  if (!(eps_high_base + delta < 10.0))
    throw std::invalid_argument("eps_high + delta must be < 10");
  if (variant == Variant::FixedClip && delta != 0.0)
    throw std::invalid_argument("delta must be 0 for the fixedclip variant");
  if (!(kl_beta >= 0.0)) throw std::invalid_argument("kl_beta must be >= 0");
}

double ratio(double new_logprob, double old_logprob, std::size_t* overflow_count) {
  const double r = std::exp(new_logprob - old_logprob);
  if (r > kRatioCeiling) {
    if (overflow_count) ++*overflow_count;
    return kRatioCeiling;
  }
  return r;
}

double adaptive_eps_high(double a_hat, double sigma_a, const ClipConfig& cfg) {
  return cfg.eps_high_base + cfg.delta * normalize_advantage(a_hat, sigma_a);
}

TokenTerm token_term(double r, double a_hat, double eps_low, double eps_high) {
  const double unclipped = r * a_hat;
  const double clipped = std::clamp(r, 1.0 - eps_low, 1.0 + eps_high) * a_hat;
  if (clipped < unclipped) return {clipped, true, 0.0};
  return {unclipped, false, unclipped};
}

double kl_penalty(double new_logprob, double ref_logprob) {
  const double log_rho = ref_logprob - new_logprob;
  return std::exp(log_rho) - log_rho - 1.0;
}

ObjectiveReport loss_acpo(const Batch& batch, const AdvantageTensor& adv,
                          const PerToken& new_logprobs, const ClipConfig& cfg) {
  if (cfg.variant == Variant::GRPO)
    throw std::invalid_argument("loss_acpo requires the acpo or fixedclip variant");
  check_shapes(batch, adv, new_logprobs);

  ObjectiveReport rep;
  rep.grad_logprob = zeros_like(batch);
  const double n_tokens = static_cast<double>(batch.token_count());
  const bool adaptive = cfg.variant == Variant::ACPO;

  double total = 0.0;
  double ratio_sum = 0.0;
  std::size_t n_clipped = 0;
  for (std::size_t g = 0; g < batch.groups.size(); ++g) {
    const auto& responses = batch.groups[g].responses;
    for (std::size_t i = 0; i < responses.size(); ++i) {
      const auto& old_lp = responses[i].old_logprobs;
      for (std::size_t t = 0; t < old_lp.size(); ++t) {
        std::size_t overflow = 0;
        const double r = ratio(new_logprobs[g][i][t], old_lp[t], &overflow);
        rep.ratio_overflow += overflow;
        const double a = adv.a_hat[g][i][t];
        const double eps_high = adaptive
                                    ? cfg.eps_high_base + cfg.delta * adv.normalized[g][i][t]
                                    : cfg.eps_high_base;
        const TokenTerm term = token_term(r, a, cfg.eps_low, eps_high);
        total += term.value;
        ratio_sum += r;
        if (term.clipped) ++n_clipped;
        // a clamped ratio no longer depends on the policy
        const double grad = overflow ? 0.0 : term.grad_wrt_logprob;
        rep.grad_logprob[g][i][t] = -grad / n_tokens;
      }
    }
  }
  rep.loss = -total / n_tokens;
  rep.clip_fraction = static_cast<double>(n_clipped) / n_tokens;
  rep.mean_ratio = ratio_sum / n_tokens;
  return rep;
}

ObjectiveReport loss_grpo(const Batch& batch, const AdvantageTensor& adv,
                          const PerToken& new_logprobs, const PerToken& ref_logprobs,
                          const ClipConfig& cfg) {
  check_shapes(batch, adv, new_logprobs);
  if (!same_shape(ref_logprobs, batch))
    throw std::invalid_argument("reference logprob shape does not match batch");
  if (!(cfg.kl_beta >= 0.0)) throw std::invalid_argument("kl_beta must be >= 0");

  ObjectiveReport rep;
  rep.grad_logprob = zeros_like(batch);
  const double n_tokens = static_cast<double>(batch.token_count());
  const double n_responses = static_cast<double>(batch.response_count());

  double total = 0.0;
  double ratio_sum = 0.0;
  double kl_sum = 0.0;
  std::size_t n_clipped = 0;
  for (std::size_t g = 0; g < batch.groups.size(); ++g) {
    const auto& responses = batch.groups[g].responses;
    for (std::size_t i = 0; i < responses.size(); ++i) {
      const auto& old_lp = responses[i].old_logprobs;
      const double len = static_cast<double>(old_lp.size());
      double response_sum = 0.0;
      for (std::size_t t = 0; t < old_lp.size(); ++t) {
        std::size_t overflow = 0;
        const double new_lp = new_logprobs[g][i][t];
        const double r = ratio(new_lp, old_lp[t], &overflow);
        rep.ratio_overflow += overflow;
        const TokenTerm term = token_term(r, adv.a_hat[g][i][t], cfg.eps_low, cfg.eps_low);
        const double kl = kl_penalty(new_lp, ref_logprobs[g][i][t]);
        // d k3 / d new_lp = 1 - rho
        const double kl_grad = 1.0 - std::exp(ref_logprobs[g][i][t] - new_lp);
        response_sum += term.value - cfg.kl_beta * kl;
        ratio_sum += r;
        kl_sum += kl;
        if (term.clipped) ++n_clipped;
        const double surrogate_grad = overflow ? 0.0 : term.grad_wrt_logprob;
        rep.grad_logprob[g][i][t] =
            -(surrogate_grad - cfg.kl_beta * kl_grad) / (len * n_responses);
      }
      total += response_sum / len;
    }
  }
  rep.loss = -total / n_responses;
  rep.clip_fraction = static_cast<double>(n_clipped) / n_tokens;
  rep.mean_ratio = ratio_sum / n_tokens;
  rep.kl_value = kl_sum / n_tokens;
  return rep;
}

ObjectiveReport evaluate_objective(const Batch& batch, const AdvantageTensor& adv,
                                   const PerToken& new_logprobs,
                                   const PerToken& ref_logprobs, const ClipConfig& cfg) {
  if (cfg.variant == Variant::GRPO)
    return loss_grpo(batch, adv, new_logprobs, ref_logprobs, cfg);
  return loss_acpo(batch, adv, new_logprobs, cfg);
}

void ClipStats::add(double clip_fraction, double mean_ratio) {
  ++count_;
  clip_sum_ += clip_fraction;
  ratio_sum_ += mean_ratio;
}

double ClipStats::mean_clip_fraction() const {
  return count_ ? clip_sum_ / static_cast<double>(count_) : 0.0;
}

double ClipStats::mean_ratio() const {
  return count_ ? ratio_sum_ / static_cast<double>(count_) : 0.0;
}

}  // namespace acpo
