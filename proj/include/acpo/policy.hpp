#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "acpo/random.hpp"
#include "acpo/rollout.hpp"

namespace acpo {

// Layout of the sparse context vector fed to the linear-softmax policy.
// Blocks, in order: bias, difficulty one-hot, prompt token counts, one
// one-hot per look-back slot (vocab_size + 1 entries, the last meaning
// "before the response"), then hashed (prompt, generated prefix) buckets.
// Every block except the buckets is shared across prompts and carries
// feature value shared_scale instead of 1.
struct FeatureConfig {
  std::size_t vocab_size = 13;
  std::size_t context_window = 2;
  bool difficulty_onehot = true;
  bool prompt_bag = true;
  std::size_t prompt_buckets = 0;
  double shared_scale = 1.0;

  std::size_t context_features() const;
  TokenId terminator() const { return static_cast<TokenId>(vocab_size - 1); }

  bool operator==(const FeatureConfig&) const = default;
};

struct Feature {
  std::uint32_t index;
  double value;
};

std::vector<Feature> context_features(const FeatureConfig& cfg, const Query& query,
                                      std::span<const TokenId> prefix);

struct PolicyParams {
  FeatureConfig features;
  std::uint64_t seed = 0;
  std::vector<double> weights;  // row-major [context_features x vocab_size]

  std::size_t rows() const { return features.context_features(); }
  std::size_t cols() const { return features.vocab_size; }
  double& at(std::size_t row, std::size_t col) { return weights[row * cols() + col]; }
  double at(std::size_t row, std::size_t col) const { return weights[row * cols() + col]; }

  bool operator==(const PolicyParams&) const = default;
};

// Weights i.i.d. uniform in [-init_scale, init_scale]; init_scale 0 gives
// the uniform policy.
PolicyParams init_policy(const FeatureConfig& features, std::uint64_t seed,
                         double init_scale = 0.01);

// Log-probabilities over the whole vocabulary after the given prefix.
std::vector<double> next_token_logprobs(const PolicyParams& params, const Query& query,
                                        std::span<const TokenId> prefix);

std::vector<double> log_softmax(std::span<const double> logits);

// log pi(token_t | query, tokens_<t) for every position.
std::vector<double> logprobs(const PolicyParams& params, const Query& query,
                             std::span<const TokenId> response_tokens);

// logprobs() for every response of the batch.
PerToken batch_logprobs(const PolicyParams& params, const Batch& batch);

// Ancestral sampling until the terminator (included) or max_len tokens.
Response sample_response(const PolicyParams& params, const Query& query,
                         std::size_t max_len, Rng& rng);

// d loss / d weights given d loss / d log pi per token (same layout as weights).
std::vector<double> weight_gradient(const PolicyParams& params, const Batch& batch,
                                    const PerToken& grad_logprob);

// One plain gradient-descent step. Returns the L2 norm of the gradient.
double apply_gradients(PolicyParams& params, const PerToken& grad_logprob,
                       const Batch& batch, double learning_rate);

enum class SnapshotRole { Old, Ref };

class PolicySnapshot {
 public:
  PolicySnapshot(const PolicyParams& params, std::string id, SnapshotRole role)
      : params_(std::make_shared<const PolicyParams>(params)),
        id_(std::move(id)),
        role_(role) {}

  const PolicyParams& params() const { return *params_; }
  const std::string& id() const { return id_; }
  SnapshotRole role() const { return role_; }

 private:
  std::shared_ptr<const PolicyParams> params_;
  std::string id_;
  SnapshotRole role_;
};

PolicySnapshot snapshot(const PolicyParams& params, SnapshotRole role, std::string id = {});

// Text checkpoint: header lines then one weight row per line, 17 digits.
void write_checkpoint(std::ostream& out, const PolicyParams& params, std::int64_t step);

struct Checkpoint {
  PolicyParams params;
  std::int64_t step = 0;
};

Checkpoint read_checkpoint(std::istream& in);

}  // namespace acpo
