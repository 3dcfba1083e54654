#include "acpo/policy.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace acpo {

namespace {

constexpr std::size_t kDifficultyCount = 3;

std::uint64_t fnv1a(std::span<const TokenId> tokens) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (TokenId t : tokens) {
    for (int b = 0; b < 4; ++b) {
      h ^= (t >> (8 * b)) & 0xffu;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

std::vector<double> logits_for(const PolicyParams& params, std::span<const Feature> x) {
  const std::size_t v = params.cols();
  std::vector<double> z(v, 0.0);
  for (const auto& f : x) {
    const double* row = &params.weights[f.index * v];
    for (std::size_t b = 0; b < v; ++b) z[b] += f.value * row[b];
  }
  return z;
}

void check_tokens(const PolicyParams& params, std::span<const TokenId> tokens) {
  for (TokenId t : tokens)
    if (t >= params.cols()) throw std::out_of_range("token id >= vocab_size");
}

}  // namespace

std::size_t FeatureConfig::context_features() const {
  return 1 + (difficulty_onehot ? kDifficultyCount : 0) + (prompt_bag ? vocab_size : 0) +
         context_window * (vocab_size + 1) + prompt_buckets;
}

std::vector<Feature> context_features(const FeatureConfig& cfg, const Query& query,
                                      std::span<const TokenId> prefix) {
  std::vector<Feature> x;
  x.reserve(2 + query.prompt_tokens.size() + cfg.context_window);
  std::uint32_t offset = 0;
  const double shared = cfg.shared_scale;
  x.push_back({offset++, shared});

  if (cfg.difficulty_onehot) {
    x.push_back({offset + static_cast<std::uint32_t>(query.difficulty), shared});
    offset += kDifficultyCount;
  }
  if (cfg.prompt_bag) {
    const std::size_t first = x.size();
    for (TokenId t : query.prompt_tokens) {
      const auto idx = offset + t;
      auto it = std::find_if(x.begin() + static_cast<std::ptrdiff_t>(first), x.end(),
                             [idx](const Feature& f) { return f.index == idx; });
      if (it == x.end())
        x.push_back({idx, shared});
      else
        it->value += shared;
    }
    offset += static_cast<std::uint32_t>(cfg.vocab_size);
  }
  for (std::size_t slot = 0; slot < cfg.context_window; ++slot) {
    // slot 0 is the most recent token
    const std::size_t back = slot + 1;
    const std::size_t tok = back <= prefix.size() ? prefix[prefix.size() - back] : cfg.vocab_size;
    x.push_back({offset + static_cast<std::uint32_t>(tok), shared});
    offset += static_cast<std::uint32_t>(cfg.vocab_size + 1);
  }
  if (cfg.prompt_buckets > 0) {
    const std::uint64_t h = mix64(fnv1a(query.prompt_tokens) ^ mix64(fnv1a(prefix) + prefix.size()));
    x.push_back({offset + static_cast<std::uint32_t>(h % cfg.prompt_buckets), 1.0});
  }
  return x;
}

PolicyParams init_policy(const FeatureConfig& features, std::uint64_t seed, double init_scale) {
  if (features.vocab_size < 1) throw std::invalid_argument("vocab_size must be >= 1");
  PolicyParams p;
  p.features = features;
  p.seed = seed;
  p.weights.assign(features.context_features() * features.vocab_size, 0.0);
  if (init_scale != 0.0) {
    Rng rng(seed);
    for (auto& w : p.weights) w = rng.uniform(-init_scale, init_scale);
  }
  return p;
}

std::vector<double> log_softmax(std::span<const double> logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  double s = 0.0;
  for (double z : logits) s += std::exp(z - m);
  const double log_norm = m + std::log(s);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - log_norm;
  return out;
}

std::vector<double> next_token_logprobs(const PolicyParams& params, const Query& query,
                                        std::span<const TokenId> prefix) {
  const auto x = context_features(params.features, query, prefix);
  return log_softmax(logits_for(params, x));
}

std::vector<double> logprobs(const PolicyParams& params, const Query& query,
                             std::span<const TokenId> response_tokens) {
  check_tokens(params, response_tokens);
  std::vector<double> out(response_tokens.size());
  for (std::size_t t = 0; t < response_tokens.size(); ++t) {
    const auto lp = next_token_logprobs(params, query, response_tokens.first(t));
    out[t] = lp[response_tokens[t]];
  }
  return out;
}

PerToken batch_logprobs(const PolicyParams& params, const Batch& batch) {
  PerToken out(batch.groups.size());
  for (std::size_t g = 0; g < batch.groups.size(); ++g) {
    const auto& group = batch.groups[g];
    out[g].reserve(group.responses.size());
    for (const auto& r : group.responses) out[g].push_back(logprobs(params, group.query, r.tokens));
  }
  return out;
}

Response sample_response(const PolicyParams& params, const Query& query, std::size_t max_len,
                         Rng& rng) {
  if (max_len < 1) throw std::invalid_argument("max_len must be >= 1");
  const TokenId stop = params.features.terminator();
  Response resp;
  while (resp.tokens.size() < max_len) {
    const auto lp = next_token_logprobs(params, query, resp.tokens);
    const double u = rng.uniform();
    double cdf = 0.0;
    TokenId chosen = static_cast<TokenId>(lp.size() - 1);
    for (std::size_t b = 0; b < lp.size(); ++b) {
      cdf += std::exp(lp[b]);
      if (u < cdf) {
        chosen = static_cast<TokenId>(b);
        break;
      }
    }
    resp.tokens.push_back(chosen);
    resp.old_logprobs.push_back(lp[chosen]);
    if (chosen == stop) break;
  }
  return resp;
}

std::vector<double> weight_gradient(const PolicyParams& params, const Batch& batch,
                                    const PerToken& grad_logprob) {
  if (!same_shape(grad_logprob, batch))
    throw std::invalid_argument("gradient shape does not match batch");
  const std::size_t v = params.cols();
  std::vector<double> grad(params.weights.size(), 0.0);
  std::vector<double> coeff(v);
  for (std::size_t g = 0; g < batch.groups.size(); ++g) {
    const auto& group = batch.groups[g];
    for (std::size_t i = 0; i < group.responses.size(); ++i) {
      const auto& tokens = group.responses[i].tokens;
      for (std::size_t t = 0; t < tokens.size(); ++t) {
        const double gt = grad_logprob[g][i][t];
        if (gt == 0.0) continue;
        const std::span<const TokenId> prefix(tokens.data(), t);
        const auto x = context_features(params.features, group.query, prefix);
        const auto lp = log_softmax(logits_for(params, x));
        // d log pi(a|x) / d W[j, b] = x_j (1{a = b} - pi(b|x))
        for (std::size_t b = 0; b < v; ++b) coeff[b] = -gt * std::exp(lp[b]);
        coeff[tokens[t]] += gt;
        for (const auto& f : x) {
          double* row = &grad[f.index * v];
          for (std::size_t b = 0; b < v; ++b) row[b] += f.value * coeff[b];
        }
      }
    }
  }
  return grad;
}

double apply_gradients(PolicyParams& params, const PerToken& grad_logprob, const Batch& batch,
                       double learning_rate) {
  const auto grad = weight_gradient(params, batch, grad_logprob);
  double sq = 0.0;
  for (std::size_t k = 0; k < grad.size(); ++k) {
    sq += grad[k] * grad[k];
    params.weights[k] -= learning_rate * grad[k];
  }
  return std::sqrt(sq);
}

PolicySnapshot snapshot(const PolicyParams& params, SnapshotRole role, std::string id) {
  return PolicySnapshot(params, std::move(id), role);
}

void write_checkpoint(std::ostream& out, const PolicyParams& params, std::int64_t step) {
  const auto& f = params.features;
  out << "vocab_size " << f.vocab_size << '\n'
      << "context_features " << f.context_features() << '\n'
      << "seed " << params.seed << '\n'
      << "step " << step << '\n'
      << "context_window " << f.context_window << '\n'
      << "difficulty_onehot " << (f.difficulty_onehot ? 1 : 0) << '\n'
      << "prompt_bag " << (f.prompt_bag ? 1 : 0) << '\n'
      << "prompt_buckets " << f.prompt_buckets << '\n'
      << "shared_scale " << format_real(f.shared_scale) << '\n'
      << "weights\n";
  for (std::size_t r = 0; r < params.rows(); ++r) {
    for (std::size_t c = 0; c < params.cols(); ++c) {
      if (c) out << ' ';
      out << format_real(params.at(r, c));
    }
    out << '\n';
  }
}

Checkpoint read_checkpoint(std::istream& in) {
  Checkpoint ck;
  auto& f = ck.params.features;
  std::size_t declared_features = 0;
  std::string key;
  while (in >> key && key != "weights") {
    if (key == "vocab_size") in >> f.vocab_size;
    else if (key == "context_features") in >> declared_features;
    else if (key == "seed") in >> ck.params.seed;
    else if (key == "step") in >> ck.step;
    else if (key == "context_window") in >> f.context_window;
    else if (key == "difficulty_onehot") { int b; in >> b; f.difficulty_onehot = b != 0; }
    else if (key == "prompt_bag") { int b; in >> b; f.prompt_bag = b != 0; }
    else if (key == "prompt_buckets") in >> f.prompt_buckets;
    else if (key == "shared_scale") {
      std::string v;
      in >> v;
      f.shared_scale = std::stod(v);
    }
    else throw FormatError("checkpoint: unknown header key '" + key + "'");
    if (!in) throw FormatError("checkpoint: bad value for '" + key + "'");
  }
  if (key != "weights") throw FormatError("checkpoint: missing weights section");
  if (declared_features != f.context_features())
    throw FormatError("checkpoint: context_features does not match feature layout");
  ck.params.weights.resize(f.context_features() * f.vocab_size);
  for (auto& w : ck.params.weights) {
    std::string tok;
    if (!(in >> tok)) throw FormatError("checkpoint: truncated weight matrix");
    try {
      w = std::stod(tok);
    } catch (const std::exception&) {
      throw FormatError("checkpoint: bad weight '" + tok + "'");
    }
  }
  return ck;
}

}  // namespace acpo
