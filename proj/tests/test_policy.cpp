#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "acpo/policy.hpp"
#include "acpo/synth_env.hpp"

namespace acpo {
namespace {

FeatureConfig small_features(std::size_t vocab = 13) {
  FeatureConfig f;
  f.vocab_size = vocab;
  f.prompt_buckets = 16;
  f.shared_scale = 1.0;
  return f;
}

Query sample_query() { return make_query(Difficulty::Middle, {27, 58}); }

// Policy whose bias row holds the given logits and every other weight is 0.
PolicyParams bias_policy(const std::vector<double>& logits) {
  FeatureConfig f;
  f.vocab_size = logits.size();
  f.context_window = 1;
  f.difficulty_onehot = false;
  f.prompt_bag = false;
  f.shared_scale = 1.0;
  PolicyParams p = init_policy(f, 0, 0.0);
  for (std::size_t b = 0; b < logits.size(); ++b) p.at(0, b) = logits[b];
  return p;
}

TEST(InitPolicy, SameSeedSameWeights) {
  const auto a = init_policy(small_features(), 0);
  const auto b = init_policy(small_features(), 0);
  EXPECT_EQ(a, b);
  EXPECT_NE(a.weights, init_policy(small_features(), 1).weights);
  for (double w : a.weights) {
    EXPECT_GE(w, -0.01);
    EXPECT_LE(w, 0.01);
  }
  EXPECT_EQ(a.weights.size(), a.rows() * a.cols());
}

TEST(InitPolicy, ZeroInitIsUniform) {
  const auto p = init_policy(small_features(), 3, 0.0);
  const std::vector<TokenId> resp{8, 5, 12};
  for (double lp : logprobs(p, sample_query(), resp)) EXPECT_DOUBLE_EQ(lp, -std::log(13.0));

  const auto p16 = init_policy(small_features(16), 0, 0.0);
  for (double lp : logprobs(p16, sample_query(), resp)) EXPECT_NEAR(lp, -2.772589, 1e-6);
}

TEST(LogSoftmax, TwoLogitExample) {
  const std::vector<double> z{1.0, 1.0 + std::log(3.0)};
  const auto lp = log_softmax(z);
  EXPECT_NEAR(lp[0], -std::log(4.0), 1e-15);
  EXPECT_NEAR(lp[1], std::log(0.75), 1e-15);
}

TEST(LogSoftmax, StableForLargeLogits) {
  for (double m : {1e3, -1e3}) {
    const std::vector<double> z{m, -m, 0.5 * m, m - 1.0};
    const auto lp = log_softmax(z);
    double total = 0.0;
    for (double v : lp) {
      EXPECT_FALSE(std::isnan(v));
      EXPECT_LE(v, 0.0);
      total += std::exp(v);
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
}

TEST(Logprobs, NormalizedAtEveryPosition) {
  const auto p = init_policy(small_features(), 5, 2.0);
  const std::vector<TokenId> prefix{1, 2, 3};
  for (std::size_t t = 0; t <= prefix.size(); ++t) {
    const auto lp = next_token_logprobs(p, sample_query(), std::span(prefix).first(t));
    double total = 0.0;
    for (double v : lp) {
      EXPECT_LE(v, 0.0);
      total += std::exp(v);
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
}

TEST(Logprobs, OutOfRangeTokenIsRejected) {
  const auto p = init_policy(small_features(), 5);
  const std::vector<TokenId> bad{13};
  EXPECT_THROW((void)logprobs(p, sample_query(), bad), std::out_of_range);
}

TEST(ContextFeatures, LayoutAndRange) {
  const auto f = small_features();
  EXPECT_EQ(f.context_features(), 1 + 3 + 13 + 2 * 14 + 16);
  const Query q = sample_query();
  const std::vector<TokenId> prefix{4, 7};
  for (std::size_t t = 0; t <= prefix.size(); ++t) {
    const auto x = context_features(f, q, std::span(prefix).first(t));
    for (const auto& feat : x) EXPECT_LT(feat.index, f.context_features());
  }
  // different prompts with the same prefix land in buckets independently of
  // the shared blocks, so the bucket feature is the last entry
  const auto x = context_features(f, q, prefix);
  EXPECT_EQ(x.back().value, 1.0);
  EXPECT_GE(x.back().index, f.context_features() - 16);
}

TEST(SampleResponse, DeterministicGivenSeed) {
  const auto p = init_policy(small_features(), 9, 1.0);
  Rng a(42), b(42);
  for (int i = 0; i < 50; ++i) {
    const auto ra = sample_response(p, sample_query(), 6, a);
    const auto rb = sample_response(p, sample_query(), 6, b);
    EXPECT_EQ(ra, rb);
    EXPECT_GE(ra.tokens.size(), 1u);
    EXPECT_LE(ra.tokens.size(), 6u);
    // recorded logprobs are the sampling-time values
    EXPECT_EQ(ra.old_logprobs, logprobs(p, sample_query(), ra.tokens));
    // only the last token may be the terminator
    for (std::size_t t = 0; t + 1 < ra.tokens.size(); ++t) EXPECT_NE(ra.tokens[t], 12u);
  }
}

TEST(SampleResponse, AllMassOnTerminatorGivesLengthOne) {
  const auto p = bias_policy({0, 0, 0, 30});
  EXPECT_GT(std::exp(next_token_logprobs(p, sample_query(), {})[3]), 1 - 1e-9);
  Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    const auto r = sample_response(p, sample_query(), 5, rng);
    ASSERT_EQ(r.tokens.size(), 1u);
    EXPECT_EQ(r.tokens[0], 3u);
  }
}

TEST(SampleResponse, FrequenciesMatchProbabilities) {
  const auto p = bias_policy({0.3, -0.4, 0.9});
  const auto lp = next_token_logprobs(p, sample_query(), {});
  Rng rng(2024);
  const int n = 100000;
  std::vector<int> counts(3, 0);
  for (int i = 0; i < n; ++i) ++counts[sample_response(p, sample_query(), 1, rng).tokens[0]];
  for (std::size_t b = 0; b < 3; ++b) {
    const double prob = std::exp(lp[b]);
    const double sd = std::sqrt(n * prob * (1 - prob));
    EXPECT_LE(std::abs(counts[b] - n * prob), 3 * sd) << "token " << b;
  }
}

TEST(SampleResponse, MaxLenMustBePositive) {
  const auto p = bias_policy({0, 0});
  Rng rng(0);
  EXPECT_THROW((void)sample_response(p, sample_query(), 0, rng), std::invalid_argument);
}

Batch one_response_batch(const std::vector<TokenId>& tokens) {
  Batch b;
  RolloutGroup g;
  g.query = sample_query();
  Response r;
  r.tokens = tokens;
  r.old_logprobs.assign(tokens.size(), -1.0);
  g.responses = {r, r};
  b.groups.push_back(g);
  return b;
}

TEST(ApplyGradients, ZeroGradientOrRateLeavesParamsUnchanged) {
  auto p = init_policy(small_features(), 4);
  const auto before = p;
  const Batch b = one_response_batch({5, 12});
  EXPECT_EQ(apply_gradients(p, zeros_like(b), b, 1.0), 0.0);
  EXPECT_EQ(p, before);
  PerToken g = zeros_like(b);
  g[0][0][0] = 0.7;
  EXPECT_GT(apply_gradients(p, g, b, 0.0), 0.0);
  EXPECT_EQ(p, before);
}

TEST(ApplyGradients, SingleTokenMatchesFiniteDifference) {
  auto p = init_policy(small_features(), 6, 0.5);
  const Batch b = one_response_batch({3, 9, 12});
  const double g = 1.7;
  // loss = g * logpi(token 1 of response 0)
  auto loss = [&](const PolicyParams& q) { return g * logprobs(q, b.groups[0].query, b.groups[0].responses[0].tokens)[1]; };
  PerToken gl = zeros_like(b);
  gl[0][0][1] = g;
  const auto analytic = weight_gradient(p, b, gl);
  double diff2 = 0, norm2 = 0;
  for (std::size_t k = 0; k < p.weights.size(); ++k) {
    const double w = p.weights[k];
    p.weights[k] = w + 1e-6;
    const double up = loss(p);
    p.weights[k] = w - 1e-6;
    const double down = loss(p);
    p.weights[k] = w;
    const double fd = (up - down) / 2e-6;
    diff2 += (fd - analytic[k]) * (fd - analytic[k]);
    norm2 += fd * fd;
  }
  EXPECT_LE(std::sqrt(diff2 / norm2), 1e-5);

  // the update itself is w <- w - lr * grad
  const auto before = p;
  const double norm = apply_gradients(p, gl, b, 0.5);
  EXPECT_NEAR(norm, std::sqrt(std::inner_product(analytic.begin(), analytic.end(), analytic.begin(), 0.0)), 1e-12);
  for (std::size_t k = 0; k < p.weights.size(); ++k)
    EXPECT_EQ(p.weights[k], before.weights[k] - 0.5 * analytic[k]);
}

TEST(ApplyGradients, ShapeMismatchIsRejected) {
  auto p = init_policy(small_features(), 4);
  const Batch b = one_response_batch({5});
  EXPECT_THROW((void)apply_gradients(p, PerToken{}, b, 1.0), std::invalid_argument);
}

TEST(Snapshot, IsolatedFromLaterUpdates) {
  auto p = init_policy(small_features(), 8, 0.3);
  const auto snap = snapshot(p, SnapshotRole::Old, "old-0");
  const Batch b = one_response_batch({2, 12});
  const auto frozen = batch_logprobs(snap.params(), b);
  // ratio of live vs snapshot is exactly 1 right after the snapshot
  EXPECT_EQ(batch_logprobs(p, b), frozen);

  PerToken g = zeros_like(b);
  g[0][0][0] = 1.0;
  apply_gradients(p, g, b, 3.0);
  EXPECT_NE(batch_logprobs(p, b), frozen);
  EXPECT_EQ(batch_logprobs(snap.params(), b), frozen);
  EXPECT_NE(snap.params(), p);

  const auto snap2 = snapshot(snap.params(), SnapshotRole::Ref, "ref");
  EXPECT_EQ(snap2.params(), snap.params());
  EXPECT_EQ(snap2.role(), SnapshotRole::Ref);
  EXPECT_EQ(snap.id(), "old-0");
}

TEST(Checkpoint, RoundTripIsBitExact) {
  auto f = small_features();
  f.shared_scale = 0.1;
  const auto p = init_policy(f, 77, 3.0);
  std::stringstream ss;
  write_checkpoint(ss, p, 1234);
  const Checkpoint ck = read_checkpoint(ss);
  EXPECT_EQ(ck.params, p);
  EXPECT_EQ(ck.step, 1234);
}

TEST(Checkpoint, HeaderStartsWithRequiredFields) {
  std::stringstream ss;
  write_checkpoint(ss, init_policy(small_features(), 1), 5);
  std::string k1, k2, k3, k4;
  std::string v;
  ss >> k1 >> v >> k2 >> v >> k3 >> v >> k4;
  EXPECT_EQ(k1, "vocab_size");
  EXPECT_EQ(k2, "context_features");
  EXPECT_EQ(k3, "seed");
  EXPECT_EQ(k4, "step");
}

TEST(Checkpoint, CorruptInputIsRejected) {
  std::stringstream ss;
  write_checkpoint(ss, init_policy(small_features(), 1), 5);
  const std::string text = ss.str();
  std::stringstream truncated(text.substr(0, text.size() / 2));
  EXPECT_THROW((void)read_checkpoint(truncated), FormatError);
  std::stringstream unknown("bogus 1\nweights\n");
  EXPECT_THROW((void)read_checkpoint(unknown), FormatError);
}

}  // namespace
}  // namespace acpo
