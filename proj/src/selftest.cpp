#include "acpo/selftest.hpp"

#include <mpfr.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>

#include "acpo/advantage.hpp"
#include "acpo/curriculum.hpp"
#include "acpo/gating.hpp"
#include "acpo/policy.hpp"
#include "acpo/random.hpp"

namespace acpo {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// (1 + erf(a / (sqrt(2) sigma))) / 2 evaluated with 256-bit intermediates.
double mp_normal_cdf(double a, double sigma) {
  mpfr_t x, s, t;
  mpfr_inits2(256, x, s, t, static_cast<mpfr_ptr>(nullptr));
  mpfr_set_d(x, a, MPFR_RNDN);
  mpfr_set_d(s, sigma, MPFR_RNDN);
  mpfr_sqrt_ui(t, 2, MPFR_RNDN);
  mpfr_mul(s, s, t, MPFR_RNDN);
  mpfr_div(x, x, s, MPFR_RNDN);
  mpfr_erf(x, x, MPFR_RNDN);
  mpfr_add_ui(x, x, 1, MPFR_RNDN);
  mpfr_div_ui(x, x, 2, MPFR_RNDN);
  const double out = mpfr_get_d(x, MPFR_RNDN);
  mpfr_clears(x, s, t, static_cast<mpfr_ptr>(nullptr));
  return out;
}

std::string fmt(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, v);
  return buf;
}

// Tiny policy for gradient checks: 4 tokens, one look-back slot, two
// hashed buckets -> 8 feature rows x 4 columns = 32 weights.
FeatureConfig grad_features() {
  FeatureConfig f;
  f.vocab_size = 4;
  f.context_window = 1;
  f.difficulty_onehot = false;
  f.prompt_bag = false;
  f.prompt_buckets = 2;
  f.shared_scale = 1.0;
  return f;
}

struct GradProblem {
  PolicyParams params;
  Batch batch;
  AdvantageTensor adv;
  PerToken ref_logprobs;
};

PolicyParams perturbed(const PolicyParams& p, double scale, Rng& rng) {
  PolicyParams q = p;
  for (auto& w : q.weights) w += rng.uniform(-scale, scale);
  return q;
}

GradProblem draw_problem(Rng& rng) {
  GradProblem prob;
  prob.params = init_policy(grad_features(), rng.next_u64(), 1.0);
  const PolicyParams old_params = perturbed(prob.params, 0.4, rng);
  const PolicyParams ref_params = perturbed(prob.params, 0.4, rng);
  const std::size_t vocab = prob.params.cols();

  const std::size_t n_groups = static_cast<std::size_t>(rng.uniform_int(1, 2));
  const std::size_t group_size = n_groups == 1 ? static_cast<std::size_t>(rng.uniform_int(2, 4)) : 2;
  for (std::size_t g = 0; g < n_groups; ++g) {
    RolloutGroup group;
    group.query.id = "q" + std::to_string(g);
    const auto prompt_len = rng.uniform_int(1, 3);
    for (std::int64_t i = 0; i < prompt_len; ++i)
      group.query.prompt_tokens.push_back(static_cast<TokenId>(rng.uniform_int(0, 2)));
    for (std::size_t i = 0; i < group_size; ++i) {
      Response resp;
      const auto len = rng.uniform_int(1, 6);
      for (std::int64_t t = 0; t < len; ++t)
        resp.tokens.push_back(static_cast<TokenId>(rng.uniform_int(0, static_cast<std::int64_t>(vocab) - 1)));
      resp.old_logprobs = logprobs(old_params, group.query, resp.tokens);
      resp.reward = rng.uniform();
      group.responses.push_back(std::move(resp));
    }
    prob.batch.groups.push_back(std::move(group));
  }
  prob.adv = compute_advantages(prob.batch);
  prob.ref_logprobs = batch_logprobs(ref_params, prob.batch);
  return prob;
}

// True when some token ratio sits within `margin` of an active clip boundary.
bool near_kink(const GradProblem& prob, const ClipConfig& cfg, double margin) {
  const PerToken lp = batch_logprobs(prob.params, prob.batch);
  for (std::size_t g = 0; g < prob.batch.groups.size(); ++g) {
    const auto& responses = prob.batch.groups[g].responses;
    for (std::size_t i = 0; i < responses.size(); ++i) {
      for (std::size_t t = 0; t < responses[i].old_logprobs.size(); ++t) {
        const double r = std::exp(lp[g][i][t] - responses[i].old_logprobs[t]);
        double eps_high = cfg.eps_high_base;
        if (cfg.variant == Variant::GRPO) eps_high = cfg.eps_low;
        if (cfg.variant == Variant::ACPO)
          eps_high = adaptive_eps_high(prob.adv.a_hat[g][i][t], prob.adv.sigma_a, cfg);
        if (std::abs(r - (1.0 - cfg.eps_low)) < margin || std::abs(r - (1.0 + eps_high)) < margin)
          return true;
      }
    }
  }
  return false;
}

double problem_loss(const GradProblem& prob, const PolicyParams& params, const ClipConfig& cfg) {
  return evaluate_objective(prob.batch, prob.adv, batch_logprobs(params, prob.batch),
                            prob.ref_logprobs, cfg)
      .loss;
}

}  // namespace

OracleReport erf_oracle_check(std::size_t n, std::uint64_t seed, double tol) {
  const auto start = Clock::now();
  OracleReport rep;
  rep.name = "normalize_advantage vs MPFR erf";
  Rng rng(seed);
  auto check = [&](double a, double sigma, double expected) {
    const double err = std::abs(normalize_advantage(a, sigma) - expected);
    rep.worst = std::isnan(err) ? INFINITY : std::max(rep.worst, err);
    ++rep.cases;
  };
  for (std::size_t i = 0; i < n; ++i) {
    const double sigma = std::pow(10.0, rng.uniform(-6.0, 3.0));
    const double a = sigma * rng.uniform(-9.0, 9.0);
    check(a, sigma, mp_normal_cdf(a, sigma));
  }
  // below the sigma floor the value is defined as exactly one half
  for (double sigma : {0.0, 1e-15, 9.9e-13})
    for (double a : {-1.0, 0.0, 2.5}) check(a, sigma, 0.5);
  rep.passed = rep.worst <= tol;
  rep.detail = "max abs error " + fmt("%.3g", rep.worst) + " (tol " + fmt("%.0e", tol) + ")";
  rep.seconds = seconds_since(start);
  return rep;
}

OracleReport reuse_count_oracle_check(std::int64_t max_param) {
  const auto start = Clock::now();
  OracleReport rep;
  rep.name = "reuse_count vs rational ceiling";
  std::size_t mismatches = 0;
  std::string first;
  for (std::int64_t n = 1; n <= max_param; ++n) {
    for (std::int64_t horizon = 1; horizon <= max_param; ++horizon) {
      for (std::int64_t t = 0; t <= horizon; ++t) {
        std::int64_t k = 0;
        while (k * horizon < n * t) ++k;  // smallest k with k >= n t / T
        const std::int64_t expected = std::max<std::int64_t>(1, k);
        const std::int64_t got = reuse_count(t, n, horizon);
        ++rep.cases;
        if (got != expected) {
          if (!mismatches)
            first = "t=" + std::to_string(t) + " N=" + std::to_string(n) + " T=" +
                    std::to_string(horizon) + " got " + std::to_string(got) + " want " +
                    std::to_string(expected);
          ++mismatches;
        }
      }
    }
  }
  rep.worst = static_cast<double>(mismatches);
  rep.passed = mismatches == 0;
  rep.detail = mismatches ? std::to_string(mismatches) + " mismatches, first " + first
                          : "all " + std::to_string(rep.cases) + " triples match";
  rep.seconds = seconds_since(start);
  return rep;
}

OracleReport gate_oracle_check(std::size_t g) {
  const auto start = Clock::now();
  OracleReport rep;
  rep.name = "gate_batch vs brute-force count";
  const std::size_t patterns = std::size_t{1} << g;
  Batch batch;
  for (std::size_t p = 0; p < patterns; ++p) {
    RolloutGroup group;
    group.query.id = "pattern" + std::to_string(p);
    for (std::size_t i = 0; i < g; ++i) {
      Response r;
      r.tokens = {0};
      r.old_logprobs = {-1.0};
      r.reward = (p >> i) & 1U ? 1.0 : 0.0;
      group.responses.push_back(r);
    }
    batch.groups.push_back(group);
  }
  std::size_t mismatches = 0;
  for (std::size_t n_max = 1; n_max <= g; ++n_max) {
    const GateResult res = gate_batch(batch, GateConfig{0.5, n_max});
    GateStats want;
    want.n_total = patterns;
    std::vector<RolloutGroup> kept;
    for (std::size_t p = 0; p < patterns; ++p) {
      std::size_t high = 0;
      for (std::size_t i = 0; i < g; ++i) high += (p >> i) & 1U;
      const bool keep = high >= 1 && high <= n_max;
      if (high == 0) ++want.n_zero;
      if (high > n_max) ++want.n_saturated;
      if (keep) {
        ++want.n_valid;
        kept.push_back(batch.groups[p]);
      }
      ++rep.cases;
      if (res.mask.size() != patterns || res.mask[p] != keep) ++mismatches;
    }
    if (res.valid.groups != kept || res.stats.n_total != want.n_total ||
        res.stats.n_valid != want.n_valid || res.stats.n_zero != want.n_zero ||
        res.stats.n_saturated != want.n_saturated)
      ++mismatches;
  }
  rep.worst = static_cast<double>(mismatches);
  rep.passed = mismatches == 0;
  rep.detail = std::to_string(patterns) + " patterns x " + std::to_string(g) + " n_max values, " +
               std::to_string(mismatches) + " mismatches";
  rep.seconds = seconds_since(start);
  return rep;
}

std::vector<GradCheckCase> gradient_check_cases() {
  auto make = [](Variant v, double delta, double beta) {
    ClipConfig c;
    c.variant = v;
    c.delta = delta;
    c.kl_beta = beta;
    return c;
  };
  return {{"grpo beta=0", make(Variant::GRPO, 0.0, 0.0)},
          {"grpo beta=0.1", make(Variant::GRPO, 0.0, 0.1)},
          {"fixedclip", make(Variant::FixedClip, 0.0, 0.0)},
          {"acpo delta=0", make(Variant::ACPO, 0.0, 0.0)},
          {"acpo delta=0.05", make(Variant::ACPO, 0.05, 0.0)}};
}

OracleReport gradient_check(const GradCheckCase& c, std::size_t instances, std::uint64_t seed,
                            double h, double tol, double kink_margin) {
  const auto start = Clock::now();
  OracleReport rep;
  rep.name = "parameter gradient vs central differences [" + c.name + "]";
  Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(c.clip.variant),
                             static_cast<std::uint64_t>(c.clip.delta * 1e6),
                             static_cast<std::uint64_t>(c.clip.kl_beta * 1e6)}));
  std::size_t redrawn = 0;
  std::size_t failures = 0;
  std::size_t clipped_tokens = 0;
  while (rep.cases < instances) {
    GradProblem prob = draw_problem(rng);
    if (near_kink(prob, c.clip, kink_margin)) {
      ++redrawn;
      continue;
    }
    const ObjectiveReport obj =
        evaluate_objective(prob.batch, prob.adv, batch_logprobs(prob.params, prob.batch),
                           prob.ref_logprobs, c.clip);
    clipped_tokens += static_cast<std::size_t>(
        std::lround(obj.clip_fraction * static_cast<double>(prob.batch.token_count())));
    const std::vector<double> analytic = weight_gradient(prob.params, prob.batch, obj.grad_logprob);

    double diff2 = 0.0, an2 = 0.0, fd2 = 0.0;
    PolicyParams probe = prob.params;
    for (std::size_t w = 0; w < probe.weights.size(); ++w) {
      const double base = probe.weights[w];
      probe.weights[w] = base + h;
      const double up = problem_loss(prob, probe, c.clip);
      probe.weights[w] = base - h;
      const double down = problem_loss(prob, probe, c.clip);
      probe.weights[w] = base;
      const double fd = (up - down) / (2.0 * h);
      diff2 += (fd - analytic[w]) * (fd - analytic[w]);
      an2 += analytic[w] * analytic[w];
      fd2 += fd * fd;
    }
    const double scale = std::sqrt(std::max(an2, fd2));
    // an all-clipped instance has an exactly zero gradient on both sides
    const double err = scale > 0.0 ? std::sqrt(diff2) / scale : std::sqrt(diff2);
    rep.worst = std::max(rep.worst, err);
    if (!(err <= tol)) ++failures;
    ++rep.cases;
  }
  rep.passed = failures == 0;
  rep.detail = std::to_string(rep.cases) + " instances (" + std::to_string(redrawn) +
               " redrawn near kinks, " + std::to_string(clipped_tokens) +
               " clipped tokens), max rel error " + fmt("%.3g", rep.worst) + ", " +
               std::to_string(failures) + " over tol";
  rep.seconds = seconds_since(start);
  return rep;
}

std::string format_report(const OracleReport& r) {
  std::ostringstream out;
  out << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << " ["
      << fmt("%.2f", r.seconds) << " s]";
  return out.str();
}

std::vector<OracleReport> run_selftest(std::ostream* log) {
  std::vector<OracleReport> out;
  auto record = [&](OracleReport r) {
    if (log) *log << format_report(r) << std::endl;
    out.push_back(std::move(r));
  };
  record(erf_oracle_check());
  record(reuse_count_oracle_check());
  record(gate_oracle_check());
  for (const auto& c : gradient_check_cases()) record(gradient_check(c));
  return out;
}

}  // namespace acpo
