#include "acpo/trainer.hpp"

#include <chrono>
#include <cstdio>
#include <cmath>
#include <fstream>
#include <sstream>

#include "acpo/random.hpp"
#include "acpo/synth_env.hpp"

namespace acpo {

namespace {

// Stream tags for derive_seed.
constexpr std::uint64_t kQueryStream = 1;
constexpr std::uint64_t kRolloutStream = 2;

std::int64_t schedule_k(const TrainConfig& cfg, std::int64_t iteration, std::int64_t step) {
  if (cfg.schedule_reset) return reuse_count(step, cfg.max_reuse, cfg.steps_per_iteration);
  const std::int64_t global = (iteration - 1) * cfg.steps_per_iteration + step;
  return reuse_count(global, cfg.max_reuse, cfg.total_steps());
}

std::ofstream open_for_write(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
  return out;
}

void write_checkpoint_file(const std::filesystem::path& path, const PolicyParams& params,
                           std::int64_t step) {
  auto out = open_for_write(path);
  write_checkpoint(out, params, step);
  if (!out) throw std::runtime_error(path.string() + ": write failed");
}

}  // namespace

std::string metrics_row(const StepMetrics& m) {
  std::ostringstream o;
  o << m.iteration << ',' << m.step << ',' << m.k << ',' << to_string(m.phase) << ','
    << m.gate.n_valid << ',' << m.gate.n_zero << ',' << m.gate.n_saturated << ','
    << format_real(m.mean_reward) << ',' << format_real(m.mean_reward_valid) << ','
    << format_real(m.loss) << ',' << format_real(m.clip_fraction) << ','
    << format_real(m.mean_ratio) << ',' << format_real(m.grad_norm) << ',' << m.ratio_overflow
    << ',' << format_real(m.wall_ms);
  return o.str();
}

TrainerState init_state(const TrainConfig& cfg) {
  TrainerState s;
  s.policy = init_policy(cfg.feature_config(), cfg.seed, cfg.init_scale);
  return s;
}

std::vector<Query> sample_queries(const TrainConfig& cfg, std::int64_t global_step) {
  Rng rng(derive_seed(cfg.seed, {kQueryStream, static_cast<std::uint64_t>(global_step)}));
  TierMix mix = cfg.tier_mix;
  mix.horizon = cfg.mix_horizon();
  const TaskSpec spec;
  std::vector<Query> out;
  out.reserve(cfg.batch_size);
  for (std::size_t j = 0; j < cfg.batch_size; ++j)
    out.push_back(gen_task(spec, mix_sampler(mix, global_step, rng), rng));
  return out;
}

StepMetrics train_step(const TrainConfig& cfg, TrainerState& state,
                       const std::vector<Query>& queries, std::int64_t iteration,
                       std::int64_t step, const EpochObserver& observer) {
  const auto started = std::chrono::steady_clock::now();
  StepMetrics m;
  m.iteration = iteration;
  m.step = step;
  m.k = schedule_k(cfg, iteration, step);
  m.phase = phase_of(m.k, cfg.max_reuse);

  const std::int64_t global = state.global_step;
  const PolicySnapshot old =
      snapshot(state.policy, SnapshotRole::Old, "old-" + std::to_string(global));

  Batch batch;
  batch.step = global;
  batch.snapshot_id = old.id();
  batch.groups.reserve(queries.size());
  double reward_sum = 0.0;
  for (std::size_t j = 0; j < queries.size(); ++j) {
    RolloutGroup group;
    group.query = queries[j];
    for (std::size_t i = 0; i < cfg.group_size; ++i) {
      Rng rng(derive_seed(cfg.seed, {kRolloutStream, static_cast<std::uint64_t>(global), j, i}));
      Response r = sample_response(old.params(), group.query, cfg.max_response_len, rng);
      r.reward = verify_reward(group.query, r);
      reward_sum += r.reward;
      group.responses.push_back(std::move(r));
    }
    batch.groups.push_back(std::move(group));
  }
  if (auto err = validate_batch(batch, cfg.feature_config().vocab_size))
    throw std::logic_error("sampled batch failed validation: " + err->message);
  m.mean_reward = reward_sum / static_cast<double>(batch.response_count());

  const GateResult gated = gate_batch(batch, cfg.gate);
  m.gate = gated.stats;
  const Batch& valid = gated.valid;

  if (!valid.groups.empty()) {
    double valid_sum = 0.0;
    for (const auto& g : valid.groups)
      for (const auto& r : g.responses) valid_sum += r.reward;
    m.mean_reward_valid = valid_sum / static_cast<double>(valid.response_count());

    const AdvantageTensor adv = compute_advantages(valid);
    PerToken ref_logprobs;
    if (cfg.clip.variant == Variant::GRPO) {
      const PolicyParams& ref = state.reference ? state.reference->params() : old.params();
      ref_logprobs = batch_logprobs(ref, valid);
    }

    for (std::int64_t epoch = 1; epoch <= m.k; ++epoch) {
      const PerToken new_logprobs = batch_logprobs(state.policy, valid);
      const ObjectiveReport rep =
          evaluate_objective(valid, adv, new_logprobs, ref_logprobs, cfg.clip);
      if (!std::isfinite(rep.loss)) {
        throw NonFiniteLossError("non-finite loss at iteration " + std::to_string(iteration) +
                                     ", step " + std::to_string(step) + ", epoch " +
                                     std::to_string(epoch),
                                 valid);
      }
      if (observer) observer(EpochView{epoch, valid, adv, new_logprobs, rep});
      EpochReport er;
      er.loss = rep.loss;
      er.clip_fraction = rep.clip_fraction;
      er.mean_ratio = rep.mean_ratio;
      er.kl_value = rep.kl_value;
      er.ratio_overflow = rep.ratio_overflow;
      er.grad_norm = apply_gradients(state.policy, rep.grad_logprob, valid, cfg.learning_rate);
      m.epochs.push_back(er);
    }
    m.epochs_run = static_cast<std::int64_t>(m.epochs.size());

    const double n = static_cast<double>(m.epochs.size());
    double loss = 0.0, clip = 0.0, ratio_sum = 0.0, gnorm = 0.0;
    for (const auto& e : m.epochs) {
      loss += e.loss;
      clip += e.clip_fraction;
      ratio_sum += e.mean_ratio;
      gnorm += e.grad_norm;
      m.ratio_overflow += e.ratio_overflow;
    }
    m.loss = loss / n;
    m.clip_fraction = clip / n;
    m.mean_ratio = ratio_sum / n;
    m.grad_norm = gnorm / n;
  }

  ++state.global_step;
  if (cfg.record_wall_time) {
    const auto elapsed = std::chrono::steady_clock::now() - started;
    m.wall_ms = std::chrono::duration<double, std::milli>(elapsed).count();
  }
  return m;
}

RunResult run(const TrainConfig& cfg, const std::filesystem::path& out_dir,
              const EpochObserver& observer) {
  cfg.validate();
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "checkpoints", ec);
  if (ec) throw std::runtime_error(out_dir.string() + ": " + ec.message());

  {
    auto echo = open_for_write(out_dir / "config.resolved");
    write_resolved_config(echo, cfg);
  }

  RunResult result;
  result.metrics_path = out_dir / cfg.metrics_file;
  auto csv = open_for_write(result.metrics_path);
  csv << kMetricsHeader << '\n';

  TrainerState state = init_state(cfg);
  for (std::int64_t it = 1; it <= cfg.outer_iterations; ++it) {
    state.reference = snapshot(state.policy, SnapshotRole::Ref, "ref-" + std::to_string(it));
    for (std::int64_t t = 1; t <= cfg.steps_per_iteration; ++t) {
      const auto queries = sample_queries(cfg, state.global_step);
      StepMetrics m;
      try {
        m = train_step(cfg, state, queries, it, t, observer);
      } catch (const NonFiniteLossError& e) {
        const auto dump = out_dir / "diagnostic_batch.jsonl";
        auto out = open_for_write(dump);
        write_batch(out, e.batch);
        throw NonFiniteLossError(std::string(e.what()) + " (batch dumped to " + dump.string() + ")",
                                 e.batch);
      }
      csv << metrics_row(m) << '\n';
      if (!csv) throw std::runtime_error(result.metrics_path.string() + ": write failed");
      if (state.global_step % cfg.checkpoint_every == 0) {
        char name[40];
        std::snprintf(name, sizeof name, "step_%06lld.ckpt",
                      static_cast<long long>(state.global_step));
        write_checkpoint_file(out_dir / "checkpoints" / name, state.policy, state.global_step);
      }
      result.metrics.push_back(std::move(m));
    }
  }
  csv.close();
  write_checkpoint_file(out_dir / "final.ckpt", state.policy, state.global_step);
  result.policy = std::move(state.policy);
  return result;
}

}  // namespace acpo
