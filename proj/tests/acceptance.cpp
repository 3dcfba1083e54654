// Acceptance checks: one PASS/FAIL line per criterion, exit status 0 only
// when every criterion passes. Unit-suite binaries to run for the invariant
// criterion are passed on the command line.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "acpo/config.hpp"
#include "acpo/selftest.hpp"
#include "acpo/sweep.hpp"
#include "acpo/trainer.hpp"

namespace {

using namespace acpo;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

struct Outcome {
  bool passed = false;
  std::string detail;
};

std::filesystem::path work_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "acpo_acceptance" / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// 1. erf, reuse_count and gate against their oracles, all within 5 s.
Outcome oracles() {
  const auto start = Clock::now();
  const std::vector<OracleReport> reps = {erf_oracle_check(), reuse_count_oracle_check(),
                                          gate_oracle_check()};
  const double secs = seconds_since(start);
  Outcome o{secs < 5.0, ""};
  for (const auto& r : reps) {
    o.passed = o.passed && r.passed;
    o.detail += r.name + (r.passed ? " ok" : " FAILED") + "; ";
  }
  o.detail += "erf worst " + fmt("%.2e", reps[0].worst) + ", " + fmt("%.2f", secs) + " s";
  return o;
}

// 2. End-to-end finite-difference gradients, 200 instances per variant, 30 s.
Outcome gradients() {
  const auto start = Clock::now();
  Outcome o{true, ""};
  double worst = 0.0;
  for (const auto& c : gradient_check_cases()) {
    const auto r = gradient_check(c, 200);
    o.passed = o.passed && r.passed && r.cases >= 200;
    worst = std::max(worst, r.worst);
    if (!r.passed) o.detail += c.name + " FAILED; ";
  }
  const double secs = seconds_since(start);
  o.passed = o.passed && secs < 30.0;
  o.detail += "5 variants x 200, worst rel " + fmt("%.2e", worst) + ", " + fmt("%.2f", secs) + " s";
  return o;
}

TrainConfig default_arm(Variant v, double delta) {
  TrainConfig cfg = builtin_preset("default").runs.front().config;
  cfg.clip.variant = v;
  cfg.clip.delta = delta;
  return cfg;
}

// 3. delta = 0 reduces to FixedClip byte-for-byte; first epoch is on-policy.
Outcome degeneracy() {
  TrainConfig acpo = default_arm(Variant::ACPO, 0.0);
  acpo.steps_per_iteration = 200;
  acpo.seed = 1;
  TrainConfig fixed = acpo;
  fixed.clip.variant = Variant::FixedClip;

  std::int64_t first_epochs = 0, bad_first = 0;
  double worst_ratio = 0.0;
  auto observer = [&](const EpochView& v) {
    if (v.epoch != 1) return;
    ++first_epochs;
    const double dev = std::abs(v.report.mean_ratio - 1.0);
    worst_ratio = std::max(worst_ratio, dev);
    if (dev > 1e-12 || v.report.clip_fraction != 0.0) ++bad_first;
  };
  const auto a = run(acpo, work_dir("c3_acpo"), observer);
  const auto f = run(fixed, work_dir("c3_fixed"), observer);
  const bool same = slurp(a.metrics_path) == slurp(f.metrics_path);
  Outcome o{same && bad_first == 0 && first_epochs > 0, ""};
  o.detail = std::string("metrics ") + (same ? "byte-identical" : "DIFFER") + "; " +
             std::to_string(first_epochs) + " first epochs, " + std::to_string(bad_first) +
             " off-policy, max |ratio-1| " + fmt("%.1e", worst_ratio);
  return o;
}

// 4. Two identical 500-step runs give byte-identical metrics, within 60 s.
Outcome determinism() {
  TrainConfig cfg = default_arm(Variant::ACPO, 0.05);
  cfg.steps_per_iteration = 500;
  cfg.seed = 3;
  const auto start = Clock::now();
  const auto a = run(cfg, work_dir("c4_a"));
  const auto b = run(cfg, work_dir("c4_b"));
  const double secs = seconds_since(start);
  const bool same = slurp(a.metrics_path) == slurp(b.metrics_path);
  return {same && secs < 60.0, std::string(same ? "byte-identical" : "DIFFER") + ", " +
                                   fmt("%.2f", secs) + " s for both"};
}

using SeedTable = std::map<std::string, std::map<std::uint64_t, WindowMeans>>;

SeedTable table_of(const SweepResult& res) {
  SeedTable t;
  for (const auto& r : res.runs)
    if (r.ok) t[r.label][r.seed] = r.window;
  return t;
}

// 5. Default preset: reward and clip comparisons per seed, calibrated reward.
Outcome default_preset(const SweepResult& res, double max_seed_seconds) {
  const auto t = table_of(res);
  if (!res.all_ok() || !t.count("acpo") || !t.count("fixedclip"))
    return {false, "default preset runs failed"};
  int reward_wins = 0, clip_lower = 0;
  double reward_sum = 0.0;
  std::string per_seed;
  for (const auto& [seed, a] : t.at("acpo")) {
    const auto& f = t.at("fixedclip").at(seed);
    reward_wins += a.mean_reward >= f.mean_reward;
    clip_lower += a.clip_fraction < f.clip_fraction;
    reward_sum += a.mean_reward;
    per_seed += " s" + std::to_string(seed) + ":" + fmt("%.3f", a.mean_reward) + "/" +
                fmt("%.3f", f.mean_reward);
  }
  const double n = static_cast<double>(t.at("acpo").size());
  const double acpo_reward = reward_sum / n;
  const bool ok = reward_wins >= 4 && clip_lower >= 3 && acpo_reward >= 0.8 &&
                  max_seed_seconds < 300.0;
  return {ok, "reward acpo>=fixed " + std::to_string(reward_wins) + "/5, clip lower " +
                  std::to_string(clip_lower) + "/5, acpo reward " + fmt("%.3f", acpo_reward) +
                  ", slowest seed " + fmt("%.1f", max_seed_seconds) + " s;" + per_seed};
}

// 6. delta sweep: the 0.10 arm clips more than the 0.05 arm on most seeds.
Outcome delta_sweep(const SweepResult& res) {
  const auto t = table_of(res);
  if (!res.all_ok() || !t.count("acpo_d005") || !t.count("acpo_d010"))
    return {false, "delta_sweep runs failed"};
  int higher = 0, n = 0;
  std::string per_seed;
  for (const auto& [seed, hi] : t.at("acpo_d010")) {
    const auto& mid = t.at("acpo_d005").at(seed);
    higher += hi.clip_fraction > mid.clip_fraction;
    ++n;
    per_seed += " s" + std::to_string(seed) + ":" + fmt("%.4f", hi.clip_fraction) + "/" +
                fmt("%.4f", mid.clip_fraction);
  }
  return {2 * higher > n, "clip(d=0.10) > clip(d=0.05) on " + std::to_string(higher) + "/" +
                              std::to_string(n) + " seeds;" + per_seed};
}

// 7. Every unit and property suite passes.
Outcome invariants(const std::vector<std::string>& suites) {
  if (suites.empty()) return {false, "no suites given"};
  Outcome o{true, ""};
  for (const auto& exe : suites) {
    const std::string cmd = "\"" + exe + "\" --gtest_brief=1 > /dev/null 2>&1";
    const bool ok = std::system(cmd.c_str()) == 0;
    o.passed = o.passed && ok;
    o.detail += std::filesystem::path(exe).filename().string() + (ok ? " ok; " : " FAILED; ");
  }
  return o;
}

void report(int id, const std::string& title, const Outcome& o, bool& all) {
  std::printf("%s criterion %d (%s): %s\n", o.passed ? "PASS" : "FAIL", id, title.c_str(),
              o.detail.c_str());
  std::fflush(stdout);
  all = all && o.passed;
}

SweepResult timed_sweep(const std::string& preset, double& max_seed_seconds) {
  const ExperimentPreset p = builtin_preset(preset);
  const auto start = Clock::now();
  SweepResult res = run_sweep(p, work_dir("sweep_" + preset));
  // Sequential runs: a seed's cost is its share of the runs.
  max_seed_seconds = seconds_since(start) / static_cast<double>(p.seeds.size());
  return res;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::string> suites(argv + 1, argv + argc);
  bool all = true;
  report(1, "oracles", oracles(), all);
  report(2, "finite-difference gradients", gradients(), all);
  report(3, "delta=0 degeneracy and first-epoch identity", degeneracy(), all);
  report(4, "determinism", determinism(), all);
  double default_seed_seconds = 0.0, sweep_seed_seconds = 0.0;
  const SweepResult def = timed_sweep("default", default_seed_seconds);
  report(5, "default preset", default_preset(def, default_seed_seconds), all);
  const SweepResult sweep = timed_sweep("delta_sweep", sweep_seed_seconds);
  report(6, "delta sweep clip trend", delta_sweep(sweep), all);
  report(7, "invariant suites", invariants(suites), all);
  std::printf("%s\n", all ? "ALL PASS" : "SOME CRITERIA FAILED");
  return all ? 0 : 1;
}
