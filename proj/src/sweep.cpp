#include "acpo/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "acpo/trainer.hpp"

namespace acpo {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

TrainConfig variant_config(Variant variant, double delta) {
  TrainConfig cfg;
  cfg.clip.variant = variant;
  cfg.clip.delta = variant == Variant::FixedClip ? 0.0 : delta;
  return cfg;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
  return out;
}

}  // namespace

void ExperimentPreset::validate() const {
  if (runs.empty()) throw ConfigError("preset '" + name + "' has no runs");
  if (seeds.empty()) throw ConfigError("preset '" + name + "' has an empty seed list");
  if (!(final_window > 0.0 && final_window <= 1.0))
    throw ConfigError("final_window must be in (0, 1]");
  std::set<std::string> labels;
  for (const auto& r : runs) {
    if (r.label.empty()) throw ConfigError("empty run label");
    if (!labels.insert(r.label).second) throw ConfigError("duplicate label '" + r.label + "'");
  }
}

std::vector<std::string> builtin_preset_names() { return {"default", "delta_sweep", "baselines"}; }

ExperimentPreset builtin_preset(const std::string& name) {
  ExperimentPreset p;
  p.name = name;
  if (name == "default") {
    p.runs = {{"acpo", variant_config(Variant::ACPO, 0.05)},
              {"fixedclip", variant_config(Variant::FixedClip, 0.0)}};
  } else if (name == "delta_sweep") {
    p.runs = {{"acpo_d003", variant_config(Variant::ACPO, 0.03)},
              {"acpo_d005", variant_config(Variant::ACPO, 0.05)},
              {"acpo_d010", variant_config(Variant::ACPO, 0.10)},
              {"fixedclip", variant_config(Variant::FixedClip, 0.0)}};
  } else if (name == "baselines") {
    TrainConfig grpo = variant_config(Variant::GRPO, 0.0);
    grpo.clip.kl_beta = 0.001;  // larger values diverge or collapse at this scale
    p.runs = {{"grpo", grpo},
              {"fixedclip", variant_config(Variant::FixedClip, 0.0)},
              {"acpo", variant_config(Variant::ACPO, 0.05)}};
  } else {
    throw ConfigError("unknown preset '" + name + "'");
  }
  return p;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
      if (item.front() == '-') throw std::invalid_argument(item);
      v = std::stoull(item, &used);
    } catch (const std::exception&) {
      throw ConfigError("bad seed '" + item + "'");
    }
    if (used != item.size()) throw ConfigError("bad seed '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError("empty seed list");
  return out;
}

ExperimentPreset parse_preset_text(const std::string& text, const std::string& source) {
  ExperimentPreset p;
  p.name = std::filesystem::path(source).stem().string();
  std::string common;
  std::vector<std::pair<std::string, std::string>> sections;  // label -> body
  std::string* current = nullptr;
  bool in_preset = false;

  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = raw;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    auto fail = [&](const std::string& why) {
      return ConfigError(source + ":" + std::to_string(line_no) + ": " + why);
    };
    if (line.front() == '[') {
      if (line.back() != ']') throw fail("unterminated section header");
      const std::string section = trim(line.substr(1, line.size() - 2));
      in_preset = section == "preset";
      if (in_preset) {
        current = nullptr;
      } else if (section == "common") {
        current = &common;
      } else {
        for (const auto& s : sections)
          if (s.first == section) throw fail("duplicate label '" + section + "'");
        sections.emplace_back(section, std::string{});
        current = &sections.back().second;
      }
      continue;
    }
    if (in_preset) {
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw fail("expected key=value");
      const std::string key = trim(line.substr(0, eq));
      const std::string value = trim(line.substr(eq + 1));
      try {
        if (key == "name") p.name = value;
        else if (key == "seeds") p.seeds = parse_seed_list(value);
        else if (key == "final_window") p.final_window = std::stod(value);
        else throw fail("unknown preset key '" + key + "'");
      } catch (const ConfigError&) {
        throw;
      } catch (const std::exception&) {
        throw fail("bad value for '" + key + "'");
      }
      continue;
    }
    if (!current) throw fail("key outside of a section");
    *current += line + '\n';
  }

  for (const auto& [label, body] : sections)
    p.runs.push_back({label, parse_config_text(common + body, source + "[" + label + "]")});
  p.validate();
  return p;
}

ExperimentPreset load_preset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open preset file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_preset_text(ss.str(), path.string());
}

ExperimentPreset resolve_preset(const std::string& name_or_path) {
  const auto names = builtin_preset_names();
  if (std::find(names.begin(), names.end(), name_or_path) != names.end())
    return builtin_preset(name_or_path);
  if (std::filesystem::exists(name_or_path)) return load_preset(name_or_path);
  throw ConfigError("unknown preset '" + name_or_path + "' (not a built-in name or a file)");
}

bool SweepResult::all_ok() const {
  return std::all_of(runs.begin(), runs.end(), [](const SeedResult& r) { return r.ok; });
}

std::vector<LabelSummary> summarize(const std::vector<SeedResult>& runs,
                                    const std::vector<std::string>& label_order) {
  std::vector<LabelSummary> out;
  for (const auto& label : label_order) {
    LabelSummary s;
    s.label = label;
    std::vector<const SeedResult*> ok;
    for (const auto& r : runs) {
      if (r.label != label) continue;
      if (r.ok) ok.push_back(&r);
      else ++s.n_failed;
    }
    s.n_ok = ok.size();
    if (!ok.empty()) {
      const double n = static_cast<double>(ok.size());
      for (const auto* r : ok) {
        s.reward_mean += r->window.mean_reward;
        s.clip_mean += r->window.clip_fraction;
      }
      s.reward_mean /= n;
      s.clip_mean /= n;
      for (const auto* r : ok) {
        s.reward_std += (r->window.mean_reward - s.reward_mean) * (r->window.mean_reward - s.reward_mean);
        s.clip_std += (r->window.clip_fraction - s.clip_mean) * (r->window.clip_fraction - s.clip_mean);
      }
      s.reward_std = std::sqrt(s.reward_std / n);
      s.clip_std = std::sqrt(s.clip_std / n);
    }
    out.push_back(s);
  }
  return out;
}

void write_summary_csv(const std::filesystem::path& path, const std::vector<LabelSummary>& rows) {
  auto out = open_out(path);
  out << "label,n_ok,n_failed,reward_mean,reward_std,clip_fraction_mean,clip_fraction_std\n";
  for (const auto& s : rows)
    out << s.label << ',' << s.n_ok << ',' << s.n_failed << ',' << format_real(s.reward_mean)
        << ',' << format_real(s.reward_std) << ',' << format_real(s.clip_mean) << ','
        << format_real(s.clip_std) << '\n';
}

void write_runs_csv(const std::filesystem::path& path, const std::vector<SeedResult>& rows) {
  auto out = open_out(path);
  out << "label,seed,status,final_mean_reward,final_clip_fraction,metrics,error\n";
  for (const auto& r : rows) {
    std::string err = r.error;
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    out << r.label << ',' << r.seed << ',' << (r.ok ? "ok" : "failed") << ','
        << format_real(r.window.mean_reward) << ',' << format_real(r.window.clip_fraction) << ','
        << r.metrics_path.string() << ',' << err << '\n';
  }
}

SweepResult run_sweep(const ExperimentPreset& preset, const std::filesystem::path& out_dir,
                      std::size_t parallelism) {
  preset.validate();
  std::filesystem::create_directories(out_dir);

  SweepResult result;
  std::vector<TrainConfig> configs;
  std::vector<std::filesystem::path> dirs;
  for (const auto& run : preset.runs) {
    for (auto seed : preset.seeds) {
      SeedResult r;
      r.label = run.label;
      r.seed = seed;
      result.runs.push_back(r);
      TrainConfig cfg = run.config;
      cfg.seed = seed;
      configs.push_back(cfg);
      dirs.push_back(out_dir / run.label / ("seed_" + std::to_string(seed)));
    }
  }

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < configs.size(); i = next++) {
      SeedResult& r = result.runs[i];
      try {
        const RunResult rr = run(configs[i], dirs[i]);
        r.metrics_path = rr.metrics_path;
        r.window = final_window_means(read_metrics_csv(rr.metrics_path), preset.final_window);
        r.ok = true;
      } catch (const std::exception& e) {
        r.error = e.what();
      }
    }
  };
  const std::size_t n_threads = std::clamp<std::size_t>(parallelism, 1, configs.size());
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }

  std::vector<std::string> order;
  for (const auto& run : preset.runs) order.push_back(run.label);
  result.summary = summarize(result.runs, order);
  write_runs_csv(out_dir / "runs.csv", result.runs);
  write_summary_csv(out_dir / "summary.csv", result.summary);
  return result;
}

}  // namespace acpo
