#include "acpo/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <sstream>

namespace acpo {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename Int>
Int parse_int(const std::string& v) {
  Int out{};
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc{} || ptr != end) throw ConfigError("expected an integer, got '" + v + "'");
  return out;
}

double parse_double(const std::string& v) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    throw ConfigError("expected a number, got '" + v + "'");
  }
  if (used != v.size()) throw ConfigError("expected a number, got '" + v + "'");
  return out;
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("expected true|false, got '" + v + "'");
}

MixMode parse_mix_mode(const std::string& v) {
  if (v == "static") return MixMode::Static;
  if (v == "staged") return MixMode::Staged;
  throw ConfigError("expected static|staged, got '" + v + "'");
}

struct KeySpec {
  std::string name;
  std::function<void(TrainConfig&, const std::string&)> set;
  std::function<std::string(const TrainConfig&)> get;
};

std::string int_str(std::int64_t v) { return std::to_string(v); }

const std::vector<KeySpec>& key_specs() {
  static const std::vector<KeySpec> specs = {
      {"outer_iterations", [](TrainConfig& c, const std::string& v) { c.outer_iterations = parse_int<std::int64_t>(v); },
       [](const TrainConfig& c) { return int_str(c.outer_iterations); }},
      {"steps_per_iteration", [](TrainConfig& c, const std::string& v) { c.steps_per_iteration = parse_int<std::int64_t>(v); },
       [](const TrainConfig& c) { return int_str(c.steps_per_iteration); }},
      {"batch_size", [](TrainConfig& c, const std::string& v) { c.batch_size = parse_int<std::size_t>(v); },
       [](const TrainConfig& c) { return std::to_string(c.batch_size); }},
      {"group_size", [](TrainConfig& c, const std::string& v) { c.group_size = parse_int<std::size_t>(v); },
       [](const TrainConfig& c) { return std::to_string(c.group_size); }},
      {"max_reuse", [](TrainConfig& c, const std::string& v) { c.max_reuse = parse_int<std::int64_t>(v); },
       [](const TrainConfig& c) { return int_str(c.max_reuse); }},
      {"tau", [](TrainConfig& c, const std::string& v) { c.gate.tau = parse_double(v); },
       [](const TrainConfig& c) { return format_real(c.gate.tau); }},
      {"n_max", [](TrainConfig& c, const std::string& v) { c.gate.n_max = parse_int<std::size_t>(v); },
       [](const TrainConfig& c) { return std::to_string(c.gate.n_max); }},
      {"variant", [](TrainConfig& c, const std::string& v) {
         try {
           c.clip.variant = variant_from_string(v);
         } catch (const std::invalid_argument& e) {
           throw ConfigError(e.what());
         }
       },
       [](const TrainConfig& c) { return std::string(to_string(c.clip.variant)); }},
      {"eps_low", [](TrainConfig& c, const std::string& v) { c.clip.eps_low = parse_double(v); },
       [](const TrainConfig& c) { return format_real(c.clip.eps_low); }},
      {"eps_high", [](TrainConfig& c, const std::string& v) { c.clip.eps_high_base = parse_double(v); },
       [](const TrainConfig& c) { return format_real(c.clip.eps_high_base); }},
      {"delta", [](TrainConfig& c, const std::string& v) { c.clip.delta = parse_double(v); },
       [](const TrainConfig& c) { return format_real(c.clip.delta); }},
      {"kl_beta", [](TrainConfig& c, const std::string& v) { c.clip.kl_beta = parse_double(v); },
       [](const TrainConfig& c) { return format_real(c.clip.kl_beta); }},
      {"learning_rate", [](TrainConfig& c, const std::string& v) { c.learning_rate = parse_double(v); },
       [](const TrainConfig& c) { return format_real(c.learning_rate); }},
      {"max_response_len", [](TrainConfig& c, const std::string& v) { c.max_response_len = parse_int<std::size_t>(v); },
       [](const TrainConfig& c) { return std::to_string(c.max_response_len); }},
      {"seed", [](TrainConfig& c, const std::string& v) { c.seed = parse_int<std::uint64_t>(v); },
       [](const TrainConfig& c) { return std::to_string(c.seed); }},
      {"mix_mode", [](TrainConfig& c, const std::string& v) { c.tier_mix.mode = parse_mix_mode(v); },
       [](const TrainConfig& c) { return std::string(c.tier_mix.mode == MixMode::Static ? "static" : "staged"); }},
      {"mix_easy", [](TrainConfig& c, const std::string& v) { c.tier_mix.weights[0] = parse_double(v); },
       [](const TrainConfig& c) { return format_real(c.tier_mix.weights[0]); }},
      {"mix_middle", [](TrainConfig& c, const std::string& v) { c.tier_mix.weights[1] = parse_double(v); },
       [](const TrainConfig& c) { return format_real(c.tier_mix.weights[1]); }},
      {"mix_difficult", [](TrainConfig& c, const std::string& v) { c.tier_mix.weights[2] = parse_double(v); },
       [](const TrainConfig& c) { return format_real(c.tier_mix.weights[2]); }},
      {"mix_horizon", [](TrainConfig& c, const std::string& v) { c.tier_mix.horizon = parse_int<std::int64_t>(v); },
       [](const TrainConfig& c) { return int_str(c.tier_mix.horizon); }},
      {"metrics_file", [](TrainConfig& c, const std::string& v) {
         if (v.empty() || v.find('/') != std::string::npos)
           throw ConfigError("metrics_file must be a plain file name");
         c.metrics_file = v;
       },
       [](const TrainConfig& c) { return c.metrics_file; }},
      {"context_window", [](TrainConfig& c, const std::string& v) { c.context_window = parse_int<std::size_t>(v); },
       [](const TrainConfig& c) { return std::to_string(c.context_window); }},
      {"difficulty_features", [](TrainConfig& c, const std::string& v) { c.difficulty_features = parse_bool(v); },
       [](const TrainConfig& c) { return std::string(c.difficulty_features ? "true" : "false"); }},
      {"prompt_bag", [](TrainConfig& c, const std::string& v) { c.prompt_bag = parse_bool(v); },
       [](const TrainConfig& c) { return std::string(c.prompt_bag ? "true" : "false"); }},
      {"prompt_buckets", [](TrainConfig& c, const std::string& v) { c.prompt_buckets = parse_int<std::size_t>(v); },
       [](const TrainConfig& c) { return std::to_string(c.prompt_buckets); }},
      {"shared_feature_scale", [](TrainConfig& c, const std::string& v) { c.shared_feature_scale = parse_double(v); },
       [](const TrainConfig& c) { return format_real(c.shared_feature_scale); }},
      {"init_scale", [](TrainConfig& c, const std::string& v) { c.init_scale = parse_double(v); },
       [](const TrainConfig& c) { return format_real(c.init_scale); }},
      {"checkpoint_every", [](TrainConfig& c, const std::string& v) { c.checkpoint_every = parse_int<std::int64_t>(v); },
       [](const TrainConfig& c) { return int_str(c.checkpoint_every); }},
      {"schedule_reset", [](TrainConfig& c, const std::string& v) { c.schedule_reset = parse_bool(v); },
       [](const TrainConfig& c) { return std::string(c.schedule_reset ? "true" : "false"); }},
      {"record_wall_time", [](TrainConfig& c, const std::string& v) { c.record_wall_time = parse_bool(v); },
       [](const TrainConfig& c) { return std::string(c.record_wall_time ? "true" : "false"); }},
  };
  return specs;
}

const KeySpec* find_key(const std::string& name) {
  for (const auto& k : key_specs())
    if (k.name == name) return &k;
  return nullptr;
}

}  // namespace

FeatureConfig TrainConfig::feature_config() const {
  FeatureConfig f;
  f.vocab_size = vocab::kSize;
  f.context_window = context_window;
  f.difficulty_onehot = difficulty_features;
  f.prompt_bag = prompt_bag;
  f.prompt_buckets = prompt_buckets;
  f.shared_scale = shared_feature_scale;
  return f;
}

std::int64_t TrainConfig::mix_horizon() const {
  return tier_mix.horizon > 0 ? tier_mix.horizon : total_steps();
}

void TrainConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(what);
  };
  require(outer_iterations >= 1, "outer_iterations must be >= 1");
  require(steps_per_iteration >= 1, "steps_per_iteration must be >= 1");
  require(batch_size >= 1, "batch_size must be >= 1");
  require(group_size >= 2, "group_size must be >= 2");
  require(max_reuse >= 1, "max_reuse must be >= 1");
  require(std::isfinite(gate.tau), "tau must be finite");
  require(gate.n_max >= 1 && gate.n_max <= group_size, "n_max must be in [1, group_size]");
  try {
    clip.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  require(std::isfinite(learning_rate) && learning_rate >= 0.0, "learning_rate must be >= 0");
  require(max_response_len >= 1, "max_response_len must be >= 1");
  require(tier_mix.horizon >= 0, "mix_horizon must be >= 0");
  try {
    TierMix resolved = tier_mix;
    resolved.horizon = mix_horizon();
    resolved.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  require(std::isfinite(shared_feature_scale) && shared_feature_scale >= 0.0,
          "shared_feature_scale must be >= 0");
  require(std::isfinite(init_scale) && init_scale >= 0.0, "init_scale must be >= 0");
  require(checkpoint_every >= 1, "checkpoint_every must be >= 1");
}

bool TrainConfig::operator==(const TrainConfig& o) const {
  return resolved_config_text(*this) == resolved_config_text(o);
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& k : key_specs()) out.push_back(k.name);
    return out;
  }();
  return names;
}

TrainConfig parse_config_text(const std::string& text, const std::string& source) {
  TrainConfig cfg;
  std::map<std::string, std::size_t> seen;  // key -> line
  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  auto fail = [&](std::size_t line, const std::string& msg) -> ConfigError {
    return ConfigError(source + ":" + std::to_string(line) + ": " + msg);
  };
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = raw;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw fail(line_no, "expected key=value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const KeySpec* spec = find_key(key);
    if (!spec) throw fail(line_no, "unknown key '" + key + "'");
    try {
      spec->set(cfg, value);
    } catch (const ConfigError& e) {
      throw fail(line_no, key + ": " + e.what());
    }
    seen[key] = line_no;
  }

  if (!seen.count("n_max")) cfg.gate.n_max = cfg.group_size >= 2 ? cfg.group_size - 1 : 1;
  if (cfg.clip.variant == Variant::FixedClip && !seen.count("delta")) cfg.clip.delta = 0.0;

  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(source + ": " + e.what());
  }
  return cfg;
}

TrainConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open config file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path.string());
}

void write_resolved_config(std::ostream& out, const TrainConfig& cfg) {
  for (const auto& k : key_specs()) out << k.name << " = " << k.get(cfg) << '\n';
}

std::string resolved_config_text(const TrainConfig& cfg) {
  std::ostringstream out;
  write_resolved_config(out, cfg);
  return out.str();
}

}  // namespace acpo
