#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "acpo/config.hpp"
#include "acpo/metrics.hpp"
#include "acpo/plot.hpp"
#include "acpo/sweep.hpp"
#include "acpo/trainer.hpp"
#include "test_util.hpp"

namespace acpo {
namespace {

using testing::fresh_dir;
using testing::slurp;
using testing::spit;

// ---- config ---------------------------------------------------------------

TEST(ParseConfig, EmptyTextGivesDefaults) {
  const TrainConfig cfg = parse_config_text("");
  EXPECT_EQ(cfg, TrainConfig{});
  EXPECT_EQ(cfg.outer_iterations, 1);
  EXPECT_EQ(cfg.steps_per_iteration, 2000);
  EXPECT_EQ(cfg.batch_size, 16u);
  EXPECT_EQ(cfg.group_size, 8u);
  EXPECT_EQ(cfg.max_reuse, 8);
  EXPECT_EQ(cfg.gate.tau, 0.5);
  EXPECT_EQ(cfg.gate.n_max, 7u);
  EXPECT_EQ(cfg.clip.variant, Variant::ACPO);
  EXPECT_EQ(cfg.clip.delta, 0.05);
  EXPECT_EQ(cfg.tier_mix.mode, MixMode::Staged);
}

TEST(ParseConfig, DeltaValue) {
  EXPECT_EQ(parse_config_text("delta=0.05").clip.delta, 0.05);
  EXPECT_EQ(parse_config_text("  delta = 0.1   # wider\n").clip.delta, 0.1);
}

TEST(ParseConfig, ErrorsNameTheLine) {
  auto expect_line = [](const std::string& text, const std::string& needle) {
    try {
      (void)parse_config_text(text, "cfg.txt");
      FAIL() << text;
    } catch (const ConfigError& e) {
      EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
    }
  };
  expect_line("seed=1\ndelta=abc\n", "cfg.txt:2:");
  expect_line("# comment\n\nbogus_key=1\n", "cfg.txt:3: unknown key 'bogus_key'");
  expect_line("batch_size=-4\n", "cfg.txt:1:");
  expect_line("variant=ppo\n", "cfg.txt:1:");
  expect_line("just text\n", "cfg.txt:1: expected key=value");
  expect_line("prompt_bag=maybe\n", "cfg.txt:1:");
  expect_line("group_size=1\n", "group_size");
  expect_line("variant=fixedclip\ndelta=0.05\n", "delta");
}

TEST(ParseConfig, MissingFileIsAnError) {
  EXPECT_THROW((void)parse_config("/nonexistent/acpo.cfg"), ConfigError);
}

TEST(ParseConfig, DerivedDefaults) {
  EXPECT_EQ(parse_config_text("group_size=4").gate.n_max, 3u);
  EXPECT_EQ(parse_config_text("group_size=4\nn_max=4").gate.n_max, 4u);
  EXPECT_EQ(parse_config_text("variant=fixedclip").clip.delta, 0.0);
}

TEST(ParseConfig, ResolvedEchoRoundTrips) {
  const char* texts[] = {"", "variant=grpo\nkl_beta=0.04\nseed=9\n",
                         "mix_mode=static\nmix_easy=0.2\nmix_middle=0.3\nmix_difficult=0.5\n",
                         "learning_rate=0.1\nshared_feature_scale=0.3333333333333333\nschedule_reset=false\n"};
  for (const char* t : texts) {
    const TrainConfig cfg = parse_config_text(t);
    const std::string echo = resolved_config_text(cfg);
    const TrainConfig back = parse_config_text(echo);
    EXPECT_EQ(back, cfg);
    EXPECT_EQ(resolved_config_text(back), echo);
    // every key appears in the echo
    for (const auto& key : config_keys()) EXPECT_NE(echo.find(key + " = "), std::string::npos) << key;
  }
}

TEST(ParseConfig, EchoWrittenNextToMetrics) {
  const auto dir = fresh_dir("echo");
  TrainConfig cfg = parse_config_text("steps_per_iteration=2\nbatch_size=2\ngroup_size=2\n");
  run(cfg, dir);
  EXPECT_TRUE(std::filesystem::exists(dir / "metrics.csv"));
  EXPECT_EQ(parse_config(dir / "config.resolved"), cfg);
}

// ---- metrics --------------------------------------------------------------

std::string metrics_text(const std::vector<std::pair<double, double>>& reward_clip) {
  std::string s = std::string(kMetricsHeader) + "\n";
  int step = 1;
  for (auto [r, c] : reward_clip) {
    StepMetrics m;
    m.step = step++;
    m.mean_reward = r;
    m.clip_fraction = c;
    s += metrics_row(m) + "\n";
  }
  return s;
}

TEST(MetricsCsv, RowRoundTrip) {
  const auto dir = fresh_dir("metrics_rt");
  StepMetrics m;
  m.iteration = 2;
  m.step = 17;
  m.k = 3;
  m.phase = Phase::Transition;
  m.gate = {16, 9, 4, 3};
  m.mean_reward = 0.1;
  m.mean_reward_valid = 1.0 / 3.0;
  m.loss = -0.123456789012345678;
  m.clip_fraction = 0.0625;
  m.mean_ratio = 1.0000000000000002;
  m.grad_norm = 12.5;
  m.ratio_overflow = 2;
  m.wall_ms = 0.0;
  spit(dir / "m.csv", std::string(kMetricsHeader) + "\n" + metrics_row(m) + "\n");
  const auto rows = read_metrics_csv(dir / "m.csv");
  ASSERT_EQ(rows.size(), 1u);
  const auto& r = rows[0];
  EXPECT_EQ(r.iteration, 2);
  EXPECT_EQ(r.step, 17);
  EXPECT_EQ(r.k, 3);
  EXPECT_EQ(r.phase, "Transition");
  EXPECT_EQ(r.n_valid, 9);
  EXPECT_EQ(r.n_zero, 4);
  EXPECT_EQ(r.n_saturated, 3);
  EXPECT_EQ(r.mean_reward, m.mean_reward);
  EXPECT_EQ(r.mean_reward_valid, m.mean_reward_valid);
  EXPECT_EQ(r.loss, m.loss);
  EXPECT_EQ(r.mean_ratio, m.mean_ratio);
  EXPECT_EQ(r.ratio_overflow, 2);
}

TEST(MetricsCsv, HeaderIsExact) {
  EXPECT_STREQ(kMetricsHeader,
               "iteration,step,k,phase,n_valid,n_zero,n_saturated,mean_reward,mean_reward_valid,"
               "loss,clip_fraction,mean_ratio,grad_norm,ratio_overflow,wall_ms");
}

TEST(MetricsCsv, MalformedInputNamesFileAndLine) {
  const auto dir = fresh_dir("metrics_bad");
  std::string text = metrics_text({{0.5, 0.1}, {0.6, 0.2}});
  text += "1,3,1,Exploration,1,2\n";
  spit(dir / "bad.csv", text);
  try {
    (void)read_metrics_csv(dir / "bad.csv");
    FAIL();
  } catch (const MetricsFormatError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("bad.csv"), std::string::npos) << what;
    EXPECT_NE(what.find("line 4"), std::string::npos) << what;
  }
  spit(dir / "hdr.csv", "a,b,c\n");
  EXPECT_THROW((void)read_metrics_csv(dir / "hdr.csv"), MetricsFormatError);
  std::string nonnum = metrics_text({{0.5, 0.1}});
  nonnum.replace(nonnum.find("0.5"), 3, "abc");
  spit(dir / "num.csv", nonnum);
  EXPECT_THROW((void)read_metrics_csv(dir / "num.csv"), MetricsFormatError);
}

TEST(FinalWindow, LastQuarterOfRows) {
  EXPECT_EQ(final_window_size(8, 0.25), 2u);
  EXPECT_EQ(final_window_size(3, 0.25), 1u);
  EXPECT_EQ(final_window_size(2000, 0.25), 500u);
  EXPECT_EQ(final_window_size(0, 0.25), 0u);
  std::vector<MetricsRow> rows(8);
  for (int i = 0; i < 8; ++i) {
    rows[i].mean_reward = i;
    rows[i].clip_fraction = 0.5 * i;
  }
  const auto w = final_window_means(rows);
  EXPECT_EQ(w.mean_reward, 6.5);
  EXPECT_EQ(w.clip_fraction, 3.25);
}

// ---- presets and sweep ----------------------------------------------------

TEST(Presets, BuiltinsAreValid) {
  for (const auto& name : builtin_preset_names()) {
    const auto p = builtin_preset(name);
    EXPECT_NO_THROW(p.validate());
    EXPECT_EQ(p.seeds, (std::vector<std::uint64_t>{1, 2, 3, 4, 5}));
  }
  const auto d = builtin_preset("delta_sweep");
  ASSERT_EQ(d.runs.size(), 4u);
  EXPECT_EQ(d.runs[0].label, "acpo_d003");
  EXPECT_EQ(d.runs[0].config.clip.delta, 0.03);
  EXPECT_EQ(d.runs[2].config.clip.delta, 0.10);
  EXPECT_EQ(d.runs[3].config.clip.variant, Variant::FixedClip);
  const auto def = builtin_preset("default");
  EXPECT_EQ(def.runs[0].config.steps_per_iteration, 2000);
  EXPECT_EQ(def.runs[0].config.batch_size, 16u);
  EXPECT_EQ(def.runs[0].config.group_size, 8u);
  EXPECT_EQ(def.runs[0].config.max_reuse, 8);
  EXPECT_EQ(def.runs[0].config.tier_mix.mode, MixMode::Staged);
  EXPECT_THROW(builtin_preset("nope"), ConfigError);
}

TEST(Presets, ValidationRejectsDuplicatesAndEmptySeeds) {
  ExperimentPreset p;
  p.name = "x";
  p.runs = {{"a", {}}, {"a", {}}};
  EXPECT_THROW(p.validate(), ConfigError);
  p.runs = {{"a", {}}};
  p.seeds.clear();
  EXPECT_THROW(p.validate(), ConfigError);
}

TEST(Presets, FileFormat) {
  const std::string text =
      "[preset]\nname = mine\nseeds = 4, 9\nfinal_window = 0.5\n"
      "[common]\nsteps_per_iteration = 3\n"
      "[fast]\nlearning_rate = 1\n"
      "[slow]\nlearning_rate = 0.5\nvariant = fixedclip\n";
  const auto p = parse_preset_text(text, "p.ini");
  EXPECT_EQ(p.name, "mine");
  EXPECT_EQ(p.seeds, (std::vector<std::uint64_t>{4, 9}));
  EXPECT_EQ(p.final_window, 0.5);
  ASSERT_EQ(p.runs.size(), 2u);
  EXPECT_EQ(p.runs[0].config.steps_per_iteration, 3);
  EXPECT_EQ(p.runs[1].config.clip.variant, Variant::FixedClip);
  EXPECT_EQ(p.runs[1].config.clip.delta, 0.0);

  EXPECT_THROW(parse_preset_text("[a]\nseed=1\n[a]\nseed=2\n", "dup.ini"), ConfigError);
  EXPECT_THROW(parse_preset_text("[preset]\nseeds=\n[a]\n", "e.ini"), ConfigError);
  EXPECT_THROW(parse_preset_text("[a]\nbogus=1\n", "u.ini"), ConfigError);
  EXPECT_THROW(parse_preset_text("seed=1\n", "o.ini"), ConfigError);
  EXPECT_THROW(parse_seed_list("1,x"), ConfigError);
  EXPECT_THROW(parse_seed_list("-3"), ConfigError);
}

ExperimentPreset tiny_preset(std::vector<std::string> labels, std::vector<std::uint64_t> seeds) {
  ExperimentPreset p;
  p.name = "tiny";
  p.seeds = std::move(seeds);
  for (const auto& l : labels) {
    TrainConfig c;
    c.steps_per_iteration = 8;
    c.batch_size = 4;
    c.group_size = 4;
    c.gate.n_max = 3;
    c.max_reuse = 2;
    c.checkpoint_every = 100;
    if (l.find("fixed") != std::string::npos) {
      c.clip.variant = Variant::FixedClip;
      c.clip.delta = 0.0;
    }
    p.runs.push_back({l, c});
  }
  return p;
}

TEST(Sweep, ExpandsLabelsTimesSeedsAndSummarizes) {
  const auto dir = fresh_dir("sweep");
  const auto preset = tiny_preset({"acpo_d003", "acpo_d005", "acpo_d010", "fixedclip"}, {1, 2});
  const auto res = run_sweep(preset, dir, 2);
  ASSERT_TRUE(res.all_ok());
  EXPECT_EQ(res.runs.size(), 8u);
  std::size_t metric_files = 0;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir))
    if (e.path().filename() == "metrics.csv") ++metric_files;
  EXPECT_EQ(metric_files, 8u);
  EXPECT_TRUE(std::filesystem::exists(dir / "summary.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir / "runs.csv"));
  ASSERT_EQ(res.summary.size(), 4u);

  // independent recomputation of every summary number from the CSVs
  std::ifstream in(dir / "summary.csv");
  std::string line;
  std::getline(in, line);
  for (const auto& label : {"acpo_d003", "acpo_d005", "acpo_d010", "fixedclip"}) {
    std::vector<double> rewards, clips;
    for (std::uint64_t seed : {1, 2}) {
      std::ifstream csv(dir / label / ("seed_" + std::to_string(seed)) / "metrics.csv");
      std::string row;
      std::getline(csv, row);
      std::vector<std::pair<double, double>> rc;
      while (std::getline(csv, row)) {
        std::vector<std::string> f;
        std::stringstream ss(row);
        std::string cell;
        while (std::getline(ss, cell, ',')) f.push_back(cell);
        rc.emplace_back(std::stod(f[7]), std::stod(f[10]));
      }
      const std::size_t w = std::max<std::size_t>(1, rc.size() / 4);
      double r = 0, c = 0;
      for (std::size_t i = rc.size() - w; i < rc.size(); ++i) {
        r += rc[i].first;
        c += rc[i].second;
      }
      rewards.push_back(r / w);
      clips.push_back(c / w);
    }
    auto mean = [](const std::vector<double>& v) { return (v[0] + v[1]) / 2; };
    auto sd = [&](const std::vector<double>& v) {
      const double m = mean(v);
      return std::sqrt(((v[0] - m) * (v[0] - m) + (v[1] - m) * (v[1] - m)) / 2);
    };
    ASSERT_TRUE(std::getline(in, line));
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    ASSERT_EQ(f.size(), 7u);
    EXPECT_EQ(f[0], label);
    EXPECT_EQ(f[1], "2");
    EXPECT_NEAR(std::stod(f[3]), mean(rewards), 1e-12);
    EXPECT_NEAR(std::stod(f[4]), sd(rewards), 1e-12);
    EXPECT_NEAR(std::stod(f[5]), mean(clips), 1e-12);
    EXPECT_NEAR(std::stod(f[6]), sd(clips), 1e-12);
  }
}

TEST(Sweep, SingleSeedHasZeroStd) {
  const auto res = run_sweep(tiny_preset({"only"}, {3}), fresh_dir("sweep1"));
  ASSERT_EQ(res.summary.size(), 1u);
  EXPECT_EQ(res.summary[0].reward_std, 0.0);
  EXPECT_EQ(res.summary[0].clip_std, 0.0);
}

TEST(Sweep, IdenticalConfigsGiveIdenticalRows) {
  const auto res = run_sweep(tiny_preset({"a", "b"}, {5}), fresh_dir("sweep2"));
  ASSERT_EQ(res.summary.size(), 2u);
  EXPECT_EQ(res.summary[0].reward_mean, res.summary[1].reward_mean);
  EXPECT_EQ(res.summary[0].clip_mean, res.summary[1].clip_mean);
}

TEST(Sweep, FailingRunDoesNotAbortOthers) {
  auto preset = tiny_preset({"good", "bad"}, {1});
  preset.runs[1].config.group_size = 1;  // rejected by config validation at run time
  const auto dir = fresh_dir("sweep3");
  const auto res = run_sweep(preset, dir);
  EXPECT_FALSE(res.all_ok());
  EXPECT_TRUE(res.runs[0].ok);
  EXPECT_FALSE(res.runs[1].ok);
  EXPECT_FALSE(res.runs[1].error.empty());
  EXPECT_EQ(res.summary[1].n_failed, 1u);
  EXPECT_NE(slurp(dir / "runs.csv").find("failed"), std::string::npos);
}

TEST(Summarize, PopulationStatistics) {
  std::vector<SeedResult> runs(3);
  const double r[] = {0.2, 0.4, 0.9};
  for (int i = 0; i < 3; ++i) {
    runs[i].label = "x";
    runs[i].ok = true;
    runs[i].window.mean_reward = r[i];
  }
  const auto s = summarize(runs, {"x"});
  EXPECT_NEAR(s[0].reward_mean, 0.5, 1e-15);
  EXPECT_NEAR(s[0].reward_std, std::sqrt((0.09 + 0.01 + 0.16) / 3), 1e-15);
}

// ---- plots ----------------------------------------------------------------

std::size_t count_of(const std::string& s, const std::string& needle) {
  std::size_t n = 0;
  for (auto p = s.find(needle); p != std::string::npos; p = s.find(needle, p + 1)) ++n;
  return n;
}

TEST(Plots, OneSeriesPerFileAndSidecar) {
  const auto dir = fresh_dir("plots");
  std::vector<std::filesystem::path> paths;
  for (int i = 0; i < 3; ++i) {
    const auto sub = dir / ("run" + std::to_string(i));
    std::filesystem::create_directories(sub);
    spit(sub / "metrics.csv", metrics_text({{0.1 * i, 0.2}, {0.2, 0.1}, {0.3, 0.0}, {0.4 + i, 0.0}}));
    paths.push_back(sub / "metrics.csv");
  }
  const auto out = dir / "out";
  auto res = render_plots({paths[0]}, out);
  EXPECT_EQ(count_of(slurp(res.reward_image), "class=\"series\""), 1u);
  EXPECT_EQ(count_of(slurp(res.clip_image), "class=\"series\""), 1u);

  res = render_plots(paths, out);
  EXPECT_EQ(count_of(slurp(res.reward_image), "class=\"series\""), 3u);
  EXPECT_EQ(count_of(slurp(res.clip_image), "class=\"series\""), 3u);
  const auto side = nlohmann::json::parse(slurp(res.sidecar));
  ASSERT_EQ(side["series"].size(), 3u);
  EXPECT_EQ(side["series"][1]["label"], "run1/metrics");
  EXPECT_DOUBLE_EQ(side["series"][2]["final_mean_reward"].get<double>(), 2.4);
  EXPECT_EQ(side["series"][0]["final_clip_fraction"].get<double>(), 0.0);
}

TEST(Plots, ConstantZeroClipIsFlatLine) {
  const auto dir = fresh_dir("plots_flat");
  spit(dir / "m.csv", metrics_text({{0.5, 0.0}, {0.6, 0.0}, {0.7, 0.0}, {0.8, 0.0}}));
  const auto res = render_plots({dir / "m.csv"}, dir / "out");
  const std::string svg = slurp(res.clip_image);
  const auto start = svg.find("points=\"") + 8;
  const auto pts = svg.substr(start, svg.find('"', start) - start);
  std::set<std::string> ys;
  std::stringstream ss(pts);
  std::string xy;
  while (ss >> xy) ys.insert(xy.substr(xy.find(',') + 1));
  EXPECT_EQ(ys.size(), 1u);
  const auto side = nlohmann::json::parse(slurp(res.sidecar));
  EXPECT_EQ(side["series"][0]["final_clip_fraction"].get<double>(), 0.0);
}

TEST(Plots, MalformedCsvNamesFileAndRow) {
  const auto dir = fresh_dir("plots_bad");
  spit(dir / "broken.csv", metrics_text({{0.5, 0.0}}) + "oops\n");
  try {
    (void)render_plots({dir / "broken.csv"}, dir / "out");
    FAIL();
  } catch (const MetricsFormatError& e) {
    EXPECT_NE(std::string(e.what()).find("broken.csv: line 3"), std::string::npos) << e.what();
  }
}

TEST(Plots, LabelsAreUnique) {
  const auto labels = series_labels({"out/a/seed_1/metrics.csv", "out/b/seed_1/metrics.csv",
                                     "out/a/seed_2/metrics.csv"});
  EXPECT_EQ(labels[0], "a/seed_1/metrics");
  EXPECT_EQ(labels[1], "b/seed_1/metrics");
  EXPECT_EQ(labels[2], "a/seed_2/metrics");
  EXPECT_EQ(series_labels({"x/m.csv"})[0], "x/m");
  const auto dup = series_labels({"x/m.csv", "x/m.csv"});
  EXPECT_EQ(dup[0], "x/m");
  EXPECT_EQ(dup[1], "x/m#2");
}

}  // namespace
}  // namespace acpo
