#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "acpo/metrics.hpp"

namespace acpo {

struct PlotSeries {
  std::string label;
  std::filesystem::path source;
  std::vector<double> steps;
  std::vector<double> reward;
  std::vector<double> clip_fraction;
  WindowMeans final_window;
};

struct PlotResult {
  std::filesystem::path reward_image;
  std::filesystem::path clip_image;
  std::filesystem::path sidecar;
  std::vector<PlotSeries> series;
};

// Series labels: the shortest trailing path (at least "<parent>/<stem>")
// that tells the inputs apart; exact duplicates get a "#n" suffix.
std::vector<std::string> series_labels(const std::vector<std::filesystem::path>& paths);

// Reads every metrics CSV (MetricsFormatError names the bad file and line)
// and writes reward.svg, clip_fraction.svg and plots.json into out_dir.
// Steps are numbered globally across iterations, in row order.
PlotResult render_plots(const std::vector<std::filesystem::path>& metrics_paths,
                        const std::filesystem::path& out_dir,
                        double final_window = kDefaultFinalWindow);

// Standalone SVG line chart; one polyline per series.
std::string svg_line_chart(const std::string& title, const std::string& y_label,
                           const std::vector<std::string>& labels,
                           const std::vector<std::vector<double>>& xs,
                           const std::vector<std::vector<double>>& ys);

}  // namespace acpo
