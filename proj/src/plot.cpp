#include "acpo/plot.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace acpo {

namespace {

constexpr double kWidth = 800.0;
constexpr double kHeight = 480.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 190.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 50.0;

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
  out << text;
}

}  // namespace

std::vector<std::string> series_labels(const std::vector<std::filesystem::path>& paths) {
  auto suffix = [](const std::filesystem::path& p, std::size_t depth) {
    std::filesystem::path cur = p.parent_path();
    std::string label = p.stem().string();
    for (std::size_t d = 1; d < depth && !cur.filename().empty(); ++d) {
      label = cur.filename().string() + "/" + label;
      cur = cur.parent_path();
    }
    return label;
  };
  std::size_t max_depth = 2;
  for (const auto& p : paths)
    max_depth = std::max<std::size_t>(max_depth, static_cast<std::size_t>(std::distance(p.begin(), p.end())));
  std::vector<std::string> labels;
  for (std::size_t depth = 2; depth <= max_depth; ++depth) {
    labels.clear();
    std::set<std::string> seen;
    bool unique = true;
    for (const auto& p : paths) {
      labels.push_back(suffix(p, depth));
      unique = seen.insert(labels.back()).second && unique;
    }
    if (unique) return labels;
  }
  // identical paths given twice
  std::map<std::string, int> count;
  for (auto& l : labels)
    if (const int n = count[l]++; n > 0) l += "#" + std::to_string(n + 1);
  return labels;
}

std::string svg_line_chart(const std::string& title, const std::string& y_label,
                           const std::vector<std::string>& labels,
                           const std::vector<std::vector<double>>& xs,
                           const std::vector<std::vector<double>>& ys) {
  double x_lo = 0.0, x_hi = 1.0, y_lo = 0.0, y_hi = 1.0;
  bool any = false;
  for (std::size_t s = 0; s < xs.size(); ++s) {
    for (std::size_t i = 0; i < xs[s].size(); ++i) {
      if (!any) {
        x_lo = x_hi = xs[s][i];
        any = true;
      }
      x_lo = std::min(x_lo, xs[s][i]);
      x_hi = std::max(x_hi, xs[s][i]);
      y_lo = std::min(y_lo, ys[s][i]);
      y_hi = std::max(y_hi, ys[s][i]);
    }
  }
  if (!(x_hi - x_lo > 0.0)) x_hi = x_lo + 1.0;
  if (!(y_hi - y_lo > 0.0)) y_hi = y_lo + 1.0;

  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - x_lo) / (x_hi - x_lo) * pw; };
  auto py = [&](double y) { return kTop + (1.0 - (y - y_lo) / (y_hi - y_lo)) * ph; };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
      << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << num(kLeft + pw / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
      << xml_escape(title) << "</text>\n";
  svg << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double fy = y_lo + (y_hi - y_lo) * i / 5.0;
    const double fx = x_lo + (x_hi - x_lo) * i / 5.0;
    svg << "<line x1=\"" << kLeft << "\" x2=\"" << num(kLeft + pw) << "\" y1=\"" << num(py(fy))
        << "\" y2=\"" << num(py(fy)) << "\" stroke=\"#dddddd\"/>\n";
    svg << "<text x=\"" << num(kLeft - 6) << "\" y=\"" << num(py(fy) + 4)
        << "\" text-anchor=\"end\">" << tick(fy) << "</text>\n";
    svg << "<text x=\"" << num(px(fx)) << "\" y=\"" << num(kTop + ph + 18)
        << "\" text-anchor=\"middle\">" << tick(fx) << "</text>\n";
  }
  svg << "<text x=\"" << num(kLeft + pw / 2) << "\" y=\"" << num(kHeight - 10)
      << "\" text-anchor=\"middle\">step</text>\n";
  svg << "<text transform=\"translate(18," << num(kTop + ph / 2)
      << ") rotate(-90)\" text-anchor=\"middle\">" << xml_escape(y_label) << "</text>\n";

  for (std::size_t s = 0; s < xs.size(); ++s) {
    const char* color = kPalette[s % std::size(kPalette)];
    svg << "<polyline class=\"series\" data-label=\"" << xml_escape(labels[s])
        << "\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.2\" points=\"";
    for (std::size_t i = 0; i < xs[s].size(); ++i)
      svg << (i ? " " : "") << num(px(xs[s][i])) << ',' << num(py(ys[s][i]));
    svg << "\"/>\n";
    const double ly = kTop + 10 + 18.0 * static_cast<double>(s);
    svg << "<line x1=\"" << num(kLeft + pw + 12) << "\" x2=\"" << num(kLeft + pw + 32)
        << "\" y1=\"" << num(ly) << "\" y2=\"" << num(ly) << "\" stroke=\"" << color
        << "\" stroke-width=\"2\"/>\n";
    svg << "<text x=\"" << num(kLeft + pw + 38) << "\" y=\"" << num(ly + 4) << "\">"
        << xml_escape(labels[s]) << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

PlotResult render_plots(const std::vector<std::filesystem::path>& metrics_paths,
                        const std::filesystem::path& out_dir, double final_window) {
  if (metrics_paths.empty()) throw std::invalid_argument("no metrics files to plot");
  PlotResult result;
  const auto labels = series_labels(metrics_paths);
  for (std::size_t i = 0; i < metrics_paths.size(); ++i) {
    const auto rows = read_metrics_csv(metrics_paths[i]);
    PlotSeries s;
    s.label = labels[i];
    s.source = metrics_paths[i];
    for (std::size_t r = 0; r < rows.size(); ++r) {
      s.steps.push_back(static_cast<double>(r + 1));
      s.reward.push_back(rows[r].mean_reward);
      s.clip_fraction.push_back(rows[r].clip_fraction);
    }
    s.final_window = final_window_means(rows, final_window);
    result.series.push_back(std::move(s));
  }

  std::filesystem::create_directories(out_dir);
  std::vector<std::vector<double>> xs, rewards, clips;
  for (const auto& s : result.series) {
    xs.push_back(s.steps);
    rewards.push_back(s.reward);
    clips.push_back(s.clip_fraction);
  }
  result.reward_image = out_dir / "reward.svg";
  result.clip_image = out_dir / "clip_fraction.svg";
  result.sidecar = out_dir / "plots.json";
  write_text(result.reward_image, svg_line_chart("Mean reward", "mean_reward", labels, xs, rewards));
  write_text(result.clip_image, svg_line_chart("Clip fraction", "clip_fraction", labels, xs, clips));

  nlohmann::json side;
  side["final_window"] = final_window;
  side["images"] = {result.reward_image.filename().string(), result.clip_image.filename().string()};
  side["series"] = nlohmann::json::array();
  for (const auto& s : result.series) {
    side["series"].push_back({{"label", s.label},
                              {"source", s.source.string()},
                              {"points", s.steps.size()},
                              {"final_mean_reward", s.final_window.mean_reward},
                              {"final_clip_fraction", s.final_window.clip_fraction}});
  }
  write_text(result.sidecar, side.dump(2) + "\n");
  return result;
}

}  // namespace acpo
