#include "acpo/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "acpo/trainer.hpp"

namespace acpo {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::int64_t to_int(const std::string& s) {
  std::int64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw std::invalid_argument("bad integer '" + s + "'");
  return v;
}

double to_real(const std::string& s) {
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw std::invalid_argument("bad number '" + s + "'");
  return v;
}

}  // namespace

std::vector<MetricsRow> read_metrics_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MetricsFormatError(path.string() + ": cannot open");
  std::string line;
  if (!std::getline(in, line)) throw MetricsFormatError(path.string() + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kMetricsHeader)
    throw MetricsFormatError(path.string() + ": line 1: unexpected header");

  std::vector<MetricsRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split_csv(line);
    auto fail = [&](const std::string& why) {
      return MetricsFormatError(path.string() + ": line " + std::to_string(line_no) + ": " + why);
    };
    if (f.size() != 15) throw fail("expected 15 fields, got " + std::to_string(f.size()));
    try {
      MetricsRow r;
      r.iteration = to_int(f[0]);
      r.step = to_int(f[1]);
      r.k = to_int(f[2]);
      r.phase = f[3];
      r.n_valid = to_int(f[4]);
      r.n_zero = to_int(f[5]);
      r.n_saturated = to_int(f[6]);
      r.mean_reward = to_real(f[7]);
      r.mean_reward_valid = to_real(f[8]);
      r.loss = to_real(f[9]);
      r.clip_fraction = to_real(f[10]);
      r.mean_ratio = to_real(f[11]);
      r.grad_norm = to_real(f[12]);
      r.ratio_overflow = to_int(f[13]);
      r.wall_ms = to_real(f[14]);
      rows.push_back(std::move(r));
    } catch (const std::exception& e) {
      throw fail(e.what());
    }
  }
  return rows;
}

std::size_t final_window_size(std::size_t n_rows, double fraction) {
  if (n_rows == 0) return 0;
  const auto w = static_cast<std::size_t>(std::floor(static_cast<double>(n_rows) * fraction));
  return std::clamp<std::size_t>(w, 1, n_rows);
}

WindowMeans final_window_means(const std::vector<MetricsRow>& rows, double fraction) {
  WindowMeans out;
  const std::size_t w = final_window_size(rows.size(), fraction);
  if (w == 0) return out;
  for (std::size_t i = rows.size() - w; i < rows.size(); ++i) {
    out.mean_reward += rows[i].mean_reward;
    out.clip_fraction += rows[i].clip_fraction;
  }
  out.mean_reward /= static_cast<double>(w);
  out.clip_fraction /= static_cast<double>(w);
  return out;
}

}  // namespace acpo
