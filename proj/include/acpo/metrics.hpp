#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace acpo {

// One parsed row of a metrics CSV (see kMetricsHeader in trainer.hpp).
struct MetricsRow {
  std::int64_t iteration = 0;
  std::int64_t step = 0;
  std::int64_t k = 0;
  std::string phase;
  std::int64_t n_valid = 0;
  std::int64_t n_zero = 0;
  std::int64_t n_saturated = 0;
  double mean_reward = 0.0;
  double mean_reward_valid = 0.0;
  double loss = 0.0;
  double clip_fraction = 0.0;
  double mean_ratio = 0.0;
  double grad_norm = 0.0;
  std::int64_t ratio_overflow = 0;
  double wall_ms = 0.0;
};

class MetricsFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Throws MetricsFormatError naming the file and the 1-based line.
std::vector<MetricsRow> read_metrics_csv(const std::filesystem::path& path);

inline constexpr double kDefaultFinalWindow = 0.25;

// Number of trailing rows in the final window: max(1, floor(n * fraction)).
std::size_t final_window_size(std::size_t n_rows, double fraction);

struct WindowMeans {
  double mean_reward = 0.0;
  double clip_fraction = 0.0;
};

// Means over the final window; zeros for an empty table.
WindowMeans final_window_means(const std::vector<MetricsRow>& rows,
                               double fraction = kDefaultFinalWindow);

}  // namespace acpo
