#pragma once

#include <cstdint>
#include <stdexcept>

namespace acpo {

enum class Phase { Exploration, Transition, Exploitation };

const char* to_string(Phase p);

class ScheduleError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Number of update epochs for step t of a horizon-long schedule:
// max(1, ceil(n * t / horizon)), exact integer arithmetic.
// Throws ScheduleError unless n >= 1, horizon >= 1 and 0 <= t <= horizon.
std::int64_t reuse_count(std::int64_t t, std::int64_t n, std::int64_t horizon);

// Exploitation when k == n (this wins for n == 1), Exploration when k == 1,
// Transition otherwise. Reporting only.
Phase phase_of(std::int64_t k, std::int64_t n);

struct CurriculumState {
  std::int64_t n_max_reuse = 1;
  std::int64_t horizon = 1;
  std::int64_t step = 0;
  std::int64_t k_current = 1;
  Phase phase = Phase::Exploitation;

  static CurriculumState at(std::int64_t step, std::int64_t n, std::int64_t horizon);
};

}  // namespace acpo
