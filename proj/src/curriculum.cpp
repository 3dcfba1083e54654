#include "acpo/curriculum.hpp"

#include <limits>

namespace acpo {

const char* to_string(Phase p) {
  switch (p) {
    case Phase::Exploration: return "Exploration";
    case Phase::Transition: return "Transition";
    case Phase::Exploitation: return "Exploitation";
  }
  return "?";
}

std::int64_t reuse_count(std::int64_t t, std::int64_t n, std::int64_t horizon) {
  if (n < 1 || horizon < 1 || t < 0 || t > horizon)
    throw ScheduleError("invalid schedule parameters");
  // n * t must not overflow; schedules here are far below this bound.
  if (t > 0 && n > std::numeric_limits<std::int64_t>::max() / t)
    throw ScheduleError("invalid schedule parameters");
  const std::int64_t numer = n * t;
  const std::int64_t k = (numer + horizon - 1) / horizon;
  return k < 1 ? 1 : k;
}

Phase phase_of(std::int64_t k, std::int64_t n) {
  if (k == n) return Phase::Exploitation;
  if (k == 1) return Phase::Exploration;
  return Phase::Transition;
}

CurriculumState CurriculumState::at(std::int64_t step, std::int64_t n,
                                    std::int64_t horizon) {
  CurriculumState s;
  s.n_max_reuse = n;
  s.horizon = horizon;
  s.step = step;
  s.k_current = reuse_count(step, n, horizon);
  s.phase = phase_of(s.k_current, n);
  return s;
}

}  // namespace acpo
