#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "acpo/objective.hpp"

namespace acpo {

// Outcome of one oracle suite.
struct OracleReport {
  std::string name;
  bool passed = false;
  std::size_t cases = 0;
  double worst = 0.0;  // worst observed error (suite-specific meaning)
  std::string detail;
  double seconds = 0.0;
};

// normalize_advantage against a 256-bit MPFR evaluation of
// (1 + erf(a / (sqrt(2) sigma))) / 2 on `n` random inputs; absolute
// tolerance `tol`. A handful of sub-floor sigma cases are checked on top.
OracleReport erf_oracle_check(std::size_t n = 1000, std::uint64_t seed = 20240917,
                              double tol = 1e-12);

// reuse_count against the smallest integer k with k * T >= N * t (then
// max(1, k)), for every 0 <= t <= T and 1 <= N, T <= max_param.
OracleReport reuse_count_oracle_check(std::int64_t max_param = 50);

// gate_batch against a direct count of above-threshold rewards on every
// binary reward pattern of a group of size g, for every n_max in [1, g].
OracleReport gate_oracle_check(std::size_t g = 8);

struct GradCheckCase {
  std::string name;
  ClipConfig clip;
};

// GRPO (beta 0 and 0.1), FixedClip, ACPO (delta 0 and 0.05).
std::vector<GradCheckCase> gradient_check_cases();

// End-to-end check of d loss / d weights (objective gradient chained through
// the policy) against central differences with step h, on `instances`
// random small problems (<= 4 responses, <= 6 tokens, 32 weights). Problems
// with any ratio within `kink_margin` of a clip boundary are redrawn. The
// error measure is ||fd - analytic||_2 / max(||fd||_2, ||analytic||_2).
OracleReport gradient_check(const GradCheckCase& c, std::size_t instances = 200,
                            std::uint64_t seed = 7, double h = 1e-6, double tol = 1e-5,
                            double kink_margin = 1e-4);

// Every suite above with default arguments; one line per suite on `log`
// when given.
std::vector<OracleReport> run_selftest(std::ostream* log = nullptr);

std::string format_report(const OracleReport& r);

}  // namespace acpo
