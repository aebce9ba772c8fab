#pragma once

#include <map>
#include <string>
#include <vector>

#include "estimator.hpp"
#include "matcher.hpp"
#include "table.hpp"

namespace drmatch {

enum class Direction { Greater, Less };

const char* direction_name(Direction d);

// treated outcome minus the mean of its controls, one value per set with
// complete outcomes
std::vector<double> paired_differences(const CohortTable& t,
                                       const MatchedSample& ms,
                                       const std::string& outcome);

struct RosenbaumBounds {
  double p_upper = 1.0;  // worst case for the stated direction
  double p_lower = 0.0;  // best case
  size_t n_informative = 0;
  bool exact = false;
};

// Signed-rank bound at hidden-bias level gamma >= 1. Zero differences are
// uninformative and dropped; ties in |d| share average ranks. Fewer than
// `exact_cutoff` informative pairs switches to exact enumeration of the
// 2^n sign assignments, above it a normal approximation with a 0.5
// continuity correction is used.
RosenbaumBounds rosenbaum_bounds(const std::vector<double>& diffs, double gamma,
                                 Direction dir, size_t exact_cutoff = 8);

// both paths exposed for direct comparison
RosenbaumBounds rosenbaum_normal(const std::vector<double>& diffs, double gamma,
                                 Direction dir);
RosenbaumBounds rosenbaum_exact(const std::vector<double>& diffs, double gamma,
                                Direction dir);

struct SensitivityRow {
  std::string outcome;
  double gamma = 1.0;
  double p_upper = 1.0;
  double p_lower = 0.0;
  size_t n_informative = 0;
  Direction direction = Direction::Greater;
};

struct SensitivityTable {
  std::vector<SensitivityRow> rows;
  // largest grid gamma whose worst-case p stays under alpha; NaN when the
  // effect is fragile at every grid value
  std::map<std::string, double> max_gamma_significant;
  std::vector<Warning> warnings;
};

// Bounds over the gamma grid for every outcome whose bootstrap p-value
// clears alpha; direction follows the sign of the point estimate.
SensitivityTable sensitivity_for_significant(
    const std::vector<DrResult>& results, const CohortTable& t,
    const MatchedSample& ms, const std::vector<double>& gamma_grid,
    double alpha = 0.05);

}  // namespace drmatch
