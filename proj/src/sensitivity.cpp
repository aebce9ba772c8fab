#include "sensitivity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "stats.hpp"

namespace drmatch {

const char* direction_name(Direction d) {
  return d == Direction::Greater ? "greater" : "less";
}

std::vector<double> paired_differences(const CohortTable& t,
                                       const MatchedSample& ms,
                                       const std::string& outcome) {
  const NumericColumn* oc = t.outcome(outcome);
  if (!oc) fail(Status::MissingColumn, "outcome '" + outcome + "' not found");
  std::vector<double> diffs;
  for (const auto& set : ms.sets) {
    double y1 = oc->values[set.treated_row];
    if (std::isnan(y1)) continue;
    double sum = 0.0;
    size_t k = 0;
    for (const auto& c : set.controls) {
      double y0 = oc->values[c.row];
      if (std::isnan(y0)) continue;
      sum += y0;
      ++k;
    }
    if (k == 0) continue;
    diffs.push_back(y1 - sum / static_cast<double>(k));
  }
  return diffs;
}

namespace {

struct Prepared {
  std::vector<double> ranks;  // of |d|, informative pairs only
  std::vector<bool> positive;
  double t_obs = 0.0;
  double sum_r = 0.0, sum_r2 = 0.0;
};

// direction Less mirrors to Greater by flipping the signs
Prepared prepare(const std::vector<double>& diffs, double gamma, Direction dir) {
  if (!(gamma >= 1.0))
    fail(Status::InvalidGamma, "gamma must be >= 1");
  std::vector<double> d;
  for (double x : diffs) {
    if (std::isnan(x)) continue;
    if (x != 0.0) d.push_back(dir == Direction::Greater ? x : -x);
  }
  if (d.empty())
    fail(Status::NoInformativePairs,
         "all matched-set differences are zero or missing");
  std::vector<double> absd(d.size());
  for (size_t i = 0; i < d.size(); ++i) absd[i] = std::abs(d[i]);
  Prepared p;
  p.ranks = average_ranks(absd);
  p.positive.resize(d.size());
  for (size_t i = 0; i < d.size(); ++i) {
    p.positive[i] = d[i] > 0.0;
    if (p.positive[i]) p.t_obs += p.ranks[i];
    p.sum_r += p.ranks[i];
    p.sum_r2 += p.ranks[i] * p.ranks[i];
  }
  return p;
}

double normal_tail(const Prepared& p, double sign_prob) {
  double mu = sign_prob * p.sum_r;
  double var = sign_prob * (1.0 - sign_prob) * p.sum_r2;
  double sigma = std::sqrt(var);
  double z = (p.t_obs - mu - 0.5) / sigma;
  return normal_sf(z);
}

// P(T >= t_obs) when each pair is positive independently with prob
// sign_prob, by full enumeration of sign assignments
double exact_tail(const Prepared& p, double sign_prob) {
  size_t n = p.ranks.size();
  double total = 0.0;
  for (std::uint64_t mask = 0; mask < (1ULL << n); ++mask) {
    double t = 0.0;
    double prob = 1.0;
    for (size_t i = 0; i < n; ++i) {
      if (mask & (1ULL << i)) {
        t += p.ranks[i];
        prob *= sign_prob;
      } else {
        prob *= 1.0 - sign_prob;
      }
    }
    if (t >= p.t_obs) total += prob;
  }
  return total;
}

}  // namespace

RosenbaumBounds rosenbaum_normal(const std::vector<double>& diffs, double gamma,
                                 Direction dir) {
  Prepared p = prepare(diffs, gamma, dir);
  RosenbaumBounds b;
  b.n_informative = p.ranks.size();
  b.exact = false;
  b.p_upper = normal_tail(p, gamma / (1.0 + gamma));
  b.p_lower = normal_tail(p, 1.0 / (1.0 + gamma));
  return b;
}

RosenbaumBounds rosenbaum_exact(const std::vector<double>& diffs, double gamma,
                                Direction dir) {
  Prepared p = prepare(diffs, gamma, dir);
  if (p.ranks.size() > 24)
    fail(Status::InvalidSpec,
         "exact enumeration limited to 24 informative pairs");
  RosenbaumBounds b;
  b.n_informative = p.ranks.size();
  b.exact = true;
  b.p_upper = exact_tail(p, gamma / (1.0 + gamma));
  b.p_lower = exact_tail(p, 1.0 / (1.0 + gamma));
  return b;
}

RosenbaumBounds rosenbaum_bounds(const std::vector<double>& diffs, double gamma,
                                 Direction dir, size_t exact_cutoff) {
  size_t informative = 0;
  for (double x : diffs)
    if (!std::isnan(x) && x != 0.0) ++informative;
  if (informative == 0)
    fail(Status::NoInformativePairs,
         "all matched-set differences are zero or missing");
  if (informative < exact_cutoff) return rosenbaum_exact(diffs, gamma, dir);
  return rosenbaum_normal(diffs, gamma, dir);
}

SensitivityTable sensitivity_for_significant(
    const std::vector<DrResult>& results, const CohortTable& t,
    const MatchedSample& ms, const std::vector<double>& gamma_grid,
    double alpha) {
  SensitivityTable table;
  for (const auto& res : results) {
    if (!(res.p_boot < alpha)) continue;
    Direction dir = res.ate < 0.0 ? Direction::Less : Direction::Greater;
    std::vector<double> diffs = paired_differences(t, ms, res.outcome);
    double max_gamma = std::numeric_limits<double>::quiet_NaN();
    bool failed = false;
    for (double gamma : gamma_grid) {
      RosenbaumBounds b;
      try {
        b = rosenbaum_bounds(diffs, gamma, dir);
      } catch (const Error& e) {
        table.warnings.push_back(
            {e.code(), "outcome '" + res.outcome + "': " + e.what()});
        failed = true;
        break;
      }
      table.rows.push_back(
          {res.outcome, gamma, b.p_upper, b.p_lower, b.n_informative, dir});
      if (b.p_upper < alpha && !(gamma <= max_gamma)) max_gamma = gamma;
    }
    if (!failed) table.max_gamma_significant[res.outcome] = max_gamma;
  }
  return table;
}

}  // namespace drmatch
