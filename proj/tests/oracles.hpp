#pragma once

// Independent reference implementations the fast code is checked against:
// a grid-search logistic MLE, a per-treated exhaustive matching search and
// an exact signed-rank tail enumeration. Deliberately brute force.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "matcher.hpp"
#include "propensity.hpp"
#include "table.hpp"

namespace drmatch::oracles {

// mean negative log-likelihood of a logistic model, evaluated directly
inline double logistic_nll(const std::vector<std::vector<double>>& x,
                           const std::vector<double>& y,
                           const std::vector<double>& beta) {
  double nll = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    double eta = beta[0];
    for (size_t j = 0; j < x[i].size(); ++j) eta += beta[j + 1] * x[i][j];
    // log(1 + e^eta) - y*eta, stabilized
    double softplus = eta > 0.0 ? eta + std::log1p(std::exp(-eta))
                                : std::log1p(std::exp(eta));
    nll += softplus - y[i] * eta;
  }
  return nll;
}

// Coordinate grid search refined around the best point. Covers up to 3
// parameters (intercept + <= 2 covariates); the optimum must lie within
// +-span of 0 for the first sweep to bracket it.
inline std::vector<double> grid_logistic_mle(
    const std::vector<std::vector<double>>& x, const std::vector<double>& y,
    double span = 8.0, int refinements = 7) {
  const size_t p = x.empty() ? 1 : x[0].size() + 1;
  std::vector<double> center(p, 0.0);
  double step = span / 8.0;
  std::vector<double> best = center;
  for (int r = 0; r < refinements; ++r) {
    // 17 points per axis around the current center
    std::vector<std::vector<double>> axes(p);
    for (size_t j = 0; j < p; ++j)
      for (int k = -8; k <= 8; ++k)
        axes[j].push_back(center[j] + step * static_cast<double>(k));
    double best_nll = std::numeric_limits<double>::infinity();
    std::vector<size_t> idx(p, 0);
    std::vector<double> beta(p);
    while (true) {
      for (size_t j = 0; j < p; ++j) beta[j] = axes[j][idx[j]];
      double nll = logistic_nll(x, y, beta);
      if (nll < best_nll) {
        best_nll = nll;
        best = beta;
      }
      size_t j = 0;
      for (; j < p; ++j) {
        if (++idx[j] < axes[j].size()) break;
        idx[j] = 0;
      }
      if (j == p) break;
    }
    center = best;
    step /= 4.0;
  }
  return best;
}

// score equations sum_i (y_i - p_i) x_ij evaluated at beta
inline std::vector<double> logistic_score(const std::vector<std::vector<double>>& x,
                                          const std::vector<double>& y,
                                          const std::vector<double>& beta) {
  std::vector<double> score(beta.size(), 0.0);
  for (size_t i = 0; i < x.size(); ++i) {
    double eta = beta[0];
    for (size_t j = 0; j < x[i].size(); ++j) eta += beta[j + 1] * x[i][j];
    double resid = y[i] - 1.0 / (1.0 + std::exp(-eta));
    score[0] += resid;
    for (size_t j = 0; j < x[i].size(); ++j) score[j + 1] += resid * x[i][j];
  }
  return score;
}

// ---------------------------------------------------------------------
// Exhaustive per-treated matching search under the production rules:
// same block, |logit gap| <= caliper, composite distance ordered by
// (distance, |logit gap|, control id), top min(m, candidates).

struct OracleMatch {
  size_t treated_row;
  std::vector<size_t> control_rows;  // in selection order
};

inline std::vector<OracleMatch> exhaustive_match(const CohortTable& t,
                                                 const PropensityFit& fit,
                                                 const MatchSpec& spec) {
  std::vector<size_t> rows = fit.trimmed_rows();
  std::vector<double> logit(t.n(), std::numeric_limits<double>::quiet_NaN());
  for (size_t k = 0; k < fit.rows.size(); ++k)
    if (fit.retained[k]) logit[fit.rows[k]] = fit.logits[k];

  // caliper: multiplier x sample sd of the trimmed logits
  double mean = 0.0;
  for (size_t r : rows) mean += logit[r];
  mean /= static_cast<double>(rows.size());
  double ss = 0.0;
  for (size_t r : rows) ss += (logit[r] - mean) * (logit[r] - mean);
  double sd = rows.size() > 1
                  ? std::sqrt(ss / static_cast<double>(rows.size() - 1))
                  : 0.0;
  double caliper = spec.caliper_multiplier * sd;

  // PoS rescale constants over the trimmed sample
  double lo = t.pos[rows[0]], hi = t.pos[rows[0]];
  for (size_t r : rows) {
    lo = std::min(lo, t.pos[r]);
    hi = std::max(hi, t.pos[r]);
  }
  auto pos_scaled = [&](size_t r) {
    return hi > lo ? (t.pos[r] - lo) / (hi - lo) : 0.5;
  };

  // Gower ranges over the trimmed sample
  struct Var {
    bool numeric;
    const Column* col;
    double range;
    std::vector<double> parsed;
  };
  std::vector<Var> vars;
  for (const auto& e : t.schema.entries) {
    if (e.role != Role::Matching) continue;
    const Column* c = t.covariate(e.name);
    Var v{e.kind == Kind::Numeric, c, 0.0, {}};
    if (v.numeric) {
      v.parsed.assign(t.n(), std::numeric_limits<double>::quiet_NaN());
      for (size_t i = 0; i < t.n(); ++i)
        if (!c->cells[i].empty()) v.parsed[i] = std::stod(c->cells[i]);
      bool first = true;
      double vlo = 0.0, vhi = 0.0;
      for (size_t r : rows) {
        if (std::isnan(v.parsed[r])) continue;
        if (first) {
          vlo = vhi = v.parsed[r];
          first = false;
        } else {
          vlo = std::min(vlo, v.parsed[r]);
          vhi = std::max(vhi, v.parsed[r]);
        }
      }
      v.range = vhi - vlo;
    }
    vars.push_back(std::move(v));
  }
  auto gower = [&](size_t a, size_t b) {
    double sum = 0.0;
    int used = 0;
    for (const auto& v : vars) {
      if (v.numeric) {
        if (std::isnan(v.parsed[a]) || std::isnan(v.parsed[b])) continue;
        sum += v.range > 0.0 ? std::abs(v.parsed[a] - v.parsed[b]) / v.range : 0.0;
      } else {
        if (v.col->cells[a].empty() || v.col->cells[b].empty()) continue;
        sum += v.col->cells[a] == v.col->cells[b] ? 0.0 : 1.0;
      }
      ++used;
    }
    return used > 0 ? sum / used : std::numeric_limits<double>::quiet_NaN();
  };

  std::map<std::string, std::pair<std::vector<size_t>, std::vector<size_t>>> blocks;
  for (size_t r : rows)
    (t.treated[r] ? blocks[t.block_key(r)].first
                  : blocks[t.block_key(r)].second)
        .push_back(r);

  std::vector<OracleMatch> out;
  for (auto& [key, tc] : blocks) {
    auto by_id = [&](size_t a, size_t b) {
      return std::tie(t.ids[a], t.years[a]) < std::tie(t.ids[b], t.years[b]);
    };
    std::sort(tc.first.begin(), tc.first.end(), by_id);
    for (size_t tr : tc.first) {
      struct Cand {
        double dist, gap;
        std::string id;
        int year;
        size_t row;
      };
      std::vector<Cand> cands;
      for (size_t cr : tc.second) {
        double gap = std::abs(logit[tr] - logit[cr]);
        if (gap > caliper) continue;
        double g = gower(tr, cr);
        double d = (1.0 - spec.w) * g +
                   spec.w * std::abs(pos_scaled(tr) - pos_scaled(cr));
        cands.push_back({d, gap, t.ids[cr], t.years[cr], cr});
      }
      if (cands.empty()) continue;
      std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
        return std::tie(a.dist, a.gap, a.id, a.year) <
               std::tie(b.dist, b.gap, b.id, b.year);
      });
      OracleMatch m{tr, {}};
      for (size_t k = 0; k < cands.size() && k < static_cast<size_t>(spec.m); ++k)
        m.control_rows.push_back(cands[k].row);
      out.push_back(std::move(m));
    }
  }
  return out;
}

// ---------------------------------------------------------------------
// Exact signed-rank upper tail: enumerate all 2^n sign assignments with
// P(+) = gamma/(1+gamma) and sum the probability of T >= t_obs.

inline double exact_signed_rank_tail(const std::vector<double>& diffs,
                                     double gamma) {
  std::vector<double> mag;
  std::vector<int> sign;
  for (double d : diffs) {
    if (d == 0.0 || std::isnan(d)) continue;
    mag.push_back(std::abs(d));
    sign.push_back(d > 0.0 ? 1 : -1);
  }
  const size_t n = mag.size();
  // average ranks of tied magnitudes
  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return mag[a] < mag[b]; });
  std::vector<double> rank(n, 0.0);
  for (size_t i = 0; i < n;) {
    size_t j = i;
    while (j < n && mag[order[j]] == mag[order[i]]) ++j;
    double avg = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (size_t k = i; k < j; ++k) rank[order[k]] = avg;
    i = j;
  }
  double t_obs = 0.0;
  for (size_t i = 0; i < n; ++i)
    if (sign[i] > 0) t_obs += rank[i];

  const double p_plus = gamma / (1.0 + gamma);
  double tail = 0.0;
  for (std::uint64_t mask = 0; mask < (1ull << n); ++mask) {
    double t = 0.0, prob = 1.0;
    for (size_t i = 0; i < n; ++i) {
      if (mask & (1ull << i)) {
        t += rank[i];
        prob *= p_plus;
      } else {
        prob *= 1.0 - p_plus;
      }
    }
    if (t >= t_obs) tail += prob;
  }
  return tail;
}

}  // namespace drmatch::oracles
