#include "matcher.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "stats.hpp"

namespace drmatch {

static const double kNaN = std::numeric_limits<double>::quiet_NaN();

GowerContext GowerContext::build(const CohortTable& t,
                                 const std::vector<size_t>& trimmed_rows) {
  GowerContext ctx;
  for (const auto& e : t.schema.entries) {
    if (e.role != Role::Matching) continue;
    const Column* col = t.covariate(e.name);
    if (!col) continue;
    Var v;
    v.name = e.name;
    if (e.kind == Kind::Numeric) {
      v.numeric = true;
      v.values = numeric_values(*col);
      double lo = std::numeric_limits<double>::infinity();
      double hi = -lo;
      for (size_t i : trimmed_rows) {
        double x = v.values[i];
        if (std::isnan(x)) continue;
        lo = std::min(lo, x);
        hi = std::max(hi, x);
      }
      v.range = hi >= lo ? hi - lo : 0.0;
    } else {
      v.cells = &col->cells;
    }
    ctx.vars_.push_back(std::move(v));
  }
  return ctx;
}

double GowerContext::distance(size_t a, size_t b) const {
  double sum = 0.0;
  size_t k = 0;
  for (const auto& v : vars_) {
    if (v.numeric) {
      double xa = v.values[a], xb = v.values[b];
      if (std::isnan(xa) || std::isnan(xb)) continue;
      sum += v.range > 0.0 ? std::abs(xa - xb) / v.range : 0.0;
      ++k;
    } else {
      const std::string& ca = (*v.cells)[a];
      const std::string& cb = (*v.cells)[b];
      if (ca.empty() || cb.empty()) continue;
      sum += ca == cb ? 0.0 : 1.0;
      ++k;
    }
  }
  if (k == 0)
    fail(Status::NoComparableCovariates,
         "no comparable covariates between rows " + std::to_string(a) +
             " and " + std::to_string(b));
  return sum / static_cast<double>(k);
}

double compute_caliper(const std::vector<double>& logits, double multiplier,
                       std::vector<Warning>* warnings) {
  if (multiplier < 0.0)
    fail(Status::InvalidSpec, "caliper multiplier must be >= 0");
  double sd = logits.size() >= 2 ? sd_of(logits) : 0.0;
  double scale = 0.0;
  for (double l : logits) scale = std::max(scale, std::abs(l));
  // identical logits leave rounding residue in sd; snap that to zero
  if (!(sd > 1e-12 * std::max(1.0, scale))) {
    if (warnings)
      warnings->push_back({Status::DegenerateLogits,
                           "logit spread is zero; caliper collapses to 0 and "
                           "only exact score ties can match"});
    return 0.0;
  }
  return multiplier * sd;
}

double composite_distance(double gower, double pos_scaled_a, double pos_scaled_b,
                          double w) {
  if (w < 0.0 || w > 1.0) fail(Status::InvalidSpec, "w must lie in [0,1]");
  return (1.0 - w) * gower + w * std::abs(pos_scaled_a - pos_scaled_b);
}

MatchedSample match(const CohortTable& t, const PropensityFit& fit,
                    const MatchSpec& spec) {
  if (spec.m < 1) fail(Status::InvalidSpec, "m must be >= 1");
  if (spec.w < 0.0 || spec.w > 1.0) fail(Status::InvalidSpec, "w must lie in [0,1]");

  MatchedSample out;
  out.spec = spec;
  out.trimmed_rows = fit.trimmed_rows();
  if (out.trimmed_rows.empty())
    fail(Status::EmptySupport, "no rows survive the common-support trim");

  out.score_by_row.assign(t.n(), kNaN);
  out.logit_by_row.assign(t.n(), kNaN);
  out.pos_scaled_by_row.assign(t.n(), kNaN);
  for (size_t i = 0; i < fit.rows.size(); ++i) {
    if (!fit.retained.empty() && !fit.retained[i]) continue;
    out.score_by_row[fit.rows[i]] = fit.scores[i];
    out.logit_by_row[fit.rows[i]] = fit.logits[i];
  }

  // PoS rescaled to [0,1] on the trimmed sample; a flat PoS column carries
  // no signal and pins everyone at 0.5
  double pos_lo = std::numeric_limits<double>::infinity();
  double pos_hi = -pos_lo;
  for (size_t i : out.trimmed_rows) {
    double p = t.pos[i];
    if (std::isnan(p)) {
      if (spec.w > 0.0)
        fail(Status::InvalidSpec,
             "row id " + t.ids[i] + " has no aligned PoS but w > 0");
      continue;
    }
    pos_lo = std::min(pos_lo, p);
    pos_hi = std::max(pos_hi, p);
  }
  if (!(pos_hi > pos_lo)) {
    out.pos_min = std::isfinite(pos_lo) ? pos_lo : 0.0;
    out.pos_max = out.pos_min;
    if (spec.w > 0.0)
      out.warnings.push_back({Status::Ok,
                              "aligned PoS is constant on the trimmed sample; "
                              "rescaled PoS pinned at 0.5"});
    for (size_t i : out.trimmed_rows) out.pos_scaled_by_row[i] = 0.5;
  } else {
    out.pos_min = pos_lo;
    out.pos_max = pos_hi;
    for (size_t i : out.trimmed_rows) {
      double p = t.pos[i];
      out.pos_scaled_by_row[i] = std::isnan(p) ? 0.5 : (p - pos_lo) / (pos_hi - pos_lo);
    }
  }

  GowerContext gower = GowerContext::build(t, out.trimmed_rows);

  // blocks in key order; only blocks with both arms present are matchable
  std::map<std::string, std::pair<std::vector<size_t>, std::vector<size_t>>> blocks;
  for (size_t i : out.trimmed_rows) {
    auto& [tr, ct] = blocks[t.block_key(i)];
    (t.treated[i] ? tr : ct).push_back(i);
  }

  double global_caliper = 0.0;
  if (!spec.per_block_caliper) {
    std::vector<double> logits;
    logits.reserve(out.trimmed_rows.size());
    for (size_t i : out.trimmed_rows) logits.push_back(out.logit_by_row[i]);
    global_caliper = compute_caliper(logits, spec.caliper_multiplier, &out.warnings);
  }
  out.caliper_width = global_caliper;

  auto id_order = [&](size_t a, size_t b) {
    if (t.ids[a] != t.ids[b]) return t.ids[a] < t.ids[b];
    return t.years[a] < t.years[b];
  };

  std::set<size_t> used;  // without-replacement bookkeeping
  for (auto& [key, arms] : blocks) {
    auto& [treated_rows, control_rows] = arms;
    if (treated_rows.empty()) continue;
    if (control_rows.empty()) {
      out.n_treated_unmatched += treated_rows.size();
      out.unmatched_by_block[key] += treated_rows.size();
      continue;
    }

    double caliper = global_caliper;
    if (spec.per_block_caliper) {
      std::vector<double> logits;
      for (size_t i : treated_rows) logits.push_back(out.logit_by_row[i]);
      for (size_t i : control_rows) logits.push_back(out.logit_by_row[i]);
      caliper = compute_caliper(logits, spec.caliper_multiplier, &out.warnings);
      out.block_calipers[key] = caliper;
    }

    std::sort(treated_rows.begin(), treated_rows.end(), id_order);
    std::sort(control_rows.begin(), control_rows.end(), id_order);

    for (size_t ti : treated_rows) {
      std::vector<MatchedControl> cands;
      for (size_t ci : control_rows) {
        if (!spec.with_replacement && used.count(ci)) continue;
        double gap = std::abs(out.logit_by_row[ti] - out.logit_by_row[ci]);
        if (gap > caliper) continue;
        double g = gower.distance(ti, ci);
        double d = composite_distance(g, out.pos_scaled_by_row[ti],
                                      out.pos_scaled_by_row[ci], spec.w);
        cands.push_back({ci, d, gap});
      }
      if (cands.empty()) {
        ++out.n_treated_unmatched;
        out.unmatched_by_block[key] += 1;
        continue;
      }
      std::sort(cands.begin(), cands.end(),
                [&](const MatchedControl& a, const MatchedControl& b) {
                  if (a.distance != b.distance) return a.distance < b.distance;
                  if (a.logit_gap != b.logit_gap) return a.logit_gap < b.logit_gap;
                  return id_order(a.row, b.row);
                });
      MatchedSet set;
      set.treated_row = ti;
      set.block = key;
      size_t take = std::min(cands.size(), static_cast<size_t>(spec.m));
      set.controls.assign(cands.begin(), cands.begin() + take);
      if (!spec.with_replacement)
        for (const auto& c : set.controls) used.insert(c.row);
      out.sets.push_back(std::move(set));
    }
  }

  if (out.n_treated_unmatched > 0)
    out.warnings.push_back(
        {Status::Ok, std::to_string(out.n_treated_unmatched) +
                         " treated rows had no eligible control and were "
                         "dropped"});
  return out;
}

}  // namespace drmatch
