#include "balance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "stats.hpp"

namespace drmatch {

double smd_numeric(const std::vector<double>& treated,
                   const std::vector<double>& control,
                   std::vector<Warning>* warnings) {
  std::vector<double> a, b;
  for (double x : treated)
    if (!std::isnan(x)) a.push_back(x);
  for (double x : control)
    if (!std::isnan(x)) b.push_back(x);
  if (a.empty() || b.empty()) return std::numeric_limits<double>::quiet_NaN();
  double mt = mean_of(a), mc = mean_of(b);
  double vt = a.size() >= 2 ? variance_of(a) : 0.0;
  double vc = b.size() >= 2 ? variance_of(b) : 0.0;
  double denom = std::sqrt(0.5 * (vt + vc));
  if (denom > 0.0) return (mt - mc) / denom;
  if (mt == mc) return 0.0;
  if (warnings)
    warnings->push_back({Status::DegenerateVariance,
                         "zero variance in both arms with unequal means; SMD "
                         "reported as infinite"});
  return mt > mc ? std::numeric_limits<double>::infinity()
                 : -std::numeric_limits<double>::infinity();
}

double smd_categorical(const std::vector<std::string>& treated,
                       const std::vector<std::string>& control,
                       const std::string& level) {
  size_t nt = 0, kt = 0, nc = 0, kc = 0;
  for (const auto& c : treated)
    if (!c.empty()) {
      ++nt;
      if (c == level) ++kt;
    }
  for (const auto& c : control)
    if (!c.empty()) {
      ++nc;
      if (c == level) ++kc;
    }
  if (nt == 0 || nc == 0) return std::numeric_limits<double>::quiet_NaN();
  double pt = static_cast<double>(kt) / static_cast<double>(nt);
  double pc = static_cast<double>(kc) / static_cast<double>(nc);
  double pbar = static_cast<double>(kt + kc) / static_cast<double>(nt + nc);
  double denom = std::sqrt(pbar * (1.0 - pbar));
  if (denom > 0.0) return (pt - pc) / denom;
  return 0.0;  // level absent or universal in the pooled sample -> pt == pc
}

namespace {

struct ArmRows {
  std::vector<size_t> treated;
  std::vector<size_t> control;  // with multiplicity for the matched sample
};

std::vector<double> gather_numeric(const std::vector<double>& parsed,
                                   const std::vector<size_t>& rows) {
  std::vector<double> out;
  out.reserve(rows.size());
  for (size_t i : rows) out.push_back(parsed[i]);
  return out;
}

std::vector<std::string> gather_cells(const std::vector<std::string>& cells,
                                      const std::vector<size_t>& rows) {
  std::vector<std::string> out;
  out.reserve(rows.size());
  for (size_t i : rows) out.push_back(cells[i]);
  return out;
}

}  // namespace

double BalanceReport::worst_after() const {
  double w = 0.0;
  for (const auto& [name, v] : max_abs_after) {
    if (std::isnan(v)) continue;
    if (std::isinf(v)) return v;
    w = std::max(w, v);
  }
  return w;
}

BalanceReport balance_report(const CohortTable& t, const MatchedSample& ms) {
  BalanceReport rep;

  ArmRows before, after;
  for (size_t i : ms.trimmed_rows)
    (t.treated[i] ? before.treated : before.control).push_back(i);
  for (const auto& set : ms.sets) {
    after.treated.push_back(set.treated_row);
    for (const auto& c : set.controls) after.control.push_back(c.row);
  }
  if (after.treated.empty())
    fail(Status::InvalidSpec, "balance_report on an empty matched sample");

  auto record = [&](const std::string& cov, const std::string& level,
                    double bef, double aft) {
    rep.rows.push_back({cov, level, bef, aft});
    double ab = std::abs(bef), aa = std::abs(aft);
    auto& mb = rep.max_abs_before[cov];
    auto& ma = rep.max_abs_after[cov];
    if (ab > mb) mb = ab;  // NaN never updates
    if (aa > ma) ma = aa;
    if (std::isfinite(aa)) {
      if (aa > rep.threshold_large) ++rep.n_large_after;
      else if (aa > rep.threshold_moderate) ++rep.n_moderate_after;
    } else if (!std::isnan(aft)) {
      ++rep.n_large_after;
    }
  };

  // aligned PoS first, then covariates in schema order
  {
    auto bef = smd_numeric(gather_numeric(t.pos, before.treated),
                           gather_numeric(t.pos, before.control), &rep.warnings);
    auto aft = smd_numeric(gather_numeric(t.pos, after.treated),
                           gather_numeric(t.pos, after.control), &rep.warnings);
    record(t.pos_name, "", bef, aft);
  }
  for (const auto& e : t.schema.entries) {
    if (e.role == Role::OutcomeAdjustOnly) continue;
    const Column* col = t.covariate(e.name);
    if (!col) continue;
    if (e.kind == Kind::Numeric) {
      std::vector<double> parsed = numeric_values(*col);
      double bef = smd_numeric(gather_numeric(parsed, before.treated),
                               gather_numeric(parsed, before.control),
                               &rep.warnings);
      double aft = smd_numeric(gather_numeric(parsed, after.treated),
                               gather_numeric(parsed, after.control),
                               &rep.warnings);
      record(e.name, "", bef, aft);
    } else {
      std::set<std::string> levels;
      for (size_t i : ms.trimmed_rows)
        if (!col->cells[i].empty()) levels.insert(col->cells[i]);
      auto bt = gather_cells(col->cells, before.treated);
      auto bc = gather_cells(col->cells, before.control);
      auto at = gather_cells(col->cells, after.treated);
      auto ac = gather_cells(col->cells, after.control);
      for (const auto& lv : levels)
        record(e.name, lv, smd_categorical(bt, bc, lv),
               smd_categorical(at, ac, lv));
    }
  }
  return rep;
}

}  // namespace drmatch
