#include "report.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "csv.hpp"
#include "kde.hpp"
#include "stats.hpp"

namespace drmatch {

json json_num(double x) {
  if (std::isfinite(x)) return x;
  if (std::isnan(x)) return "nan";
  return x > 0 ? "inf" : "-inf";
}

json warnings_json(const std::vector<Warning>& warnings) {
  json arr = json::array();
  for (const auto& w : warnings)
    arr.push_back({{"code", status_name(w.code)}, {"message", w.message}});
  return arr;
}

std::string propensity_json(const CohortTable& t, const PropensityFit& fit) {
  json j;
  json coef = json::object();
  for (size_t i = 0; i < fit.coef_names.size(); ++i)
    coef[fit.coef_names[i]] = json_num(fit.coefficients[i]);
  j["coefficients"] = coef;
  j["iterations"] = fit.iterations;
  j["converged"] = fit.converged;
  j["epsilon"] = fit.epsilon;
  j["support"] = {{"low", json_num(fit.support_low)},
                  {"high", json_num(fit.support_high)}};
  size_t n_t = 0, n_c = 0, r_t = 0, r_c = 0;
  for (size_t i = 0; i < fit.rows.size(); ++i) {
    bool tr = t.treated[fit.rows[i]];
    (tr ? n_t : n_c) += 1;
    if (fit.retained.empty() || fit.retained[i]) (tr ? r_t : r_c) += 1;
  }
  j["counts"] = {{"fit_treated", n_t},
                 {"fit_control", n_c},
                 {"retained_treated", r_t},
                 {"retained_control", r_c},
                 {"trimmed_treated", fit.n_trimmed_treated},
                 {"trimmed_control", fit.n_trimmed_control},
                 {"dropped_missing_pos", fit.n_dropped_missing_pos}};
  j["warnings"] = warnings_json(fit.warnings);
  return j.dump(2) + "\n";
}

std::string scores_csv(const CohortTable& t, const PropensityFit& fit) {
  std::ostringstream out;
  write_csv_row(out, {"student_id", "year", "treated", "block", "score",
                      "logit", "retained"});
  for (size_t i = 0; i < fit.rows.size(); ++i) {
    size_t row = fit.rows[i];
    write_csv_row(out,
                  {t.ids[row], std::to_string(t.years[row]),
                   t.treated[row] ? "1" : "0", t.block_key(row),
                   format_double(fit.scores[i]), format_double(fit.logits[i]),
                   fit.retained.empty() || fit.retained[i] ? "1" : "0"});
  }
  return out.str();
}

std::string matched_pairs_json(const CohortTable& t, const MatchedSample& ms) {
  json j;
  j["caliper_width"] = json_num(ms.caliper_width);
  if (!ms.block_calipers.empty()) {
    json bc = json::object();
    for (const auto& [key, w] : ms.block_calipers) bc[key] = json_num(w);
    j["block_calipers"] = bc;
  }
  j["pos_rescale"] = {{"min", json_num(ms.pos_min)},
                      {"max", json_num(ms.pos_max)}};
  j["m"] = ms.spec.m;
  j["w"] = ms.spec.w;
  j["with_replacement"] = ms.spec.with_replacement;
  j["n_sets"] = ms.sets.size();
  j["n_treated_unmatched"] = ms.n_treated_unmatched;
  json by_block = json::object();
  for (const auto& [key, n] : ms.unmatched_by_block) by_block[key] = n;
  j["unmatched_by_block"] = by_block;
  json sets = json::array();
  for (const auto& set : ms.sets) {
    json s;
    s["block"] = set.block;
    s["treated"] = t.ids[set.treated_row];
    s["year"] = t.years[set.treated_row];
    json controls = json::array();
    for (const auto& c : set.controls)
      controls.push_back({{"id", t.ids[c.row]},
                          {"distance", json_num(c.distance)},
                          {"logit_gap", json_num(c.logit_gap)}});
    s["controls"] = controls;
    sets.push_back(s);
  }
  j["sets"] = sets;
  j["warnings"] = warnings_json(ms.warnings);
  return j.dump(2) + "\n";
}

std::string matched_wide_csv(const CohortTable& t, const MatchedSample& ms) {
  std::ostringstream out;
  std::vector<std::string> unit_cols = {"id", "score", "pos"};
  for (const auto& e : t.schema.entries) unit_cols.push_back(e.name);
  for (const auto& o : t.outcomes) unit_cols.push_back(o.name);

  std::vector<std::string> header = {"block"};
  int m = ms.spec.m;
  for (int slot = 0; slot <= m; ++slot) {
    std::string prefix = slot == 0 ? "t_" : "c" + std::to_string(slot) + "_";
    for (const auto& c : unit_cols) header.push_back(prefix + c);
  }
  header.push_back("distance_1");
  if (m >= 2)
    for (int slot = 2; slot <= m; ++slot)
      header.push_back("distance_" + std::to_string(slot));
  write_csv_row(out, header);

  auto unit_fields = [&](size_t row, std::vector<std::string>& fields) {
    fields.push_back(t.ids[row]);
    fields.push_back(format_double(ms.score_by_row[row]));
    fields.push_back(std::isnan(t.pos[row]) ? "" : format_double(t.pos[row]));
    for (const auto& e : t.schema.entries) {
      const Column* c = t.covariate(e.name);
      fields.push_back(c ? c->cells[row] : "");
    }
    for (const auto& o : t.outcomes)
      fields.push_back(std::isnan(o.values[row])
                           ? ""
                           : format_double(o.values[row]));
  };

  for (const auto& set : ms.sets) {
    std::vector<std::string> fields;
    fields.push_back(set.block);
    unit_fields(set.treated_row, fields);
    for (int slot = 0; slot < m; ++slot) {
      if (slot < static_cast<int>(set.controls.size()))
        unit_fields(set.controls[slot].row, fields);
      else
        for (size_t k = 0; k < unit_cols.size(); ++k) fields.push_back("");
    }
    for (int slot = 0; slot < m; ++slot)
      fields.push_back(slot < static_cast<int>(set.controls.size())
                           ? format_double(set.controls[slot].distance)
                           : "");
    write_csv_row(out, fields);
  }
  return out.str();
}

std::string balance_csv(const BalanceReport& rep) {
  std::ostringstream out;
  write_csv_row(out, {"covariate", "level", "smd_before", "smd_after"});
  for (const auto& row : rep.rows)
    write_csv_row(out, {row.covariate, row.level.empty() ? "-" : row.level,
                        format_double(row.before), format_double(row.after)});
  return out.str();
}

std::string balance_json(const BalanceReport& rep) {
  json j;
  json rows = json::array();
  for (const auto& row : rep.rows)
    rows.push_back({{"covariate", row.covariate},
                    {"level", row.level},
                    {"smd_before", json_num(row.before)},
                    {"smd_after", json_num(row.after)}});
  j["rows"] = rows;
  json mx = json::object();
  for (const auto& [cov, v] : rep.max_abs_after) mx[cov] = json_num(v);
  j["max_abs_after"] = mx;
  json mb = json::object();
  for (const auto& [cov, v] : rep.max_abs_before) mb[cov] = json_num(v);
  j["max_abs_before"] = mb;
  j["thresholds"] = {{"moderate", rep.threshold_moderate},
                     {"large", rep.threshold_large}};
  j["n_moderate_after"] = rep.n_moderate_after;
  j["n_large_after"] = rep.n_large_after;
  j["worst_after"] = json_num(rep.worst_after());
  j["warnings"] = warnings_json(rep.warnings);
  return j.dump(2) + "\n";
}

namespace {

json dr_result_json(const DrResult& r) {
  json j;
  j["outcome"] = r.outcome;
  j["domain"] = r.domain;
  j["ate_dr"] = json_num(r.ate);
  j["ci_low"] = json_num(r.ci_low);
  j["ci_high"] = json_num(r.ci_high);
  j["p_boot"] = json_num(r.p_boot);
  j["delta_post"] = json_num(r.delta_post);
  j["ancova"] = json_num(r.ancova);
  j["family"] = family_name(r.family);
  j["family_disagreement"] = r.family_disagreement;
  j["fallback_used"] = r.fallback_used;
  j["ate_winsorized"] = json_num(r.ate_winsorized);
  j["winsorized_headline"] = r.winsorized_headline;
  j["n_sets_used"] = r.n_sets_used;
  j["n_sets_dropped"] = r.n_sets_dropped;
  j["weights"] = {{"pi", json_num(r.weights.pi)},
                  {"trim", {json_num(r.weights.trim_low),
                            json_num(r.weights.trim_high)}},
                  {"w1_mean", json_num(r.weights.w1_mean)},
                  {"w0_mean", json_num(r.weights.w0_mean)},
                  {"w1_p99", json_num(r.weights.w1_p99)},
                  {"w0_p99", json_num(r.weights.w0_p99)},
                  {"w1_max", json_num(r.weights.w1_max)},
                  {"w0_max", json_num(r.weights.w0_max)}};
  j["warnings"] = warnings_json(r.warnings);
  return j;
}

}  // namespace

std::string dr_results_csv(const std::vector<DrResult>& results) {
  std::ostringstream out;
  write_csv_row(out, {"outcome", "domain", "ate_dr", "ci_low", "ci_high",
                      "p_boot", "delta_post", "ancova", "family",
                      "ate_winsorized", "n_sets_used", "n_sets_dropped",
                      "w1_p99", "w0_p99"});
  for (const auto& r : results)
    write_csv_row(out, {r.outcome, r.domain, format_double(r.ate),
                        format_double(r.ci_low), format_double(r.ci_high),
                        format_double(r.p_boot), format_double(r.delta_post),
                        format_double(r.ancova), family_name(r.family),
                        format_double(r.ate_winsorized),
                        std::to_string(r.n_sets_used),
                        std::to_string(r.n_sets_dropped),
                        format_double(r.weights.w1_p99),
                        format_double(r.weights.w0_p99)});
  return out.str();
}

std::string dr_results_json(const std::vector<DrResult>& results) {
  json arr = json::array();
  for (const auto& r : results) arr.push_back(dr_result_json(r));
  return arr.dump(2) + "\n";
}

std::string sensitivity_csv(const SensitivityTable& table) {
  std::ostringstream out;
  write_csv_row(out, {"outcome", "gamma", "p_upper", "p_lower",
                      "n_informative", "direction"});
  for (const auto& row : table.rows)
    write_csv_row(out, {row.outcome, format_double(row.gamma),
                        format_double(row.p_upper), format_double(row.p_lower),
                        std::to_string(row.n_informative),
                        direction_name(row.direction)});
  return out.str();
}

std::string sensitivity_json(const SensitivityTable& table) {
  json j;
  json rows = json::array();
  for (const auto& row : table.rows)
    rows.push_back({{"outcome", row.outcome},
                    {"gamma", json_num(row.gamma)},
                    {"p_upper", json_num(row.p_upper)},
                    {"p_lower", json_num(row.p_lower)},
                    {"n_informative", row.n_informative},
                    {"direction", direction_name(row.direction)}});
  j["rows"] = rows;
  json mg = json::object();
  for (const auto& [outcome, g] : table.max_gamma_significant)
    mg[outcome] = json_num(g);
  j["max_gamma_significant"] = mg;
  j["warnings"] = warnings_json(table.warnings);
  return j.dump(2) + "\n";
}

std::string results_table_csv(const std::vector<DrResult>& results,
                              const SensitivityTable& sens) {
  std::ostringstream out;
  write_csv_row(out, {"domain", "outcome", "ate_dr", "ci_low", "ci_high",
                      "p_boot", "delta_post", "ancova", "family", "n",
                      "max_gamma_significant"});
  for (const auto& r : results) {
    std::string gamma;
    if (auto it = sens.max_gamma_significant.find(r.outcome);
        it != sens.max_gamma_significant.end() && !std::isnan(it->second))
      gamma = format_double(it->second);
    write_csv_row(out, {r.domain, r.outcome, format_double(r.ate),
                        format_double(r.ci_low), format_double(r.ci_high),
                        format_double(r.p_boot), format_double(r.delta_post),
                        format_double(r.ancova), family_name(r.family),
                        std::to_string(r.n_sets_used), gamma});
  }
  return out.str();
}

std::string results_table_json(const std::vector<DrResult>& results,
                               const SensitivityTable& sens) {
  json arr = json::array();
  for (const auto& r : results) {
    json row;
    row["domain"] = r.domain;
    row["outcome"] = r.outcome;
    row["ate_dr"] = json_num(r.ate);
    row["ci_low"] = json_num(r.ci_low);
    row["ci_high"] = json_num(r.ci_high);
    row["p_boot"] = json_num(r.p_boot);
    row["delta_post"] = json_num(r.delta_post);
    row["ancova"] = json_num(r.ancova);
    row["family"] = family_name(r.family);
    row["n"] = r.n_sets_used;
    auto it = sens.max_gamma_significant.find(r.outcome);
    if (it != sens.max_gamma_significant.end() && !std::isnan(it->second))
      row["max_gamma_significant"] = json_num(it->second);
    else
      row["max_gamma_significant"] = nullptr;
    arr.push_back(row);
  }
  return arr.dump(2) + "\n";
}

std::string density_csv(const CohortTable& t, const MatchedSample& ms,
                        const std::string& variable) {
  // matched arms, controls with multiplicity
  std::vector<size_t> treated_rows, control_rows;
  for (const auto& set : ms.sets) {
    treated_rows.push_back(set.treated_row);
    for (const auto& c : set.controls) control_rows.push_back(c.row);
  }
  if (treated_rows.empty())
    fail(Status::InvalidSpec, "density export on an empty matched sample");

  auto numeric_curve = [&](auto value_fn) {
    std::vector<double> tv, cv;
    for (size_t i : treated_rows) {
      double v = value_fn(i);
      if (!std::isnan(v)) tv.push_back(v);
    }
    for (size_t i : control_rows) {
      double v = value_fn(i);
      if (!std::isnan(v)) cv.push_back(v);
    }
    KdeCurve curve = kde_density(tv, cv);
    std::ostringstream out;
    write_csv_row(out, {"value", "density_treated", "density_control"});
    for (size_t g = 0; g < curve.grid.size(); ++g)
      write_csv_row(out, {format_double(curve.grid[g]),
                          format_double(curve.treated[g]),
                          format_double(curve.control[g])});
    return out.str();
  };

  if (variable == "propensity_score")
    return numeric_curve([&](size_t i) { return ms.score_by_row[i]; });
  if (variable == t.pos_name)
    return numeric_curve([&](size_t i) { return t.pos[i]; });

  const SchemaEntry* entry = t.schema.find(variable);
  const Column* col = t.covariate(variable);
  if (!entry || !col)
    fail(Status::MissingColumn, "density variable '" + variable + "' not found");
  if (entry->kind == Kind::Numeric) {
    std::vector<double> parsed = numeric_values(*col);
    return numeric_curve([&](size_t i) { return parsed[i]; });
  }

  // categorical: level proportions per arm
  std::set<std::string> levels;
  for (size_t i : treated_rows)
    if (!col->cells[i].empty()) levels.insert(col->cells[i]);
  for (size_t i : control_rows)
    if (!col->cells[i].empty()) levels.insert(col->cells[i]);
  std::ostringstream out;
  write_csv_row(out, {"level", "prop_treated", "prop_control"});
  for (const auto& lv : levels) {
    size_t kt = 0, kc = 0;
    for (size_t i : treated_rows)
      if (col->cells[i] == lv) ++kt;
    for (size_t i : control_rows)
      if (col->cells[i] == lv) ++kc;
    write_csv_row(out,
                  {lv,
                   format_double(static_cast<double>(kt) /
                                 static_cast<double>(treated_rows.size())),
                   format_double(static_cast<double>(kc) /
                                 static_cast<double>(control_rows.size()))});
  }
  return out.str();
}

std::string ground_truth_json(const GroundTruth& truth) {
  json j;
  j["tau"] = json_num(truth.tau);
  json ate = json::object();
  for (const auto& [name, v] : truth.true_ate) ate[name] = json_num(v);
  j["true_ate"] = ate;
  size_t n_ghost = 0;
  for (auto g : truth.ghosted) n_ghost += g;
  j["n_ghosted"] = n_ghost;
  json tp = json::array();
  for (double e : truth.true_propensity) tp.push_back(json_num(e));
  j["true_propensity"] = tp;
  json gh = json::array();
  for (auto g : truth.ghosted) gh.push_back(static_cast<int>(g));
  j["ghosted"] = gh;
  return j.dump(2) + "\n";
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Status::IoError, "cannot write " + path);
  out << content;
  if (!out) fail(Status::IoError, "write failed for " + path);
}

}  // namespace drmatch
