#include "table.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "csv.hpp"
#include "stats.hpp"

namespace drmatch {

static const double kNaN = std::numeric_limits<double>::quiet_NaN();

const char* kind_name(Kind k) {
  return k == Kind::Numeric ? "numeric" : "categorical";
}

const char* role_name(Role r) {
  switch (r) {
    case Role::Matching: return "matching";
    case Role::Blocking: return "blocking";
    case Role::OutcomeAdjustOnly: return "outcome_adjust_only";
  }
  return "?";
}

const char* status_name(Status s) {
  switch (s) {
    case Status::Ok: return "ok";
    case Status::ConfigError: return "config_error";
    case Status::StageError: return "stage_error";
    case Status::MissingColumn: return "missing_column";
    case Status::NonBinaryTreatment: return "non_binary_treatment";
    case Status::ParseError: return "parse_error";
    case Status::EmptyColumn: return "empty_column";
    case Status::LeakageDetected: return "leakage_detected";
    case Status::MissingPosWindow: return "missing_pos_window";
    case Status::Separation: return "separation";
    case Status::RankDeficient: return "rank_deficient";
    case Status::NoConvergence: return "no_convergence";
    case Status::EmptySupport: return "empty_support";
    case Status::DegenerateLogits: return "degenerate_logits";
    case Status::NoComparableCovariates: return "no_comparable_covariates";
    case Status::DegenerateVariance: return "degenerate_variance";
    case Status::InvalidGamma: return "invalid_gamma";
    case Status::NoInformativePairs: return "no_informative_pairs";
    case Status::InvalidSpec: return "invalid_spec";
    case Status::IoError: return "io_error";
    case Status::InternalError: return "internal_error";
  }
  return "?";
}

bool parse_double(std::string_view s, double* out) {
  if (s.empty()) return false;
  std::string buf(s);
  const char* p = buf.c_str();
  char* end = nullptr;
  double v = std::strtod(p, &end);
  if (end != p + buf.size()) return false;
  if (!std::isfinite(v)) return false;
  *out = v;
  return true;
}

std::vector<double> numeric_values(const Column& c) {
  std::vector<double> out(c.cells.size(), kNaN);
  for (size_t i = 0; i < c.cells.size(); ++i) {
    double v;
    if (parse_double(c.cells[i], &v)) out[i] = v;
  }
  return out;
}

const SchemaEntry* CovariateSchema::find(std::string_view name) const {
  for (const auto& e : entries)
    if (e.name == name) return &e;
  return nullptr;
}

std::vector<std::string> CovariateSchema::blocking_names() const {
  std::vector<std::string> out;
  for (const auto& e : entries)
    if (e.role == Role::Blocking) out.push_back(e.name);
  return out;
}

const Column* CohortTable::covariate(std::string_view name) const {
  for (const auto& c : covariates)
    if (c.name == name) return &c;
  return nullptr;
}

Column* CohortTable::covariate(std::string_view name) {
  for (auto& c : covariates)
    if (c.name == name) return &c;
  return nullptr;
}

const NumericColumn* CohortTable::outcome(std::string_view name) const {
  for (const auto& c : outcomes)
    if (c.name == name) return &c;
  return nullptr;
}

std::string CohortTable::block_key(size_t i) const {
  std::string key;
  bool first = true;
  for (const auto& e : schema.entries) {
    if (e.role != Role::Blocking) continue;
    const Column* c = covariate(e.name);
    if (!first) key += '|';
    key += c ? c->cells[i] : "";
    first = false;
  }
  return key;
}

CohortTable load_cohort(std::istream& in, const SchemaConfig& cfg,
                        LoadReport* report) {
  CsvTable csv = read_csv(in);
  CohortTable t;
  LoadReport rep;
  rep.n_rows = csv.rows.size();

  int id_col = csv.column(cfg.id_column);
  int year_col = csv.column(cfg.year_column);
  int treat_col = csv.column(cfg.treatment_column);
  int pos_col = csv.column(cfg.pos_column);
  if (treat_col < 0)
    fail(Status::MissingColumn,
         "treatment column '" + cfg.treatment_column + "' not found");
  std::vector<int> outcome_cols;
  for (const auto& o : cfg.outcomes) {
    int c = csv.column(o.name);
    if (c < 0)
      fail(Status::MissingColumn, "outcome column '" + o.name + "' not found");
    outcome_cols.push_back(c);
  }
  for (const auto& b : cfg.blocking)
    if (csv.column(b) < 0)
      fail(Status::MissingColumn, "blocking column '" + b + "' not found");

  size_t n = csv.rows.size();
  t.ids.resize(n);
  t.years.assign(n, 0);
  t.treated.resize(n);
  t.pos.assign(n, kNaN);
  t.pos_name = cfg.pos_column;

  std::set<int> special;
  special.insert(treat_col);
  if (id_col >= 0) special.insert(id_col);
  if (year_col >= 0) special.insert(year_col);
  if (pos_col >= 0) special.insert(pos_col);
  for (int c : outcome_cols) special.insert(c);

  for (size_t j = 0; j < csv.header.size(); ++j) {
    if (special.count(static_cast<int>(j))) continue;
    Column col;
    col.name = csv.header[j];
    col.cells.resize(n);
    t.covariates.push_back(std::move(col));
  }
  for (size_t k = 0; k < cfg.outcomes.size(); ++k) {
    NumericColumn oc;
    oc.name = cfg.outcomes[k].name;
    oc.domain = cfg.outcomes[k].domain;
    oc.values.assign(n, kNaN);
    t.outcomes.push_back(std::move(oc));
  }

  for (size_t i = 0; i < n; ++i) {
    const auto& row = csv.rows[i];
    t.ids[i] = id_col >= 0 ? row[id_col] : std::to_string(i);
    if (year_col >= 0 && !row[year_col].empty()) {
      double y;
      if (!parse_double(row[year_col], &y) || y != std::floor(y))
        fail(Status::ParseError, "row " + std::to_string(i + 2) +
                                     ": bad year '" + row[year_col] + "'");
      t.years[i] = static_cast<int>(y);
    }
    {
      const std::string& cell = row[treat_col];
      double v;
      if (!parse_double(cell, &v))
        fail(Status::ParseError, "row " + std::to_string(i + 2) +
                                     ": treatment '" + cell +
                                     "' is not a number");
      if (v != 0.0 && v != 1.0)
        fail(Status::NonBinaryTreatment,
             "row " + std::to_string(i + 2) + ": treatment value '" + cell +
                 "' is not 0/1");
      t.treated[i] = v == 1.0 ? 1 : 0;
    }
    if (pos_col >= 0 && !row[pos_col].empty()) {
      double v;
      if (!parse_double(row[pos_col], &v))
        fail(Status::ParseError, "row " + std::to_string(i + 2) + ": bad " +
                                     cfg.pos_column + " '" + row[pos_col] +
                                     "'");
      t.pos[i] = v;
    }
    for (size_t k = 0; k < outcome_cols.size(); ++k) {
      const std::string& cell = row[outcome_cols[k]];
      if (cell.empty()) continue;
      double v;
      if (!parse_double(cell, &v))
        fail(Status::ParseError, "row " + std::to_string(i + 2) +
                                     ": outcome " + t.outcomes[k].name +
                                     " '" + cell + "' is not a number");
      t.outcomes[k].values[i] = v;
    }
    size_t ci = 0;
    for (size_t j = 0; j < csv.header.size(); ++j) {
      if (special.count(static_cast<int>(j))) continue;
      t.covariates[ci++].cells[i] = row[j];
    }
  }

  if (report) *report = rep;
  return t;
}

CohortTable load_cohort_file(const std::string& path, const SchemaConfig& cfg,
                             LoadReport* report) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Status::IoError, "cannot open " + path);
  return load_cohort(in, cfg, report);
}

CohortTable load_cohort_string(const std::string& data, const SchemaConfig& cfg,
                               LoadReport* report) {
  std::istringstream in(data);
  return load_cohort(in, cfg, report);
}

void serialize_cohort(const CohortTable& t, std::ostream& out) {
  std::vector<std::string> row;
  row.push_back("student_id");
  row.push_back("year");
  row.push_back("treated");
  row.push_back(t.pos_name);
  for (const auto& c : t.covariates) row.push_back(c.name);
  for (const auto& o : t.outcomes) row.push_back(o.name);
  write_csv_row(out, row);
  for (size_t i = 0; i < t.n(); ++i) {
    row.clear();
    row.push_back(t.ids[i]);
    row.push_back(std::to_string(t.years[i]));
    row.push_back(t.treated[i] ? "1" : "0");
    row.push_back(std::isnan(t.pos[i]) ? "" : format_double(t.pos[i]));
    for (const auto& c : t.covariates) row.push_back(c.cells[i]);
    for (const auto& o : t.outcomes)
      row.push_back(std::isnan(o.values[i]) ? "" : format_double(o.values[i]));
    write_csv_row(out, row);
  }
}

std::string serialize_cohort(const CohortTable& t) {
  std::ostringstream out;
  serialize_cohort(t, out);
  return out.str();
}

CohortTable collapse_duplicates(const CohortTable& t, size_t* n_merged) {
  std::map<std::pair<std::string, int>, size_t> first;  // key -> output row
  std::vector<size_t> keep;                             // output row -> first input row
  std::vector<std::vector<size_t>> members;
  for (size_t i = 0; i < t.n(); ++i) {
    auto key = std::make_pair(t.ids[i], t.years[i]);
    auto it = first.find(key);
    if (it == first.end()) {
      first.emplace(key, keep.size());
      keep.push_back(i);
      members.push_back({i});
    } else {
      members[it->second].push_back(i);
    }
  }
  if (n_merged) *n_merged = t.n() - keep.size();
  if (keep.size() == t.n()) return t;

  CohortTable out;
  out.schema = t.schema;
  out.pos_name = t.pos_name;
  size_t m = keep.size();
  out.ids.resize(m);
  out.years.resize(m);
  out.treated.resize(m);
  out.pos.assign(m, kNaN);
  for (const auto& c : t.covariates)
    out.covariates.push_back({c.name, std::vector<std::string>(m)});
  for (const auto& o : t.outcomes) {
    NumericColumn oc{o.name, o.domain, std::vector<double>(m, kNaN)};
    out.outcomes.push_back(std::move(oc));
  }

  for (size_t r = 0; r < m; ++r) {
    out.ids[r] = t.ids[keep[r]];
    out.years[r] = t.years[keep[r]];
    out.treated[r] = t.treated[keep[r]];  // required field, first row wins
    for (size_t i : members[r])
      if (!std::isnan(t.pos[i])) {
        out.pos[r] = t.pos[i];
        break;
      }
    for (size_t jc = 0; jc < t.covariates.size(); ++jc)
      for (size_t i : members[r])
        if (!t.covariates[jc].cells[i].empty()) {
          out.covariates[jc].cells[r] = t.covariates[jc].cells[i];
          break;
        }
    for (size_t jo = 0; jo < t.outcomes.size(); ++jo)
      for (size_t i : members[r])
        if (!std::isnan(t.outcomes[jo].values[i])) {
          out.outcomes[jo].values[r] = t.outcomes[jo].values[i];
          break;
        }
  }
  return out;
}

CovariateSchema classify_covariates(const CohortTable& t, const SchemaConfig& cfg,
                                    std::vector<Warning>* warnings) {
  CovariateSchema schema;
  for (const auto& c : t.covariates) {
    SchemaEntry e;
    e.name = c.name;

    size_t non_missing = 0, parsed = 0;
    std::set<double> distinct;
    for (const auto& cell : c.cells) {
      if (cell.empty()) continue;
      ++non_missing;
      double v;
      if (parse_double(cell, &v)) {
        ++parsed;
        distinct.insert(v);
      }
    }
    if (non_missing == 0) {
      e.kind = Kind::Categorical;
      if (warnings)
        warnings->push_back(
            {Status::EmptyColumn, "covariate '" + c.name +
                                      "' is entirely missing; kept as "
                                      "categorical"});
    } else {
      double frac = static_cast<double>(parsed) / static_cast<double>(non_missing);
      bool numeric = frac >= cfg.numeric_fraction_threshold &&
                     distinct.size() >= static_cast<size_t>(cfg.min_distinct);
      e.kind = numeric ? Kind::Numeric : Kind::Categorical;
    }

    e.role = Role::Matching;
    if (std::find(cfg.blocking.begin(), cfg.blocking.end(), c.name) !=
        cfg.blocking.end())
      e.role = Role::Blocking;
    if (auto it = cfg.role_overrides.find(c.name); it != cfg.role_overrides.end())
      e.role = it->second;
    schema.entries.push_back(std::move(e));
  }
  return schema;
}

CohortTable impute_missing(const CohortTable& t, ImputeReport* report) {
  if (t.schema.entries.empty())
    fail(Status::InvalidSpec, "impute_missing needs a classified schema");
  CohortTable out = t;
  ImputeReport rep;
  size_t n = t.n();

  for (const auto& e : t.schema.entries) {
    Column* col = out.covariate(e.name);
    if (!col) continue;
    if (e.kind == Kind::Categorical) {
      for (auto& cell : col->cells)
        if (cell.empty()) {
          cell = "Unknown";
          ++rep.n_categorical_filled;
        }
      continue;
    }

    // numeric: anything that does not parse counts as missing
    std::vector<double> vals = numeric_values(*col);
    std::vector<size_t> missing;
    for (size_t i = 0; i < n; ++i)
      if (std::isnan(vals[i])) missing.push_back(i);
    if (missing.empty()) continue;

    std::map<std::pair<std::string, int>, std::vector<double>> by_block_year;
    std::vector<double> global;
    for (size_t i = 0; i < n; ++i) {
      if (std::isnan(vals[i])) continue;
      by_block_year[{t.block_key(i), t.years[i]}].push_back(vals[i]);
      global.push_back(vals[i]);
    }
    double global_med =
        global.empty() ? 0.0 : quantile_of(global, 0.5);
    std::map<std::pair<std::string, int>, double> med;
    for (auto& [key, v] : by_block_year) med[key] = quantile_of(v, 0.5);

    for (size_t i : missing) {
      auto it = med.find({t.block_key(i), t.years[i]});
      double v = it != med.end() ? it->second : global_med;
      col->cells[i] = format_double(v);
      ++rep.n_numeric_imputed;
    }

    // companion missingness indicator, added once per affected covariate
    std::string ind_name = e.name + "__miss";
    if (!out.covariate(ind_name)) {
      Column ind;
      ind.name = ind_name;
      ind.cells.assign(n, "no");
      for (size_t i : missing) ind.cells[i] = "yes";
      out.covariates.push_back(std::move(ind));
      out.schema.entries.push_back({ind_name, Kind::Categorical, Role::Matching});
      rep.indicator_columns.push_back(ind_name);
    }
  }

  if (report) *report = rep;
  return out;
}

}  // namespace drmatch
