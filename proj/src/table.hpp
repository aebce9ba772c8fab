#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "errors.hpp"

namespace drmatch {

enum class Kind { Numeric, Categorical };
enum class Role { Matching, Blocking, OutcomeAdjustOnly };

const char* kind_name(Kind k);
const char* role_name(Role r);

struct SchemaEntry {
  std::string name;
  Kind kind = Kind::Categorical;
  Role role = Role::Matching;
};

struct CovariateSchema {
  std::vector<SchemaEntry> entries;

  const SchemaEntry* find(std::string_view name) const;
  std::vector<std::string> blocking_names() const;
};

// Raw covariate column: cells kept exactly as read, "" means missing.
// Numeric interpretation happens on demand so a load -> serialize round
// trip is byte-exact.
struct Column {
  std::string name;
  std::vector<std::string> cells;
};

// Outcome column, parsed; NaN marks missing.
struct NumericColumn {
  std::string name;
  std::string domain;  // free-form grouping tag for the results table
  std::vector<double> values;
};

struct CohortTable {
  std::vector<std::string> ids;
  std::vector<int> years;
  std::vector<std::uint8_t> treated;
  std::vector<double> pos;  // aligned PoS, NaN = missing
  std::vector<Column> covariates;
  std::vector<NumericColumn> outcomes;
  CovariateSchema schema;  // empty until classify_covariates
  std::string pos_name = "pos_aligned";

  size_t n() const { return ids.size(); }
  const Column* covariate(std::string_view name) const;
  Column* covariate(std::string_view name);
  const NumericColumn* outcome(std::string_view name) const;

  // block key for row i: blocking cells joined with "|"
  std::string block_key(size_t i) const;
};

struct OutcomeSpec {
  std::string name;
  std::string domain;
};

// How to read a cohort CSV and classify its columns.
struct SchemaConfig {
  std::string id_column = "student_id";
  std::string year_column = "year";  // optional in the file
  std::string treatment_column = "treated";
  std::string pos_column = "pos_aligned";  // optional in the file
  std::vector<OutcomeSpec> outcomes;
  std::vector<std::string> blocking;
  std::map<std::string, Role> role_overrides;
  double numeric_fraction_threshold = 0.95;
  int min_distinct = 6;
  std::vector<std::pair<std::string, std::string>> interactions;
};

struct LoadReport {
  size_t n_rows = 0;
  std::vector<Warning> warnings;
};

CohortTable load_cohort(std::istream& in, const SchemaConfig& cfg,
                        LoadReport* report = nullptr);
CohortTable load_cohort_file(const std::string& path, const SchemaConfig& cfg,
                             LoadReport* report = nullptr);
CohortTable load_cohort_string(const std::string& data, const SchemaConfig& cfg,
                               LoadReport* report = nullptr);

// exact inverse of load for the same config (column order preserved)
void serialize_cohort(const CohortTable& t, std::ostream& out);
std::string serialize_cohort(const CohortTable& t);

// One row per (id, year): first non-missing value per column wins, row
// order follows first appearance. Idempotent.
CohortTable collapse_duplicates(const CohortTable& t, size_t* n_merged = nullptr);

// Numeric iff >= numeric_fraction_threshold of non-missing cells parse as
// finite numbers AND the parsed values take >= min_distinct distinct
// values. Empty columns classify Categorical with a warning.
CovariateSchema classify_covariates(const CohortTable& t, const SchemaConfig& cfg,
                                    std::vector<Warning>* warnings = nullptr);

struct ImputeReport {
  size_t n_numeric_imputed = 0;
  size_t n_categorical_filled = 0;
  std::vector<std::string> indicator_columns;
};

// Numeric: block-year median, global median fallback, plus a companion
// "<name>__miss" categorical indicator when any cell was missing.
// Categorical: missing becomes the explicit level "Unknown".
CohortTable impute_missing(const CohortTable& t, ImputeReport* report = nullptr);

// parse helpers
bool parse_double(std::string_view s, double* out);
std::vector<double> numeric_values(const Column& c);  // NaN for missing/unparseable

}  // namespace drmatch
