#pragma once

#include <map>
#include <string>
#include <vector>

#include "propensity.hpp"
#include "table.hpp"

namespace drmatch {

struct MatchSpec {
  int m = 2;                       // controls per treated
  double caliper_multiplier = 0.2; // x SD of trimmed logits
  double w = 0.75;                 // weight of the PoS gap in the distance
  bool with_replacement = true;
  bool per_block_caliper = false;  // caliper from block logits instead of global
};

// Gower distance over the matching-role covariates, ranges frozen on the
// trimmed sample. Missing values are excluded pairwise; numeric gaps are
// scaled by the covariate's range (zero range contributes zero).
class GowerContext {
 public:
  static GowerContext build(const CohortTable& t,
                            const std::vector<size_t>& trimmed_rows);
  double distance(size_t row_a, size_t row_b) const;  // table row indices

  struct Var {
    std::string name;
    bool numeric = false;
    double range = 0.0;                // numeric only, over trimmed rows
    std::vector<double> values;        // numeric: per table row, NaN missing
    const std::vector<std::string>* cells = nullptr;  // categorical
  };
  const std::vector<Var>& vars() const { return vars_; }

 private:
  std::vector<Var> vars_;
};

double compute_caliper(const std::vector<double>& logits, double multiplier,
                       std::vector<Warning>* warnings = nullptr);

double composite_distance(double gower, double pos_scaled_a, double pos_scaled_b,
                          double w);

struct MatchedControl {
  size_t row = 0;
  double distance = 0.0;
  double logit_gap = 0.0;
};

struct MatchedSet {
  size_t treated_row = 0;
  std::string block;
  std::vector<MatchedControl> controls;
};

struct MatchedSample {
  std::vector<MatchedSet> sets;  // blocks in key order, treated by (id, year)
  MatchSpec spec;
  double caliper_width = 0.0;    // global width (per-block widths below)
  std::map<std::string, double> block_calipers;
  double pos_min = 0.0, pos_max = 1.0;  // rescale constants, trimmed sample
  std::vector<size_t> trimmed_rows;
  std::vector<double> score_by_row;   // table-row indexed, NaN off support
  std::vector<double> logit_by_row;
  std::vector<double> pos_scaled_by_row;
  size_t n_treated_unmatched = 0;  // no eligible control under the caliper
  std::map<std::string, size_t> unmatched_by_block;
  std::vector<Warning> warnings;

  size_t n_sets() const { return sets.size(); }
};

// Greedy nearest-neighbour 1:m within blocks. Treated are processed in
// ascending (id, year) order; candidate controls must sit within the
// caliper on the logit scale; ties break by (distance, |logit gap|,
// control id). Treated with no eligible control are dropped and counted.
MatchedSample match(const CohortTable& t, const PropensityFit& fit,
                    const MatchSpec& spec);

}  // namespace drmatch
