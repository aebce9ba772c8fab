#pragma once

#include <map>
#include <string>
#include <vector>

#include "matcher.hpp"
#include "table.hpp"

namespace drmatch {

// (m_t - m_c) / sqrt((v_t + v_c)/2), sample variances. Equal arms with
// zero spread give 0; unequal means over zero spread give a +-inf sentinel
// and a DegenerateVariance warning.
double smd_numeric(const std::vector<double>& treated,
                   const std::vector<double>& control,
                   std::vector<Warning>* warnings = nullptr);

// (p_t - p_c) / sqrt(pbar (1 - pbar)) with pbar pooled over the combined
// arms; missing cells are excluded from the proportions.
double smd_categorical(const std::vector<std::string>& treated,
                       const std::vector<std::string>& control,
                       const std::string& level);

struct BalanceRow {
  std::string covariate;
  std::string level;  // "" for numeric rows
  double before = 0.0;
  double after = 0.0;
};

struct BalanceReport {
  std::vector<BalanceRow> rows;
  std::map<std::string, double> max_abs_before;
  std::map<std::string, double> max_abs_after;
  double threshold_moderate = 0.10;
  double threshold_large = 0.25;
  size_t n_moderate_after = 0;  // |SMD| in (0.10, 0.25]
  size_t n_large_after = 0;     // |SMD| > 0.25
  std::vector<Warning> warnings;

  double worst_after() const;
};

// Before = trimmed sample arms as they stand; after = matched sample with
// each treated once per set and each control once per slot it fills
// (frequency weighting by reuse). Covers matching + blocking covariates
// and the aligned PoS.
BalanceReport balance_report(const CohortTable& t, const MatchedSample& ms);

}  // namespace drmatch
