#pragma once

#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "balance.hpp"
#include "estimator.hpp"
#include "matcher.hpp"
#include "propensity.hpp"
#include "sensitivity.hpp"
#include "synthcohort.hpp"
#include "table.hpp"

namespace drmatch {

using json = nlohmann::ordered_json;

// json value for a double: finite -> number, else "inf"/"-inf"/"nan"
// strings so the sentinel survives serialization with its sign
json json_num(double x);

json warnings_json(const std::vector<Warning>& warnings);

std::string propensity_json(const CohortTable& t, const PropensityFit& fit);
std::string scores_csv(const CohortTable& t, const PropensityFit& fit);

std::string matched_pairs_json(const CohortTable& t, const MatchedSample& ms);
// wide layout: one row per set, t_ / c1_ / ... / c<m>_ column prefixes
std::string matched_wide_csv(const CohortTable& t, const MatchedSample& ms);

std::string balance_csv(const BalanceReport& rep);
std::string balance_json(const BalanceReport& rep);

std::string dr_results_csv(const std::vector<DrResult>& results);
std::string dr_results_json(const std::vector<DrResult>& results);

std::string sensitivity_csv(const SensitivityTable& table);
std::string sensitivity_json(const SensitivityTable& table);

// headline table; identical values rendered to CSV and JSON
std::string results_table_csv(const std::vector<DrResult>& results,
                              const SensitivityTable& sens);
std::string results_table_json(const std::vector<DrResult>& results,
                               const SensitivityTable& sens);

// numeric variables get a KDE curve, categorical ones level proportions;
// "propensity_score" draws the fitted scores
std::string density_csv(const CohortTable& t, const MatchedSample& ms,
                        const std::string& variable);

std::string ground_truth_json(const GroundTruth& truth);

void write_file(const std::string& path, const std::string& content);

}  // namespace drmatch
