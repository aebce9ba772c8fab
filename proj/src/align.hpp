#pragma once

#include <map>
#include <string>
#include <vector>

#include "dates.hpp"
#include "table.hpp"

namespace drmatch {

// Side tables for temporal alignment. Keys are student ids.
struct AlignInputs {
  std::map<std::string, Date> interventions;  // treated students
  std::map<std::string, std::vector<std::pair<Date, double>>> pos_daily;
  std::map<std::string, Date> snapshots;  // covariate snapshot dates, optional
};

struct AlignReport {
  size_t n_treated_aligned = 0;
  size_t n_controls_aligned = 0;
  size_t n_controls_unanchored = 0;  // blocks with no treated rows
  std::map<std::string, std::string> anchor_months;  // "block|year" -> "YYYY-MM"
  std::vector<Warning> warnings;
};

// Treated rows: exposure window = the calendar month preceding the
// intervention month; pos = mean of the student's daily PoS values in that
// window. Control rows borrow the modal treated window month of their
// block-year (ties -> earliest month). Covariate snapshots dated on or
// after a treated student's intervention raise LeakageDetected; a student
// with no PoS observations in their window raises MissingPosWindow.
// Controls in blocks with no treated rows keep pos = NaN and are counted.
CohortTable align_pretreatment(const CohortTable& t, const AlignInputs& in,
                               AlignReport* report = nullptr);

AlignInputs load_align_inputs(const std::string& interventions_csv,
                              const std::string& pos_daily_csv,
                              const std::string& snapshots_csv);  // "" = absent

}  // namespace drmatch
