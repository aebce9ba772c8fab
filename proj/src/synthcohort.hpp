#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "estimator.hpp"
#include "table.hpp"

namespace drmatch {

// Knobs of the synthetic cohort generator. Blocks are programme x mode
// combinations; treatment targets at-risk students (low PoS, weak grades)
// through a logistic rule whose intercept is solved so the expected
// treated share hits treated_fraction. "Ghosts" are controls who silently
// disengaged: their aligned PoS collapses and their observed outcomes are
// degraded, while their frozen covariates stay indistinguishable.
struct DgpSpec {
  size_t n = 2000;
  double tau = 0.0;  // additive effect (gaussian); log rate ratio (poisson)
  double confounding = 1.0;
  double overlap = 1.0;  // (0,1], smaller = more extreme scores
  double ghost_fraction = 0.0;
  int programmes = 6;
  Family primary_family = Family::Gaussian;
  bool nonlinear_propensity = false;  // adds terms linear fits cannot see
  bool nonlinear_outcome = false;
  double treated_fraction = 0.2;
  int n_outcomes = 1;
  int year = 2024;
  std::uint64_t seed = 1;
};

struct GroundTruth {
  double tau = 0.0;
  std::vector<double> true_propensity;  // assignment-rule value, every unit
  std::vector<std::uint8_t> ghosted;
  std::map<std::string, double> true_ate;  // mean of potential differences
  // conditional means of the *observed* outcome under each arm (ghost
  // degradation included on the control side)
  std::map<std::string, std::vector<double>> mu1, mu0;
  // potential outcomes, ghost-free by construction so true_ate == tau
  // holds for the primary gaussian outcome
  std::map<std::string, std::vector<double>> y1, y0;
};

struct Generated {
  CohortTable cohort;
  GroundTruth truth;
};

Generated generate_cohort(const DgpSpec& spec);

// schema matching what generate_cohort emits
SchemaConfig generated_schema(const DgpSpec& spec);

// naive full-cohort contrast, the true effect, and an AIPW estimate using
// the true nuisances -- the calibration yardsticks for the estimator
struct NaiveOracle {
  double naive_diff = 0.0;
  double true_ate = 0.0;
  double oracle_dr = 0.0;
};

NaiveOracle naive_oracle(const CohortTable& t, const GroundTruth& truth,
                         const std::string& outcome);

// side files exercising the align stage: intervention dates for treated,
// daily PoS traces whose window means reproduce pos_aligned exactly
struct AlignFixture {
  std::string interventions_csv;
  std::string pos_daily_csv;
};

AlignFixture make_align_fixture(const CohortTable& t, const DgpSpec& spec);

}  // namespace drmatch
