#pragma once

#include <string>
#include <vector>

#include "design.hpp"
#include "glm.hpp"
#include "matcher.hpp"
#include "table.hpp"

namespace drmatch {

enum class Family { Gaussian, Poisson };

const char* family_name(Family f);

// Poisson iff every non-missing value is a non-negative integer (tolerance
// 1e-8 on the rounding gap); decided on the treated arm
Family select_family(const std::vector<double>& values);

struct OutcomeModel {
  Family family = Family::Gaussian;
  bool fallback_used = false;  // Poisson fit failed, least squares used
  std::vector<std::string> coef_names;
  Eigen::VectorXd beta;
  Eigen::MatrixXd hc0;
  DesignLayout layout;

  // conditional mean at the given table rows
  std::vector<double> predict(const CohortTable& t,
                              const std::vector<size_t>& rows) const;
};

struct WeightDiagnostics {
  double pi = 0.5;
  double trim_low = 0.10, trim_high = 0.90;
  double w1_mean = 0.0, w0_mean = 0.0;
  double w1_p99 = 0.0, w0_p99 = 0.0;
  double w1_max = 0.0, w0_max = 0.0;
};

struct EstimateOptions {
  int bootstrap = 999;
  std::uint64_t seed = 0;
  double alpha = 0.05;
  bool winsorize = false;  // winsorized ATE is always reported alongside
  double winsor_low = 0.01, winsor_high = 0.99;
  double trim_low = 0.10, trim_high = 0.90;  // propensity trim inside weights
  bool block_bootstrap = false;              // stratify resampling by block
  GlmOptions glm;
};

struct DrResult {
  std::string outcome;
  std::string domain;
  double ate = 0.0;
  double ci_low = 0.0, ci_high = 0.0;
  double p_boot = 1.0;
  double delta_post = 0.0;  // raw post-match contrast
  double ancova = 0.0;      // covariate-adjusted cross-check
  Family family = Family::Gaussian;
  bool family_disagreement = false;
  bool fallback_used = false;
  double ate_winsorized = 0.0;
  bool winsorized_headline = false;
  size_t n_sets_used = 0;
  size_t n_sets_dropped = 0;  // missing outcome
  WeightDiagnostics weights;
  std::vector<Warning> warnings;
};

// One matched set flattened for the estimator: the treated unit and its
// controls with predictions and (trimmed) propensities attached.
struct SetObs {
  double y1 = 0.0, mu1 = 0.0, e1 = 0.5;
  std::vector<double> y0, mu0, e0;
  std::string block;
};

// phi1 - mean_j phi0_j with stabilized weights pi/e and (1-pi)/(1-e);
// exposed so the worked arithmetic is testable in isolation
double dr_contrast(const SetObs& s, double pi);

struct BootstrapResult {
  double ci_low = 0.0, ci_high = 0.0;
  double p = 1.0;
  size_t n_replicates = 0;
};

// Percentile bootstrap over matched sets: replicate r of `label` draws its
// own substream of `seed`, so results do not depend on evaluation order.
BootstrapResult bootstrap_sets(const std::vector<double>& contrasts,
                               const std::vector<std::string>& blocks,
                               const EstimateOptions& opts,
                               const std::string& label);

DrResult estimate_outcome(const CohortTable& t, const MatchedSample& ms,
                          const std::string& outcome, const EstimateOptions& opts);

std::vector<DrResult> estimate_all(const CohortTable& t, const MatchedSample& ms,
                                   const EstimateOptions& opts);

// internals shared with tests
std::vector<SetObs> build_set_obs(const CohortTable& t, const MatchedSample& ms,
                                  const std::string& outcome,
                                  const EstimateOptions& opts,
                                  DrResult* result);  // fills models/fields

}  // namespace drmatch
