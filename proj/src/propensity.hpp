#pragma once

#include <string>
#include <vector>

#include "design.hpp"
#include "glm.hpp"
#include "table.hpp"

namespace drmatch {

struct PropensityOptions {
  double epsilon = 1e-6;  // scores clipped into (epsilon, 1-epsilon)
  GlmOptions glm;
  bool include_pos = true;
  // extra interaction pairs for the linear predictor (none by default)
  std::vector<std::pair<std::string, std::string>> interactions;
};

struct PropensityFit {
  std::vector<size_t> rows;  // table rows the model was fit on
  std::vector<std::string> coef_names;
  Eigen::VectorXd coefficients;
  std::vector<double> scores;  // clipped, parallel to rows
  std::vector<double> logits;  // of the clipped scores
  double epsilon = 1e-6;
  int iterations = 0;
  bool converged = false;

  // common support trim, filled by common_support()
  double support_low = 0.0;
  double support_high = 1.0;
  std::vector<std::uint8_t> retained;  // parallel to rows
  size_t n_trimmed_treated = 0;
  size_t n_trimmed_control = 0;
  size_t n_dropped_missing_pos = 0;  // rows never fitted (no aligned PoS)

  DesignLayout layout;
  std::vector<Warning> warnings;

  std::vector<size_t> trimmed_rows() const;  // table rows with retained == 1
};

double clip_score(double e, double epsilon);

// Logistic model of treatment on every covariate (matching, blocking and
// outcome-adjust-only roles all enter) plus aligned PoS. Rows without an
// aligned PoS cannot enter the design and are dropped with a count.
PropensityFit fit_propensity(const CohortTable& t, const PropensityOptions& opts);

// Overlap region [l, h]: l = max of per-arm score minima, h = min of the
// maxima; retains rows with l <= e <= h. EmptySupport if the arms do not
// overlap (or one arm is empty).
void common_support(PropensityFit& fit, const CohortTable& t);

}  // namespace drmatch
