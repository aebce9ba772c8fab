#include "propensity.hpp"

#include <algorithm>
#include <cmath>

namespace drmatch {

double clip_score(double e, double epsilon) {
  return std::min(std::max(e, epsilon), 1.0 - epsilon);
}

std::vector<size_t> PropensityFit::trimmed_rows() const {
  std::vector<size_t> out;
  for (size_t i = 0; i < rows.size(); ++i)
    if (retained.empty() || retained[i]) out.push_back(rows[i]);
  return out;
}

PropensityFit fit_propensity(const CohortTable& t, const PropensityOptions& opts) {
  if (t.schema.entries.empty())
    fail(Status::InvalidSpec, "fit_propensity needs a classified schema");
  if (!(opts.epsilon > 0.0 && opts.epsilon < 0.5))
    fail(Status::InvalidSpec, "epsilon must lie in (0, 0.5)");

  PropensityFit fit;
  fit.epsilon = opts.epsilon;

  for (size_t i = 0; i < t.n(); ++i) {
    if (opts.include_pos && std::isnan(t.pos[i])) {
      ++fit.n_dropped_missing_pos;
      continue;
    }
    fit.rows.push_back(i);
  }
  if (fit.rows.empty())
    fail(Status::InvalidSpec, "no rows with complete design to fit on");
  if (fit.n_dropped_missing_pos > 0)
    fit.warnings.push_back(
        {Status::Ok, std::to_string(fit.n_dropped_missing_pos) +
                         " rows dropped from the propensity fit (no aligned "
                         "PoS)"});

  DesignSpec spec;
  spec.covariates = covariates_with_roles(t.schema, true, true, true);
  spec.include_pos = opts.include_pos;
  spec.interactions = opts.interactions;
  fit.layout = make_layout(t, fit.rows, spec);

  Eigen::MatrixXd X = apply_layout(t, fit.rows, fit.layout);
  Eigen::VectorXd y(fit.rows.size());
  for (size_t i = 0; i < fit.rows.size(); ++i) y[i] = t.treated[fit.rows[i]];
  Eigen::VectorXd w = Eigen::VectorXd::Ones(fit.rows.size());

  GlmFit glm = fit_logistic_irls(X, y, w, fit.layout.column_names, opts.glm);
  fit.coef_names = glm.names;
  fit.coefficients = glm.beta;
  fit.iterations = glm.iterations;
  fit.converged = glm.converged;

  Eigen::VectorXd eta = X * glm.beta;
  fit.scores.resize(fit.rows.size());
  fit.logits.resize(fit.rows.size());
  for (size_t i = 0; i < fit.rows.size(); ++i) {
    double e = 1.0 / (1.0 + std::exp(-eta[i]));
    e = clip_score(e, opts.epsilon);
    fit.scores[i] = e;
    fit.logits[i] = std::log(e / (1.0 - e));
  }
  fit.retained.assign(fit.rows.size(), 1);
  return fit;
}

void common_support(PropensityFit& fit, const CohortTable& t) {
  double min_t = 1.0, max_t = 0.0, min_c = 1.0, max_c = 0.0;
  size_t n_t = 0, n_c = 0;
  for (size_t i = 0; i < fit.rows.size(); ++i) {
    double e = fit.scores[i];
    if (t.treated[fit.rows[i]]) {
      min_t = std::min(min_t, e);
      max_t = std::max(max_t, e);
      ++n_t;
    } else {
      min_c = std::min(min_c, e);
      max_c = std::max(max_c, e);
      ++n_c;
    }
  }
  if (n_t == 0 || n_c == 0)
    fail(Status::EmptySupport, "common support needs both arms non-empty");

  double l = std::max(min_t, min_c);
  double h = std::min(max_t, max_c);
  if (l > h)
    fail(Status::EmptySupport,
         "score ranges do not overlap: l=" + std::to_string(l) +
             " > h=" + std::to_string(h));

  fit.support_low = l;
  fit.support_high = h;
  fit.retained.assign(fit.rows.size(), 0);
  fit.n_trimmed_treated = 0;
  fit.n_trimmed_control = 0;
  for (size_t i = 0; i < fit.rows.size(); ++i) {
    double e = fit.scores[i];
    if (e >= l && e <= h) {
      fit.retained[i] = 1;
    } else if (t.treated[fit.rows[i]]) {
      ++fit.n_trimmed_treated;
    } else {
      ++fit.n_trimmed_control;
    }
  }
}

}  // namespace drmatch
