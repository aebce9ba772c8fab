#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "errors.hpp"

namespace drmatch {

struct GlmOptions {
  int max_iter = 100;
  double tol = 1e-8;       // max |coefficient change|, standardized scale
  int max_halvings = 10;   // step halving when the log-likelihood dips
};

struct GlmFit {
  std::vector<std::string> names;
  Eigen::VectorXd beta;  // original scale, intercept first
  Eigen::MatrixXd hc0;   // robust sandwich covariance, original scale
  int iterations = 0;
  bool converged = false;
  double loglik = 0.0;
};

// Throws RankDeficient naming the aliased columns. Column 0 is assumed to
// be the intercept.
void check_full_rank(const Eigen::MatrixXd& X,
                     const std::vector<std::string>& names);

// Fisher-scoring IRLS with internal z-scoring of the non-intercept columns
// (coefficients are mapped back exactly). w is per-observation mass.
// Logistic throws Separation when slopes diverge, NoConvergence when the
// iteration budget runs out; Poisson reports both as NoConvergence since
// callers treat any Poisson failure as "fall back to least squares".
GlmFit fit_logistic_irls(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                         const Eigen::VectorXd& w,
                         const std::vector<std::string>& names,
                         const GlmOptions& opts = {});

GlmFit fit_poisson_irls(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                        const Eigen::VectorXd& w,
                        const std::vector<std::string>& names,
                        const GlmOptions& opts = {});

GlmFit fit_wls(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
               const Eigen::VectorXd& w, const std::vector<std::string>& names);

}  // namespace drmatch
