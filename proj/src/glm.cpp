#include "glm.hpp"

#include <cmath>

namespace drmatch {

namespace {

constexpr double kSlopeDivergence = 30.0;  // standardized-scale logit slope
constexpr double kWeightFloor = 1e-10;

double softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

struct Standardized {
  Eigen::MatrixXd Xs;
  Eigen::VectorXd center, scale;  // per column; intercept untouched
};

Standardized standardize(const Eigen::MatrixXd& X) {
  Standardized s;
  s.Xs = X;
  Eigen::Index p = X.cols();
  s.center = Eigen::VectorXd::Zero(p);
  s.scale = Eigen::VectorXd::Ones(p);
  double n = static_cast<double>(X.rows());
  for (Eigen::Index j = 1; j < p; ++j) {
    double m = X.col(j).mean();
    double ss = (X.col(j).array() - m).square().sum();
    double sd = n > 1 ? std::sqrt(ss / (n - 1)) : 0.0;
    if (sd > 0) {
      s.center[j] = m;
      s.scale[j] = sd;
      s.Xs.col(j) = (X.col(j).array() - m) / sd;
    }
  }
  return s;
}

// map standardized-scale coefficients back to the original scale
Eigen::VectorXd unstandardize(const Eigen::VectorXd& bs, const Standardized& s) {
  Eigen::VectorXd b = bs;
  for (Eigen::Index j = 1; j < bs.size(); ++j) {
    b[j] = bs[j] / s.scale[j];
    b[0] -= bs[j] * s.center[j] / s.scale[j];
  }
  return b;
}

// sandwich covariance on the original scale at the final coefficients;
// var_fn gives the GLM variance function v(mu), resid is y - mu
Eigen::MatrixXd sandwich(const Eigen::MatrixXd& X, const Eigen::VectorXd& w,
                         const Eigen::VectorXd& v, const Eigen::VectorXd& resid) {
  Eigen::Index p = X.cols();
  Eigen::MatrixXd bread_inv =
      X.transpose() * (w.array() * v.array()).matrix().asDiagonal() * X;
  Eigen::MatrixXd meat(p, p);
  meat.setZero();
  Eigen::VectorXd score_w = (w.array() * resid.array()).matrix();
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    double sw = score_w[i];
    meat.noalias() += (sw * sw) * (X.row(i).transpose() * X.row(i));
  }
  Eigen::LDLT<Eigen::MatrixXd> ldlt(bread_inv);
  Eigen::MatrixXd bread = ldlt.solve(Eigen::MatrixXd::Identity(p, p));
  return bread * meat * bread;
}

enum class Link { Logit, Log };

GlmFit irls(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
            const Eigen::VectorXd& w, const std::vector<std::string>& names,
            const GlmOptions& opts, Link link) {
  check_full_rank(X, names);
  Standardized s = standardize(X);
  const Eigen::MatrixXd& Xs = s.Xs;
  Eigen::Index p = X.cols();

  auto mean_fn = [&](const Eigen::VectorXd& eta) -> Eigen::VectorXd {
    if (link == Link::Logit)
      return eta.unaryExpr([](double e) { return 1.0 / (1.0 + std::exp(-e)); });
    return eta.unaryExpr([](double e) { return std::exp(std::min(e, 30.0)); });
  };
  auto var_fn = [&](const Eigen::VectorXd& mu) -> Eigen::VectorXd {
    if (link == Link::Logit)
      return (mu.array() * (1.0 - mu.array())).matrix();
    return mu;
  };
  auto loglik_fn = [&](const Eigen::VectorXd& beta) {
    Eigen::VectorXd eta = Xs * beta;
    double ll = 0.0;
    if (link == Link::Logit) {
      for (Eigen::Index i = 0; i < y.size(); ++i)
        ll += w[i] * (y[i] * eta[i] - softplus(eta[i]));
    } else {
      for (Eigen::Index i = 0; i < y.size(); ++i)
        ll += w[i] * (y[i] * eta[i] - std::exp(std::min(eta[i], 30.0)));
    }
    return ll;
  };
  auto diverged = [&](const Eigen::VectorXd& beta) {
    std::vector<std::string> cols;
    for (Eigen::Index j = 1; j < p; ++j)
      if (std::abs(beta[j]) > kSlopeDivergence) cols.push_back(names[j]);
    return cols;
  };

  GlmFit fit;
  fit.names = names;
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  double ll = loglik_fn(beta);

  for (int it = 0; it < opts.max_iter; ++it) {
    Eigen::VectorXd eta = Xs * beta;
    Eigen::VectorXd mu = mean_fn(eta);
    Eigen::VectorXd v = var_fn(mu).cwiseMax(kWeightFloor);
    Eigen::VectorXd sw = (w.array() * v.array()).matrix();
    Eigen::VectorXd z = eta + ((y - mu).array() / v.array()).matrix();

    Eigen::MatrixXd A = Xs.transpose() * sw.asDiagonal() * Xs;
    Eigen::VectorXd b = Xs.transpose() * (sw.array() * z.array()).matrix();
    Eigen::VectorXd cand = Eigen::LDLT<Eigen::MatrixXd>(A).solve(b);
    if (!cand.allFinite())
      fail(Status::NoConvergence, "IRLS produced non-finite coefficients");

    double cand_ll = loglik_fn(cand);
    for (int h = 0; h < opts.max_halvings && !(cand_ll >= ll - 1e-12); ++h) {
      cand = 0.5 * (beta + cand);
      cand_ll = loglik_fn(cand);
    }

    double delta = (cand - beta).cwiseAbs().maxCoeff();
    beta = cand;
    ll = cand_ll;
    fit.iterations = it + 1;

    auto bad = diverged(beta);
    if (!bad.empty()) {
      std::string msg = link == Link::Logit
                            ? "separation detected; diverging columns:"
                            : "diverging Poisson coefficients:";
      for (const auto& c : bad) msg += " " + c;
      fail(link == Link::Logit ? Status::Separation : Status::NoConvergence, msg);
    }
    if (!std::isfinite(ll))
      fail(Status::NoConvergence, "log-likelihood became non-finite");

    if (delta < opts.tol) {
      fit.converged = true;
      break;
    }
  }
  if (!fit.converged)
    fail(Status::NoConvergence,
         "IRLS did not converge in " + std::to_string(opts.max_iter) +
             " iterations");

  fit.beta = unstandardize(beta, s);
  fit.loglik = ll;
  Eigen::VectorXd eta = X * fit.beta;
  Eigen::VectorXd mu = mean_fn(eta);
  fit.hc0 = sandwich(X, w, var_fn(mu).cwiseMax(kWeightFloor), y - mu);
  return fit;
}

}  // namespace

void check_full_rank(const Eigen::MatrixXd& X,
                     const std::vector<std::string>& names) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  Eigen::Index rank = qr.rank();
  if (rank >= X.cols()) return;
  const auto& perm = qr.colsPermutation().indices();
  std::string msg = "design is rank deficient; aliased columns:";
  for (Eigen::Index k = rank; k < X.cols(); ++k) {
    Eigen::Index col = perm[k];
    msg += " " + (col < static_cast<Eigen::Index>(names.size())
                      ? names[col]
                      : "#" + std::to_string(col));
  }
  fail(Status::RankDeficient, msg);
}

GlmFit fit_logistic_irls(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                         const Eigen::VectorXd& w,
                         const std::vector<std::string>& names,
                         const GlmOptions& opts) {
  return irls(X, y, w, names, opts, Link::Logit);
}

GlmFit fit_poisson_irls(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                        const Eigen::VectorXd& w,
                        const std::vector<std::string>& names,
                        const GlmOptions& opts) {
  return irls(X, y, w, names, opts, Link::Log);
}

GlmFit fit_wls(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
               const Eigen::VectorXd& w, const std::vector<std::string>& names) {
  check_full_rank(X, names);
  Standardized s = standardize(X);
  Eigen::MatrixXd A = s.Xs.transpose() * w.asDiagonal() * s.Xs;
  Eigen::VectorXd b = s.Xs.transpose() * (w.array() * y.array()).matrix();
  Eigen::VectorXd bs = Eigen::LDLT<Eigen::MatrixXd>(A).solve(b);
  if (!bs.allFinite())
    fail(Status::NoConvergence, "least squares produced non-finite coefficients");

  GlmFit fit;
  fit.names = names;
  fit.beta = unstandardize(bs, s);
  fit.converged = true;
  fit.iterations = 1;
  Eigen::VectorXd resid = y - X * fit.beta;
  fit.loglik = -0.5 * (w.array() * resid.array().square()).sum();
  fit.hc0 = sandwich(X, w, Eigen::VectorXd::Ones(y.size()), resid);
  return fit;
}

}  // namespace drmatch
