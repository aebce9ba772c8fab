#include "estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rng.hpp"
#include "stats.hpp"

namespace drmatch {

static const double kNaN = std::numeric_limits<double>::quiet_NaN();

const char* family_name(Family f) {
  return f == Family::Poisson ? "poisson" : "gaussian";
}

Family select_family(const std::vector<double>& values) {
  bool any = false;
  for (double v : values) {
    if (std::isnan(v)) continue;
    any = true;
    if (v < 0.0 || std::abs(v - std::round(v)) > 1e-8) return Family::Gaussian;
  }
  return any ? Family::Poisson : Family::Gaussian;
}

std::vector<double> OutcomeModel::predict(const CohortTable& t,
                                          const std::vector<size_t>& rows) const {
  Eigen::MatrixXd X = apply_layout(t, rows, layout);
  Eigen::VectorXd eta = X * beta;
  std::vector<double> out(rows.size());
  bool log_link = family == Family::Poisson && !fallback_used;
  for (size_t i = 0; i < rows.size(); ++i)
    out[i] = log_link ? std::exp(std::min(eta[i], 30.0)) : eta[i];
  return out;
}

double dr_contrast(const SetObs& s, double pi) {
  double w1 = pi / s.e1;
  double phi1 = s.mu1 + w1 * (s.y1 - s.mu1);
  double phi0 = 0.0;
  for (size_t j = 0; j < s.y0.size(); ++j) {
    double w0 = (1.0 - pi) / (1.0 - s.e0[j]);
    phi0 += s.mu0[j] + w0 * (s.y0[j] - s.mu0[j]);
  }
  phi0 /= static_cast<double>(s.y0.size());
  return phi1 - phi0;
}

BootstrapResult bootstrap_sets(const std::vector<double>& contrasts,
                               const std::vector<std::string>& blocks,
                               const EstimateOptions& opts,
                               const std::string& label) {
  size_t n = contrasts.size();
  if (n == 0) fail(Status::InvalidSpec, "bootstrap over zero matched sets");
  int B = opts.bootstrap;
  if (B < 1) fail(Status::InvalidSpec, "bootstrap replicate count must be >= 1");

  // block-stratified mode resamples within blocks, keeping per-block counts
  std::vector<std::vector<size_t>> strata;
  if (opts.block_bootstrap) {
    std::map<std::string, std::vector<size_t>> by_block;
    for (size_t i = 0; i < n; ++i) by_block[blocks[i]].push_back(i);
    for (auto& [key, idx] : by_block) strata.push_back(std::move(idx));
  } else {
    std::vector<size_t> all(n);
    for (size_t i = 0; i < n; ++i) all[i] = i;
    strata.push_back(std::move(all));
  }

  std::vector<double> means(B);
  for (int r = 0; r < B; ++r) {
    Rng rng = Rng::stream(opts.seed, "bootstrap/" + label,
                          static_cast<std::uint64_t>(r));
    double sum = 0.0;
    for (const auto& stratum : strata) {
      size_t m = stratum.size();
      for (size_t k = 0; k < m; ++k)
        sum += contrasts[stratum[rng.next_below(m)]];
    }
    means[r] = sum / static_cast<double>(n);
  }

  std::sort(means.begin(), means.end());
  BootstrapResult res;
  res.n_replicates = B;
  res.ci_low = quantile_sorted(means, opts.alpha / 2.0);
  res.ci_high = quantile_sorted(means, 1.0 - opts.alpha / 2.0);
  size_t n_pos = 0, n_neg = 0;
  for (double m : means) {
    if (m > 0.0) ++n_pos;
    else if (m < 0.0) ++n_neg;
  }
  double p = 2.0 * static_cast<double>(std::min(n_pos, n_neg)) /
             static_cast<double>(B);
  double floor_p = 2.0 / static_cast<double>(B + 1);
  res.p = std::min(1.0, std::max(p, floor_p));
  return res;
}

namespace {

struct Frame {
  std::vector<size_t> rows;
  std::vector<double> mass;
  std::vector<double> y;
};

OutcomeModel fit_arm(const CohortTable& t, const Frame& frame, Family family,
                     const DesignSpec& spec, const EstimateOptions& opts,
                     std::vector<Warning>* warnings) {
  OutcomeModel model;
  model.family = family;
  model.layout = make_layout(t, frame.rows, spec);
  Eigen::MatrixXd X = apply_layout(t, frame.rows, model.layout);
  Eigen::VectorXd y(frame.y.size());
  Eigen::VectorXd w(frame.mass.size());
  for (size_t i = 0; i < frame.y.size(); ++i) {
    y[i] = frame.y[i];
    w[i] = frame.mass[i];
  }

  GlmFit fit;
  if (family == Family::Poisson) {
    try {
      fit = fit_poisson_irls(X, y, w, model.layout.column_names, opts.glm);
    } catch (const Error& e) {
      if (e.code() == Status::RankDeficient) throw;
      model.fallback_used = true;
      if (warnings)
        warnings->push_back({Status::Ok,
                             std::string("poisson fit failed (") + e.what() +
                                 "); least-squares fallback used"});
      fit = fit_wls(X, y, w, model.layout.column_names);
    }
  } else {
    fit = fit_wls(X, y, w, model.layout.column_names);
  }
  model.coef_names = fit.names;
  model.beta = fit.beta;
  model.hc0 = fit.hc0;
  return model;
}

}  // namespace

std::vector<SetObs> build_set_obs(const CohortTable& t, const MatchedSample& ms,
                                  const std::string& outcome,
                                  const EstimateOptions& opts, DrResult* result) {
  const NumericColumn* oc = t.outcome(outcome);
  if (!oc) fail(Status::MissingColumn, "outcome '" + outcome + "' not found");

  // usable sets: treated outcome present, at least one control outcome
  // present; control slots with missing outcomes fall away individually
  struct Usable {
    const MatchedSet* set;
    std::vector<size_t> control_rows;
  };
  std::vector<Usable> usable;
  size_t dropped = 0;
  for (const auto& set : ms.sets) {
    if (std::isnan(oc->values[set.treated_row])) {
      ++dropped;
      continue;
    }
    Usable u{&set, {}};
    for (const auto& c : set.controls)
      if (!std::isnan(oc->values[c.row])) u.control_rows.push_back(c.row);
    if (u.control_rows.empty()) {
      ++dropped;
      continue;
    }
    usable.push_back(std::move(u));
  }
  if (result) {
    result->n_sets_used = usable.size();
    result->n_sets_dropped = dropped;
  }
  if (usable.empty())
    fail(Status::InvalidSpec,
         "no matched sets with observed outcome '" + outcome + "'");

  // model frames: treated once per set, controls once per slot at 1/k mass
  Frame ft, fc;
  for (const auto& u : usable) {
    ft.rows.push_back(u.set->treated_row);
    ft.mass.push_back(1.0);
    ft.y.push_back(oc->values[u.set->treated_row]);
    double mass = 1.0 / static_cast<double>(u.control_rows.size());
    for (size_t row : u.control_rows) {
      fc.rows.push_back(row);
      fc.mass.push_back(mass);
      fc.y.push_back(oc->values[row]);
    }
  }

  Family fam_t = select_family(ft.y);
  Family fam_c = select_family(fc.y);
  Family family = fam_t;
  bool disagreement = fam_t != fam_c;
  if (disagreement) {
    family = Family::Gaussian;
    if (result) {
      result->family_disagreement = true;
      result->warnings.push_back(
          {Status::Ok, "outcome '" + outcome +
                           "': arms disagree on the count-data check; "
                           "gaussian model used for both"});
    }
  }
  if (result) result->family = family;

  DesignSpec spec;
  spec.covariates = covariates_with_roles(t.schema, true, true, true);
  spec.include_pos = true;

  std::vector<Warning> local;
  OutcomeModel model_t = fit_arm(t, ft, family, spec, opts, &local);
  OutcomeModel model_c = fit_arm(t, fc, family, spec, opts, &local);
  if (result) {
    result->fallback_used = model_t.fallback_used || model_c.fallback_used;
    for (auto& w : local) result->warnings.push_back(std::move(w));
  }

  std::vector<double> mu1 = model_t.predict(t, ft.rows);
  std::vector<double> mu0 = model_c.predict(t, fc.rows);

  auto trim = [&](double e) {
    return std::min(std::max(e, opts.trim_low), opts.trim_high);
  };

  std::vector<SetObs> obs;
  obs.reserve(usable.size());
  size_t ci = 0;
  for (size_t s = 0; s < usable.size(); ++s) {
    const Usable& u = usable[s];
    SetObs so;
    so.block = u.set->block;
    so.y1 = oc->values[u.set->treated_row];
    so.mu1 = mu1[s];
    so.e1 = trim(ms.score_by_row[u.set->treated_row]);
    for (size_t row : u.control_rows) {
      so.y0.push_back(oc->values[row]);
      so.mu0.push_back(mu0[ci]);
      so.e0.push_back(trim(ms.score_by_row[row]));
      ++ci;
    }
    obs.push_back(std::move(so));
  }
  return obs;
}

DrResult estimate_outcome(const CohortTable& t, const MatchedSample& ms,
                          const std::string& outcome,
                          const EstimateOptions& opts) {
  DrResult res;
  res.outcome = outcome;
  if (const NumericColumn* oc = t.outcome(outcome)) res.domain = oc->domain;

  std::vector<SetObs> obs = build_set_obs(t, ms, outcome, opts, &res);

  // pi is the treated share of the expanded matched observations: each set
  // contributes mass 1 on each side under 1/k control weighting, so the
  // stabilization constant is exactly 1/2
  double treated_mass = static_cast<double>(obs.size());
  double control_mass = 0.0;
  for (const auto& s : obs)
    control_mass +=
        static_cast<double>(s.y0.size()) * (1.0 / static_cast<double>(s.y0.size()));
  double pi = treated_mass / (treated_mass + control_mass);
  res.weights.pi = pi;
  res.weights.trim_low = opts.trim_low;
  res.weights.trim_high = opts.trim_high;

  std::vector<double> contrasts(obs.size());
  std::vector<std::string> blocks(obs.size());
  for (size_t i = 0; i < obs.size(); ++i) {
    contrasts[i] = dr_contrast(obs[i], pi);
    blocks[i] = obs[i].block;
  }

  // weight diagnostics over the expanded observations
  {
    std::vector<double> w1, w0;
    for (const auto& s : obs) {
      w1.push_back(pi / s.e1);
      for (double e : s.e0) w0.push_back((1.0 - pi) / (1.0 - e));
    }
    res.weights.w1_mean = mean_of(w1);
    res.weights.w0_mean = mean_of(w0);
    std::sort(w1.begin(), w1.end());
    std::sort(w0.begin(), w0.end());
    res.weights.w1_p99 = quantile_sorted(w1, 0.99);
    res.weights.w0_p99 = quantile_sorted(w0, 0.99);
    res.weights.w1_max = w1.back();
    res.weights.w0_max = w0.back();
  }

  double ate_raw = mean_of(contrasts);

  // winsorized variant, bounds frozen on the full sample
  std::vector<double> clamped = contrasts;
  {
    std::vector<double> sorted = contrasts;
    std::sort(sorted.begin(), sorted.end());
    double lo = quantile_sorted(sorted, opts.winsor_low);
    double hi = quantile_sorted(sorted, opts.winsor_high);
    for (double& c : clamped) c = std::min(std::max(c, lo), hi);
  }
  res.ate_winsorized = mean_of(clamped);
  res.winsorized_headline = opts.winsorize;
  res.ate = opts.winsorize ? res.ate_winsorized : ate_raw;
  if (opts.winsorize) res.warnings.push_back(
      {Status::Ok, "headline estimate uses winsorized contrasts"});

  const std::vector<double>& boot_base = opts.winsorize ? clamped : contrasts;
  BootstrapResult boot = bootstrap_sets(boot_base, blocks, opts, outcome);
  res.ci_low = boot.ci_low;
  res.ci_high = boot.ci_high;
  res.p_boot = boot.p;

  bool degenerate = true;
  for (double c : boot_base)
    if (c != boot_base[0]) {
      degenerate = false;
      break;
    }
  if (degenerate)
    res.warnings.push_back({Status::Ok,
                            "all set contrasts identical; bootstrap interval "
                            "is degenerate"});

  // raw matched contrast
  {
    double sum = 0.0;
    for (const auto& s : obs) sum += s.y1 - mean_of(s.y0);
    res.delta_post = sum / static_cast<double>(obs.size());
  }

  // ANCOVA cross-check: pooled weighted regression with a treatment column
  try {
    const NumericColumn* oc = t.outcome(outcome);
    std::vector<size_t> rows;
    std::vector<double> mass, y, treat;
    for (const auto& set : ms.sets) {
      if (std::isnan(oc->values[set.treated_row])) continue;
      std::vector<size_t> ctl;
      for (const auto& c : set.controls)
        if (!std::isnan(oc->values[c.row])) ctl.push_back(c.row);
      if (ctl.empty()) continue;
      rows.push_back(set.treated_row);
      mass.push_back(1.0);
      y.push_back(oc->values[set.treated_row]);
      treat.push_back(1.0);
      double m = 1.0 / static_cast<double>(ctl.size());
      for (size_t row : ctl) {
        rows.push_back(row);
        mass.push_back(m);
        y.push_back(oc->values[row]);
        treat.push_back(0.0);
      }
    }
    DesignSpec spec;
    spec.covariates = covariates_with_roles(t.schema, true, true, true);
    spec.include_pos = true;
    DesignLayout layout = make_layout(t, rows, spec);
    Eigen::MatrixXd Xcov = apply_layout(t, rows, layout);
    Eigen::MatrixXd X(Xcov.rows(), Xcov.cols() + 1);
    X.col(0) = Xcov.col(0);
    for (Eigen::Index i = 0; i < X.rows(); ++i) X(i, 1) = treat[i];
    X.rightCols(Xcov.cols() - 1) = Xcov.rightCols(Xcov.cols() - 1);
    std::vector<std::string> names;
    names.push_back("(intercept)");
    names.push_back("treated");
    for (size_t j = 1; j < layout.column_names.size(); ++j)
      names.push_back(layout.column_names[j]);
    Eigen::VectorXd yv(y.size()), wv(mass.size());
    for (size_t i = 0; i < y.size(); ++i) {
      yv[i] = y[i];
      wv[i] = mass[i];
    }
    GlmFit fit = fit_wls(X, yv, wv, names);
    res.ancova = fit.beta[1];
  } catch (const Error& e) {
    res.ancova = kNaN;
    res.warnings.push_back(
        {e.code(), std::string("ANCOVA cross-check failed: ") + e.what()});
  }

  return res;
}

std::vector<DrResult> estimate_all(const CohortTable& t, const MatchedSample& ms,
                                   const EstimateOptions& opts) {
  std::vector<DrResult> out;
  for (const auto& oc : t.outcomes)
    out.push_back(estimate_outcome(t, ms, oc.name, opts));
  return out;
}

}  // namespace drmatch
