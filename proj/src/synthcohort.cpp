#include "synthcohort.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "csv.hpp"
#include "rng.hpp"
#include "stats.hpp"

namespace drmatch {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::string outcome_name(int k) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "outcome_%02d", k);
  return buf;
}

std::string unit_id(size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "S%07zu", i + 1);
  return buf;
}

const char* kDomains[3] = {"performance", "progression", "engagement"};

struct Unit {
  double ability = 0.0, engagement = 0.0;
  int programme = 0;
  bool distance = false;
  int grade = 0;
  long failed = 0, passed = 0;
  long credits = 0;
  int age = 0;
  int outside = 0;
  int gender = 0;  // 0 F, 1 M, 2 NB
  bool first_family = false;
  double pos = 0.0;        // live engagement score
  double score_lin = 0.0;  // treatment score sans intercept
  double block_u = 0.0;
};

}  // namespace

SchemaConfig generated_schema(const DgpSpec& spec) {
  SchemaConfig cfg;
  cfg.id_column = "student_id";
  cfg.year_column = "year";
  cfg.treatment_column = "treated";
  cfg.pos_column = "pos_aligned";
  for (int k = 1; k <= spec.n_outcomes; ++k)
    cfg.outcomes.push_back({outcome_name(k), kDomains[(k - 1) % 3]});
  cfg.blocking = {"programme_title", "study_mode"};
  return cfg;
}

Generated generate_cohort(const DgpSpec& spec) {
  if (spec.n == 0) fail(Status::InvalidSpec, "n must be positive");
  if (!(spec.overlap > 0.0 && spec.overlap <= 1.0))
    fail(Status::InvalidSpec, "overlap must lie in (0,1]");
  if (spec.ghost_fraction < 0.0 || spec.ghost_fraction > 0.9)
    fail(Status::InvalidSpec, "ghost_fraction must lie in [0,0.9]");
  if (spec.n_outcomes < 1) fail(Status::InvalidSpec, "n_outcomes must be >= 1");
  if (spec.programmes < 1 || spec.programmes > 99)
    fail(Status::InvalidSpec, "programmes must lie in [1,99]");
  if (!(spec.treated_fraction > 0.0 && spec.treated_fraction < 1.0))
    fail(Status::InvalidSpec, "treated_fraction must lie in (0,1)");

  size_t n = spec.n;
  double cs = spec.confounding;
  double inv_overlap = 1.0 / spec.overlap;

  std::vector<Rng> rngs;
  rngs.reserve(n);
  std::vector<Unit> units(n);

  // pass 1: frozen pre-year covariates, live PoS and the treatment score
  for (size_t i = 0; i < n; ++i) {
    rngs.push_back(Rng::stream(spec.seed, "unit", i));
    Rng& r = rngs.back();
    Unit& u = units[i];

    u.ability = r.next_normal();
    u.engagement = r.next_normal();
    u.programme = static_cast<int>(r.next_below(spec.programmes));
    u.block_u = 0.2 * ((u.programme % 5) - 2);
    u.distance =
        r.next_double() < sigmoid(-0.3 - 0.6 * u.engagement + 0.2 * u.block_u);

    double g = 63.0 + 10.0 * u.ability + 2.0 * u.engagement + 3.0 * u.block_u +
               (u.distance ? -1.5 : 0.0) + 7.0 * r.next_normal();
    u.grade = static_cast<int>(std::lround(std::min(std::max(g, 0.0), 100.0)));
    u.failed = std::min(
        r.next_poisson(std::exp(0.3 - 0.7 * u.ability - 0.2 * u.engagement)),
        8L);
    u.passed = std::min(r.next_poisson(std::exp(1.25 + 0.25 * u.ability)), 12L);
    u.credits = 12 * (u.passed + u.failed + r.next_poisson(0.8));
    u.age = 18 + std::min(static_cast<int>(std::floor(
                              -4.0 * std::log(1.0 - r.next_double()))),
                          37);
    double oh = 10.0 - 9.0 * u.engagement + 6.0 * r.next_normal();
    u.outside = static_cast<int>(std::lround(std::min(std::max(oh, 0.0), 40.0)));
    double gu = r.next_double();
    u.gender = gu < 0.55 ? 0 : (gu < 0.97 ? 1 : 2);
    u.first_family = r.next_double() < sigmoid(-0.4 - 0.25 * u.ability);
    u.pos = sigmoid(0.2 + 0.9 * u.ability + 0.8 * u.engagement -
                    0.3 * (u.distance ? 1.0 : 0.0) + 0.5 * u.block_u +
                    0.4 * r.next_normal());

    double zg = (u.grade - 63.0) / 10.0;
    double s = -2.4 * (u.pos - 0.5) - 0.35 * zg + 0.20 * u.failed +
               0.25 * (u.distance ? 1.0 : 0.0) + 0.5 * u.block_u;
    if (spec.nonlinear_propensity)
      s += 0.35 * (zg * zg - 1.0) - 0.10 * zg * u.failed;
    u.score_lin = cs * inv_overlap * s;
  }

  // intercept calibrated so the mean assignment probability hits the
  // target share; the logistic mean is monotone in c0, so bisect
  double lo = -25.0, hi = 25.0;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    double mean_p = 0.0;
    for (const Unit& u : units) mean_p += sigmoid(mid + u.score_lin);
    mean_p /= static_cast<double>(n);
    if (mean_p < spec.treated_fraction) lo = mid;
    else hi = mid;
  }
  double c0 = 0.5 * (lo + hi);

  Generated out;
  GroundTruth& gt = out.truth;
  gt.tau = spec.tau;
  gt.true_propensity.resize(n);
  gt.ghosted.assign(n, 0);

  std::vector<std::uint8_t> treated(n, 0);
  std::vector<double> pos_aligned(n);

  // pass 2: assignment, then silent disengagement among the controls
  for (size_t i = 0; i < n; ++i) {
    Rng& r = rngs[i];
    Unit& u = units[i];
    double e = sigmoid(c0 + u.score_lin);
    gt.true_propensity[i] = e;
    treated[i] = r.next_double() < e ? 1 : 0;
    double ghost_u = r.next_double();
    double decay_u = r.next_double();
    pos_aligned[i] = u.pos;
    if (!treated[i] && ghost_u < spec.ghost_fraction) {
      gt.ghosted[i] = 1;
      pos_aligned[i] = u.pos * (0.02 + 0.10 * decay_u);
    }
  }

  // outcomes: potentials are ghost-free (so mean(Y1-Y0) is the clean
  // estimand); degradation hits only the observed control response
  auto other_family = [](Family f) {
    return f == Family::Gaussian ? Family::Poisson : Family::Gaussian;
  };
  std::vector<NumericColumn> outcome_cols;
  for (int k = 1; k <= spec.n_outcomes; ++k) {
    std::string name = outcome_name(k);
    Family fam = k == 1 ? spec.primary_family
                        : (k % 2 == 0 ? other_family(spec.primary_family)
                                      : spec.primary_family);
    double pattern =
        k == 1 ? 1.0 : (k % 3 == 2 ? 0.0 : (k % 3 == 0 ? 0.5 : 1.0));
    double sign = spec.tau == 0.0 ? 0.0 : (spec.tau > 0.0 ? 1.0 : -1.0);

    NumericColumn col{name, kDomains[(k - 1) % 3], std::vector<double>(n)};
    auto& mu1 = gt.mu1[name];
    auto& mu0 = gt.mu0[name];
    auto& y1 = gt.y1[name];
    auto& y0 = gt.y0[name];
    mu1.resize(n);
    mu0.resize(n);
    y1.resize(n);
    y0.resize(n);

    double ate_sum = 0.0;
    for (size_t i = 0; i < n; ++i) {
      const Unit& u = units[i];
      Rng r = Rng::stream(spec.seed, "y/" + name, i);
      double zg = (u.grade - 63.0) / 10.0;

      if (fam == Family::Gaussian) {
        double sd = 6.0 + (k % 3);
        double eff = k == 1 ? spec.tau : pattern * spec.tau;
        double base = 58.0 + 5.0 * zg - 1.5 * u.failed +
                      9.0 * (u.pos - 0.5) + 2.5 * u.block_u -
                      2.0 * (u.distance ? 1.0 : 0.0) + 0.8 * (u.passed - 3.5);
        if (spec.nonlinear_outcome)
          base += 0.25 * (zg * zg - 1.0) - 0.4 * (u.pos - 0.5) * u.failed;
        double eps = sd * r.next_normal();
        double eta = 0.5 * r.next_normal();  // mild effect heterogeneity
        y0[i] = base + eps;
        y1[i] = base + eff + eta + eps;
        double drop = gt.ghosted[i] ? 1.8 * sd : 0.0;
        mu1[i] = base + eff;
        mu0[i] = base - drop;
        col.values[i] = treated[i] ? y1[i] : y0[i] - drop;
      } else {
        double log_eff =
            k == 1 ? spec.tau : 0.2 * pattern * sign;
        double log_l0 = 0.5 + 0.25 * zg - 0.075 * u.failed +
                        0.5 * (u.pos - 0.5) + 0.3 * u.block_u;
        if (spec.nonlinear_outcome) log_l0 += 0.18 * (zg * zg - 1.0);
        double l0 = std::exp(std::min(log_l0, 8.0));
        double l1 = std::exp(std::min(log_l0 + log_eff, 8.0));
        y0[i] = static_cast<double>(r.next_poisson(l0));
        y1[i] = static_cast<double>(r.next_poisson(l1));
        double lg = 0.3 * l0;
        double yg = static_cast<double>(r.next_poisson(lg));
        mu1[i] = l1;
        mu0[i] = gt.ghosted[i] ? lg : l0;
        col.values[i] = treated[i] ? y1[i] : (gt.ghosted[i] ? yg : y0[i]);
      }
      ate_sum += y1[i] - y0[i];
    }
    gt.true_ate[name] = ate_sum / static_cast<double>(n);
    outcome_cols.push_back(std::move(col));
  }

  // assemble the cohort table
  CohortTable& t = out.cohort;
  t.ids.resize(n);
  t.years.assign(n, spec.year);
  t.treated = treated;
  t.pos = pos_aligned;
  t.pos_name = "pos_aligned";
  t.outcomes = std::move(outcome_cols);

  auto add_col = [&](const std::string& name, auto cell_fn) {
    Column c;
    c.name = name;
    c.cells.resize(n);
    for (size_t i = 0; i < n; ++i) c.cells[i] = cell_fn(units[i]);
    t.covariates.push_back(std::move(c));
  };
  for (size_t i = 0; i < n; ++i) t.ids[i] = unit_id(i);
  add_col("prev_mean_grade",
          [](const Unit& u) { return std::to_string(u.grade); });
  add_col("courses_failed_prev",
          [](const Unit& u) { return std::to_string(u.failed); });
  add_col("courses_passed_prev",
          [](const Unit& u) { return std::to_string(u.passed); });
  add_col("credits_attempted_cum",
          [](const Unit& u) { return std::to_string(u.credits); });
  add_col("age_at_year_start",
          [](const Unit& u) { return std::to_string(u.age); });
  add_col("outside_study_hours",
          [](const Unit& u) { return std::to_string(u.outside); });
  add_col("gender", [](const Unit& u) {
    return std::string(u.gender == 0 ? "Female"
                                     : (u.gender == 1 ? "Male" : "Non-binary"));
  });
  add_col("first_in_family",
          [](const Unit& u) { return std::string(u.first_family ? "yes" : "no"); });
  add_col("study_mode", [](const Unit& u) {
    return std::string(u.distance ? "Distance" : "Internal");
  });
  add_col("programme_title", [](const Unit& u) {
    char buf[8];
    std::snprintf(buf, sizeof(buf), "P%02d", u.programme + 1);
    return std::string(buf);
  });

  SchemaConfig cfg = generated_schema(spec);
  t.schema = classify_covariates(t, cfg);
  return out;
}

NaiveOracle naive_oracle(const CohortTable& t, const GroundTruth& truth,
                         const std::string& outcome) {
  const NumericColumn* oc = t.outcome(outcome);
  if (!oc) fail(Status::MissingColumn, "outcome '" + outcome + "' not found");
  auto it1 = truth.mu1.find(outcome);
  auto it0 = truth.mu0.find(outcome);
  auto itA = truth.true_ate.find(outcome);
  if (it1 == truth.mu1.end() || it0 == truth.mu0.end() ||
      itA == truth.true_ate.end())
    fail(Status::InvalidSpec, "ground truth missing outcome '" + outcome + "'");

  NaiveOracle res;
  res.true_ate = itA->second;

  double sum_t = 0.0, sum_c = 0.0;
  size_t n_t = 0, n_c = 0;
  double aipw = 0.0;
  size_t n = t.n();
  for (size_t i = 0; i < n; ++i) {
    double y = oc->values[i];
    if (t.treated[i]) {
      sum_t += y;
      ++n_t;
    } else {
      sum_c += y;
      ++n_c;
    }
    double e = std::min(std::max(truth.true_propensity[i], 0.01), 0.99);
    double m1 = it1->second[i], m0 = it0->second[i];
    double phi = m1 - m0;
    if (t.treated[i]) phi += (y - m1) / e;
    else phi -= (y - m0) / (1.0 - e);
    aipw += phi;
  }
  if (n_t == 0 || n_c == 0)
    fail(Status::InvalidSpec, "naive contrast needs both arms");
  res.naive_diff = sum_t / static_cast<double>(n_t) -
                   sum_c / static_cast<double>(n_c);
  res.oracle_dr = aipw / static_cast<double>(n);
  return res;
}

AlignFixture make_align_fixture(const CohortTable& t, const DgpSpec& spec) {
  AlignFixture fx;
  std::ostringstream iv, pd;
  iv << "student_id,intervention_date\n";
  pd << "student_id,date,pos\n";

  // treated window months; votes feed the per-block control anchor
  std::map<std::pair<std::string, int>, std::map<int, size_t>> votes;
  std::vector<int> window_month(t.n(), 0);
  for (size_t i = 0; i < t.n(); ++i) {
    if (!t.treated[i]) continue;
    Rng r = Rng::stream(spec.seed, "align", i);
    int month = 4 + static_cast<int>(r.next_below(8));  // intervention in Apr..Nov
    int day = 10 + static_cast<int>(r.next_below(15));
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", t.years[i], month, day);
    iv << csv_escape(t.ids[i]) << ',' << buf << '\n';
    window_month[i] = month - 1;
    votes[{t.block_key(i), t.years[i]}][month - 1] += 1;
  }
  std::map<std::pair<std::string, int>, int> anchor;
  for (const auto& [key, mv] : votes) {
    int best = 0;
    size_t best_n = 0;
    for (const auto& [mo, cnt] : mv)
      if (cnt > best_n || (cnt == best_n && mo < best)) {
        best = mo;
        best_n = cnt;
      }
    anchor[key] = best;
  }

  for (size_t i = 0; i < t.n(); ++i) {
    int month = 0;
    if (t.treated[i]) {
      month = window_month[i];
    } else {
      auto it = anchor.find({t.block_key(i), t.years[i]});
      if (it == anchor.end()) continue;  // no treated in block: stays missing
      month = it->second;
    }
    std::string value = format_double(t.pos[i]);
    for (int day : {5, 15, 25}) {
      char buf[16];
      std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", t.years[i], month, day);
      pd << csv_escape(t.ids[i]) << ',' << buf << ',' << value << '\n';
    }
  }
  fx.interventions_csv = iv.str();
  fx.pos_daily_csv = pd.str();
  return fx;
}

}  // namespace drmatch
