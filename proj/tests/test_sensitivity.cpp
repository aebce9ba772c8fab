#include <doctest.h>

#include <cmath>

#include "estimator.hpp"
#include "matcher.hpp"
#include "oracles.hpp"
#include "propensity.hpp"
#include "rng.hpp"
#include "sensitivity.hpp"
#include "stats.hpp"
#include "synthcohort.hpp"

using namespace drmatch;

TEST_SUITE_BEGIN("sensitivity");

TEST_CASE("three-pair fixture matches the enumerated tail") {
  // |d| ranks: 1 -> -1, 2 -> +2, 3 -> +3; T = 5; tail = {2,3}, {1,2,3}
  std::vector<double> d{3, -1, 2};
  RosenbaumBounds g1 = rosenbaum_bounds(d, 1.0, Direction::Greater);
  CHECK(g1.exact);
  CHECK(g1.n_informative == 3);
  CHECK(g1.p_upper == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(g1.p_lower == g1.p_upper);

  RosenbaumBounds g15 = rosenbaum_bounds(d, 1.5, Direction::Greater);
  // p+ = 0.6: 0.6*0.6 (ranks 2,3 positive) * (0.4 + 0.6)
  CHECK(g15.p_upper == doctest::Approx(0.6 * 0.6 * 0.4 + 0.6 * 0.6 * 0.6)
                           .epsilon(1e-14));
  CHECK(g15.p_lower == doctest::Approx(0.4 * 0.4 * 0.6 + 0.4 * 0.4 * 0.4)
                           .epsilon(1e-14));
  CHECK(g15.p_lower < g15.p_upper);
}

TEST_CASE("zero differences are uninformative") {
  std::vector<double> d{0, 3, -1, 2, 0};
  RosenbaumBounds b = rosenbaum_bounds(d, 1.5, Direction::Greater);
  CHECK(b.n_informative == 3);
  CHECK(b.p_upper == doctest::Approx(rosenbaum_bounds({3, -1, 2}, 1.5,
                                                      Direction::Greater)
                                         .p_upper)
                         .epsilon(1e-15));
  CHECK_THROWS_AS(rosenbaum_bounds({0, 0}, 1.5, Direction::Greater), Error);
  CHECK_THROWS_AS(rosenbaum_bounds(d, 0.9, Direction::Greater), Error);
}

TEST_CASE("gamma one reproduces the classical signed-rank p") {
  Rng r = Rng::stream(17, "signed-rank");
  for (int rep = 0; rep < 50; ++rep) {
    size_t n = 8 + r.next_below(20);
    std::vector<double> d;
    for (size_t i = 0; i < n; ++i) d.push_back(r.next_normal() + 0.3);
    RosenbaumBounds b = rosenbaum_normal(d, 1.0, Direction::Greater);
    // classical: mu = sum R / 2, sigma^2 = sum R^2 / 4, 0.5 correction
    std::vector<double> mags;
    for (double x : d)
      if (x != 0.0) mags.push_back(std::abs(x));
    auto ranks = average_ranks(mags);
    double t_obs = 0.0, sum_r = 0.0, sum_r2 = 0.0;
    size_t k = 0;
    for (double x : d) {
      if (x == 0.0) continue;
      if (x > 0.0) t_obs += ranks[k];
      sum_r += ranks[k];
      sum_r2 += ranks[k] * ranks[k];
      ++k;
    }
    double z = (t_obs - 0.5 * sum_r - 0.5) / std::sqrt(0.25 * sum_r2);
    CHECK(b.p_upper == doctest::Approx(normal_sf(z)).epsilon(1e-12));
    CHECK(b.p_upper == doctest::Approx(b.p_lower).epsilon(1e-15));
  }
}

TEST_CASE("small samples take the exact path and match the oracle") {
  Rng r = Rng::stream(18, "exact-oracle");
  for (int rep = 0; rep < 100; ++rep) {
    size_t n = 2 + r.next_below(6);  // 2..7 pairs
    std::vector<double> d;
    for (size_t i = 0; i < n; ++i) d.push_back(r.next_normal());
    for (double gamma : {1.0, 1.5, 2.5}) {
      RosenbaumBounds b = rosenbaum_bounds(d, gamma, Direction::Greater);
      CHECK(b.exact);
      CHECK(b.p_upper ==
            doctest::Approx(oracles::exact_signed_rank_tail(d, gamma))
                .epsilon(1e-12));
    }
  }
}

TEST_CASE("p_upper grows with gamma") {
  Rng r = Rng::stream(19, "monotone");
  for (int rep = 0; rep < 50; ++rep) {
    size_t n = 5 + r.next_below(30);
    std::vector<double> d;
    for (size_t i = 0; i < n; ++i) d.push_back(r.next_normal() + 0.5);
    double prev = 0.0;
    for (double gamma : {1.0, 1.25, 1.5, 2.0, 2.5, 4.0}) {
      double p = rosenbaum_bounds(d, gamma, Direction::Greater).p_upper;
      CHECK(p >= prev - 1e-15);
      prev = p;
    }
  }
}

TEST_CASE("direction less mirrors by sign flip") {
  std::vector<double> d{-3, 1, -2, -4, 0.5, -1.5, 2.2, -0.7};
  std::vector<double> neg;
  for (double x : d) neg.push_back(-x);
  for (double gamma : {1.0, 1.8}) {
    RosenbaumBounds a = rosenbaum_bounds(d, gamma, Direction::Less);
    RosenbaumBounds b = rosenbaum_bounds(neg, gamma, Direction::Greater);
    CHECK(a.p_upper == b.p_upper);
    CHECK(a.p_lower == b.p_lower);
  }
}

TEST_CASE("exact enumeration refuses huge inputs") {
  std::vector<double> d(30, 1.0);
  CHECK_THROWS_AS(rosenbaum_exact(d, 1.5, Direction::Greater), Error);
  CHECK_NOTHROW(rosenbaum_bounds(d, 1.5, Direction::Greater));  // normal path
}

TEST_CASE("only significant outcomes get sensitivity rows") {
  DgpSpec spec;
  spec.n = 400;
  spec.tau = 6.0;  // unmistakable effect
  spec.seed = 21;
  Generated gen = generate_cohort(spec);
  PropensityFit fit = fit_propensity(gen.cohort, {});
  common_support(fit, gen.cohort);
  MatchedSample ms = match(gen.cohort, fit, {});
  EstimateOptions opts;
  opts.bootstrap = 199;
  opts.seed = 21;
  auto results = estimate_all(gen.cohort, ms, opts);
  REQUIRE(results.size() == 1);
  REQUIRE(results[0].p_boot < 0.05);

  SensitivityTable tab = sensitivity_for_significant(
      results, gen.cohort, ms, {1.0, 1.25, 1.5, 2.0, 2.5}, 0.05);
  CHECK(tab.rows.size() == 5);
  for (const auto& row : tab.rows) {
    CHECK(row.outcome == "outcome_01");
    CHECK(row.direction == Direction::Greater);
  }
  // the effect is enormous: it survives the whole grid
  CHECK(tab.max_gamma_significant.at("outcome_01") == 2.5);

  // a strict alpha filters everything out
  SensitivityTable none = sensitivity_for_significant(
      results, gen.cohort, ms, {1.0, 1.5}, 1e-9);
  CHECK(none.rows.empty());
}

TEST_SUITE_END();
