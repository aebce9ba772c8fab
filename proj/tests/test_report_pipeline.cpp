#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "kde.hpp"
#include "pipeline.hpp"
#include "report.hpp"
#include "test_support.hpp"

using namespace drmatch;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

fs::path fresh_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  return dir;
}

DrResult sample_result(const std::string& outcome, double ate, double lo,
                       double hi, double p, double delta, double ancova) {
  DrResult r;
  r.outcome = outcome;
  r.domain = "engagement";
  r.ate = ate;
  r.ci_low = lo;
  r.ci_high = hi;
  r.p_boot = p;
  r.delta_post = delta;
  r.ancova = ancova;
  r.family = Family::Gaussian;
  r.n_sets_used = 431;
  return r;
}

}  // namespace

TEST_SUITE_BEGIN("report");

TEST_CASE("json_num keeps non-finite values with their sign") {
  CHECK(json_num(0.5).dump() == "0.5");
  CHECK(json_num(nan("")).dump() == "\"nan\"");
  CHECK(json_num(HUGE_VAL).dump() == "\"inf\"");
  CHECK(json_num(-HUGE_VAL).dump() == "\"-inf\"");
}

TEST_CASE("results table renders headline rows verbatim") {
  std::vector<DrResult> results;
  results.push_back(sample_result("attendance_rate", -0.78, -1.34, -0.17,
                                  0.018, -0.85, -0.7));
  results.push_back(
      sample_result("portal_logins", 8.82, 2.74, 13.97, 0.008, 9.7, 7.94));
  results[1].family = Family::Poisson;

  SensitivityTable sens;
  sens.max_gamma_significant["attendance_rate"] = 1.5;
  sens.max_gamma_significant["portal_logins"] = nan("");  // fragile

  std::string csv = results_table_csv(results, sens);
  std::istringstream lines(csv);
  std::string header, row1, row2;
  std::getline(lines, header);
  std::getline(lines, row1);
  std::getline(lines, row2);
  CHECK(header ==
        "domain,outcome,ate_dr,ci_low,ci_high,p_boot,delta_post,ancova,"
        "family,n,max_gamma_significant");
  CHECK(row1 ==
        "engagement,attendance_rate,-0.78,-1.34,-0.17,0.018,-0.85,-0.7,"
        "gaussian,431,1.5");
  CHECK(row2 ==
        "engagement,portal_logins,8.82,2.74,13.97,0.008,9.7,7.94,"
        "poisson,431,");

  std::string js = results_table_json(results, sens);
  auto parsed = json::parse(js);
  REQUIRE(parsed.size() == 2);
  CHECK(parsed[0]["ate_dr"] == -0.78);
  CHECK(parsed[0]["max_gamma_significant"] == 1.5);
  CHECK(parsed[1]["max_gamma_significant"].is_null());
}

TEST_CASE("density export covers score, numeric, and categorical shapes") {
  using drmatch::testing::CovariateSpec;
  using drmatch::testing::make_table;
  using drmatch::testing::numeric_cells;

  CohortTable t = make_table(
      {1, 1, 0, 0, 0, 0}, {0.5, 0.25, 0.5, 0.25, 0.75, 0.5},
      {CovariateSpec{"g", Kind::Numeric, Role::Matching,
                     numeric_cells({10, 20, 12, 18, 30, 11})},
       CovariateSpec{"mode", Kind::Categorical, Role::Matching,
                     {"FT", "PT", "FT", "PT", "FT", "FT"}}},
      {});
  PropensityFit fit =
      drmatch::testing::make_fit({0.6, 0.55, 0.5, 0.45, 0.4, 0.52});
  MatchSpec wide;
  wide.caliper_multiplier = 10.0;  // admit everything; shape is the point
  MatchedSample ms = match(t, fit, wide);
  REQUIRE(!ms.sets.empty());

  std::string score = density_csv(t, ms, "propensity_score");
  CHECK(score.substr(0, score.find('\n')) ==
        "value,density_treated,density_control");
  size_t rows = std::count(score.begin(), score.end(), '\n');
  CHECK(rows >= 100);  // a real curve, not a stub

  std::string posd = density_csv(t, ms, t.pos_name);
  CHECK(posd.find("density_treated") != std::string::npos);

  std::string num = density_csv(t, ms, "g");
  CHECK(num.find("density_control") != std::string::npos);

  std::string cat = density_csv(t, ms, "mode");
  std::istringstream cl(cat);
  std::string h;
  std::getline(cl, h);
  CHECK(h == "level,prop_treated,prop_control");
  CHECK(cat.find("FT,") != std::string::npos);

  CHECK_THROWS_AS(density_csv(t, ms, "absent"), Error);
}

TEST_CASE("kde handles identical samples and spikes") {
  std::vector<double> a{1.0, 2.0, 3.0, 4.0, 5.0};
  KdeCurve same = kde_density(a, a);
  double sup = 0.0;
  for (size_t i = 0; i < same.grid.size(); ++i)
    sup = std::max(sup, std::abs(same.treated[i] - same.control[i]));
  CHECK(sup < 1e-12);

  std::vector<Warning> warnings;
  KdeCurve spike = kde_density({2.0, 2.0, 2.0}, a, 200, &warnings);
  REQUIRE(warnings.size() == 1);
  CHECK(warnings[0].code == Status::DegenerateVariance);
  double t_peak = 0.0, c_peak = 0.0, mass = 0.0;
  for (size_t i = 0; i < spike.grid.size(); ++i) {
    t_peak = std::max(t_peak, spike.treated[i]);
    c_peak = std::max(c_peak, spike.control[i]);
    if (i + 1 < spike.grid.size())
      mass += 0.5 * (spike.treated[i] + spike.treated[i + 1]) *
              (spike.grid[i + 1] - spike.grid[i]);
  }
  CHECK(t_peak > 10.0 * c_peak);                // spike dwarfs the smooth arm
  CHECK(mass == doctest::Approx(1.0).epsilon(0.05));  // and keeps its mass
}

TEST_SUITE_END();

TEST_SUITE_BEGIN("pipeline");

TEST_CASE("config parsing rejects the bad and keeps the good") {
  const char* good = R"({
    "generate": {"n": 120, "tau": 1.0, "seed": 4},
    "match": {"m": 2, "w": 0.5},
    "estimate": {"bootstrap": 99},
    "seed": 4,
    "output_dir": "SOMEWHERE"
  })";
  PipelineConfig cfg = parse_config(good);
  CHECK(cfg.has_generate);
  CHECK(cfg.dgp.n == 120);
  CHECK(cfg.match.m == 2);
  CHECK(cfg.match.w == 0.5);
  CHECK(cfg.estimate.bootstrap == 99);
  CHECK(cfg.estimate.seed == 4);
  CHECK(cfg.out_dir == "SOMEWHERE");
  CHECK(cfg.gamma_grid.size() == 5);  // default grid

  CHECK_THROWS_WITH_AS(parse_config("{\"generate\": {\"n\": 10}, \"typo\": 1}"),
                       doctest::Contains("typo"), Error);
  CHECK_THROWS_WITH_AS(
      parse_config("{\"generate\": {\"n\": 10, \"zeta\": 2}}"),
      doctest::Contains("zeta"), Error);
  CHECK_THROWS_AS(parse_config("{\"generate\": {\"n\": \"lots\"}}"), Error);
  CHECK_THROWS_AS(
      parse_config("{\"generate\": {\"n\": 10, \"family\": \"gamma\"}}"),
      Error);
  CHECK_THROWS_AS(parse_config("not json at all"), Error);
  // neither input nor generator
  CHECK_THROWS_AS(validate_config(parse_config("{}")), Error);
  // interventions without the daily trace
  CHECK_THROWS_AS(
      validate_config(parse_config(
          "{\"generate\": {\"n\": 10}, "
          "\"input\": {\"interventions_csv\": \"x.csv\"}}")),
      Error);
}

TEST_CASE("environment variable supplies the default output dir") {
  setenv("DRMATCH_OUT_DIR", "env_dir", 1);
  PipelineConfig cfg = parse_config("{\"generate\": {\"n\": 10}}");
  CHECK(cfg.out_dir == "env_dir");
  PipelineConfig explicit_cfg = parse_config(
      "{\"generate\": {\"n\": 10}, \"output_dir\": \"mine\"}");
  CHECK(explicit_cfg.out_dir == "mine");
  unsetenv("DRMATCH_OUT_DIR");
  PipelineConfig fallback = parse_config("{\"generate\": {\"n\": 10}}");
  CHECK(fallback.out_dir == "out");
}

TEST_CASE("stage names round-trip") {
  CHECK(std::string(stage_name(Stage::Load)) == "load");
  CHECK(std::string(stage_name(Stage::CommonSupport)) == "common_support");
  CHECK(std::string(stage_name(Stage::Sensitivity)) == "sensitivity");
}

TEST_CASE("a truncated run writes artifacts up to the requested stage") {
  fs::path dir = fresh_dir("drmatch_stage_test");
  PipelineConfig cfg = parse_config(R"({
    "generate": {"n": 400, "tau": 1.5, "seed": 9},
    "estimate": {"bootstrap": 49},
    "seed": 9
  })");
  cfg.out_dir = dir.string();
  validate_config(cfg);

  run_pipeline(cfg, Stage::Match);
  CHECK(fs::exists(dir / "cohort.csv"));
  CHECK(fs::exists(dir / "propensity.json"));
  CHECK(fs::exists(dir / "matched_pairs.json"));
  CHECK(fs::exists(dir / "matched_wide.csv"));
  CHECK(!fs::exists(dir / "balance.json"));
  CHECK(!fs::exists(dir / "manifest.json"));

  std::string manifest = run_pipeline(cfg);
  CHECK(fs::exists(dir / "balance.json"));
  CHECK(fs::exists(dir / "dr_results.csv"));
  CHECK(fs::exists(dir / "sensitivity.csv"));
  CHECK(fs::exists(dir / "results_table.csv"));
  CHECK(fs::exists(dir / "manifest.json"));
  CHECK(slurp(dir / "manifest.json") == manifest);
  fs::remove_all(dir);
}

TEST_CASE("the manifest records every analysis decision") {
  fs::path dir = fresh_dir("drmatch_manifest_test");
  PipelineConfig cfg = parse_config(R"({
    "generate": {"n": 400, "tau": 0.0, "seed": 10},
    "estimate": {"bootstrap": 49},
    "seed": 10
  })");
  cfg.out_dir = dir.string();
  std::string manifest = run_pipeline(cfg);
  auto j = json::parse(manifest);
  CHECK(j["tool"] == "drmatch");
  CHECK(j["seed"] == 10);
  REQUIRE(j.contains("decisions"));
  const auto& d = j["decisions"];
  for (const char* key :
       {"caliper_multiplier", "composite_w", "tie_breaking", "pi",
        "propensity_trim", "bootstrap_replicates", "ci", "winsorize_headline",
        "exact_enumeration_below", "smd_thresholds", "gamma_grid",
        "pos_rescale", "gower_missing", "onehot_reference", "family_rule",
        "set_expansion", "p_floor", "tie_ranks", "kde_bandwidth",
        "duplicate_rows", "control_anchor"})
    CHECK_MESSAGE(d.contains(key), "missing decision key: ", key);
  REQUIRE(j.contains("stages"));
  CHECK(j["stages"].size() == 10);
  for (const auto& s : j["stages"]) CHECK(s.contains("status"));
  fs::remove_all(dir);
}

TEST_CASE("reruns are byte-identical") {
  fs::path dir1 = fresh_dir("drmatch_rerun_a");
  fs::path dir2 = fresh_dir("drmatch_rerun_b");
  const char* text = R"({
    "generate": {"n": 200, "tau": 1.0, "seed": 12, "n_outcomes": 2},
    "estimate": {"bootstrap": 99},
    "seed": 12
  })";
  PipelineConfig a = parse_config(text);
  a.out_dir = dir1.string();
  PipelineConfig b = parse_config(text);
  b.out_dir = dir2.string();
  run_pipeline(a);
  run_pipeline(b);
  size_t checked = 0;
  for (const auto& entry : fs::directory_iterator(dir1)) {
    if (!entry.is_regular_file()) continue;
    ++checked;
    CHECK_MESSAGE(slurp(entry.path()) ==
                      slurp(dir2 / entry.path().filename()),
                  "artifact differs: ", entry.path().filename().string());
  }
  CHECK(checked >= 12);
  fs::remove_all(dir1);
  fs::remove_all(dir2);
}

TEST_CASE("a failing stage is reported by name") {
  // the file exists (so config validation passes) but the loader rejects it
  fs::path dir = fresh_dir("drmatch_fail_test");
  fs::create_directories(dir);
  fs::path bad = dir / "bad.csv";
  {
    std::ofstream out(bad);
    out << "a,b\n1,2\n";
  }
  REQUIRE(fs::exists(bad));
  PipelineConfig cfg = parse_config(
      "{\"input\": {\"cohort_csv\": \"" + bad.string() + "\"}, \"seed\": 1}");
  cfg.out_dir = (dir / "out").string();
  try {
    run_pipeline(cfg);
    FAIL("expected StageFailure");
  } catch (const StageFailure& e) {
    CHECK(std::string(stage_name(e.stage())) == "load");
  }
  fs::remove_all(dir);
}

TEST_SUITE_END();
