#include "pipeline.hpp"

#include <Eigen/Core>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "align.hpp"
#include "balance.hpp"
#include "report.hpp"
#include "sensitivity.hpp"
#include "stats.hpp"

namespace drmatch {

const char* stage_name(Stage s) {
  switch (s) {
    case Stage::Load: return "load";
    case Stage::Collapse: return "collapse";
    case Stage::Classify: return "classify";
    case Stage::Align: return "align";
    case Stage::Propensity: return "propensity";
    case Stage::CommonSupport: return "common_support";
    case Stage::Match: return "match";
    case Stage::Balance: return "balance";
    case Stage::Estimate: return "estimate";
    case Stage::Sensitivity: return "sensitivity";
  }
  return "?";
}

namespace {

[[noreturn]] void config_fail(const std::string& msg) {
  fail(Status::ConfigError, "config: " + msg);
}

double num_or(const json& j, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number()) config_fail(std::string(key) + " must be a number");
  return j[key].get<double>();
}

std::uint64_t uint_or(const json& j, const char* key, std::uint64_t fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number_unsigned() && !j[key].is_number_integer())
    config_fail(std::string(key) + " must be an integer");
  auto v = j[key].get<long long>();
  if (v < 0) config_fail(std::string(key) + " must be >= 0");
  return static_cast<std::uint64_t>(v);
}

int int_or(const json& j, const char* key, int fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number_integer() && !j[key].is_number_unsigned())
    config_fail(std::string(key) + " must be an integer");
  return j[key].get<int>();
}

bool bool_or(const json& j, const char* key, bool fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_boolean()) config_fail(std::string(key) + " must be a boolean");
  return j[key].get<bool>();
}

std::string str_or(const json& j, const char* key, const std::string& fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_string()) config_fail(std::string(key) + " must be a string");
  return j[key].get<std::string>();
}

void check_keys(const json& j, const char* where,
                std::initializer_list<const char*> allowed) {
  if (!j.is_object()) config_fail(std::string(where) + " must be an object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed)
      if (key == a) {
        ok = true;
        break;
      }
    if (!ok) config_fail("unknown key '" + key + "' in " + where);
  }
}

}  // namespace

PipelineConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const std::exception& e) {
    config_fail(std::string("not valid JSON: ") + e.what());
  }
  check_keys(j, "top level",
             {"input", "generate", "schema", "propensity", "match", "estimate",
              "sensitivity", "report", "seed", "jobs", "output_dir"});

  PipelineConfig cfg;
  cfg.seed = uint_or(j, "seed", 0);
  cfg.jobs = int_or(j, "jobs", 1);
  if (cfg.jobs < 1) config_fail("jobs must be >= 1");
  const char* env_out = std::getenv("DRMATCH_OUT_DIR");
  cfg.out_dir = str_or(j, "output_dir", env_out && *env_out ? env_out : "out");
  if (cfg.out_dir.empty()) config_fail("output_dir must be non-empty");

  if (j.contains("input")) {
    const json& in = j["input"];
    check_keys(in, "input",
               {"cohort_csv", "interventions_csv", "pos_daily_csv",
                "snapshots_csv"});
    cfg.cohort_csv = str_or(in, "cohort_csv", "");
    cfg.interventions_csv = str_or(in, "interventions_csv", "");
    cfg.pos_daily_csv = str_or(in, "pos_daily_csv", "");
    cfg.snapshots_csv = str_or(in, "snapshots_csv", "");
  }

  if (j.contains("generate")) {
    const json& g = j["generate"];
    check_keys(g, "generate",
               {"n", "tau", "confounding", "overlap", "ghost_fraction",
                "programmes", "family", "propensity_form", "outcome_form",
                "treated_fraction", "n_outcomes", "year", "seed",
                "emit_align_files"});
    cfg.has_generate = true;
    DgpSpec& d = cfg.dgp;
    d.n = static_cast<size_t>(uint_or(g, "n", 2000));
    d.tau = num_or(g, "tau", 0.0);
    d.confounding = num_or(g, "confounding", 1.0);
    d.overlap = num_or(g, "overlap", 1.0);
    d.ghost_fraction = num_or(g, "ghost_fraction", 0.0);
    d.programmes = int_or(g, "programmes", 6);
    std::string fam = str_or(g, "family", "gaussian");
    if (fam == "gaussian") d.primary_family = Family::Gaussian;
    else if (fam == "poisson") d.primary_family = Family::Poisson;
    else config_fail("generate.family must be gaussian|poisson");
    std::string pf = str_or(g, "propensity_form", "linear");
    if (pf != "linear" && pf != "nonlinear")
      config_fail("generate.propensity_form must be linear|nonlinear");
    d.nonlinear_propensity = pf == "nonlinear";
    std::string of = str_or(g, "outcome_form", "linear");
    if (of != "linear" && of != "nonlinear")
      config_fail("generate.outcome_form must be linear|nonlinear");
    d.nonlinear_outcome = of == "nonlinear";
    d.treated_fraction = num_or(g, "treated_fraction", 0.2);
    d.n_outcomes = int_or(g, "n_outcomes", 1);
    d.year = int_or(g, "year", 2024);
    d.seed = uint_or(g, "seed", cfg.seed);
    cfg.emit_align_files = bool_or(g, "emit_align_files", false);
  }

  if (j.contains("schema")) {
    const json& s = j["schema"];
    check_keys(s, "schema",
               {"id", "year", "treatment", "pos", "outcomes", "blocking",
                "role_overrides", "numeric_fraction_threshold", "min_distinct",
                "interactions"});
    SchemaConfig& sc = cfg.schema;
    sc.id_column = str_or(s, "id", sc.id_column);
    sc.year_column = str_or(s, "year", sc.year_column);
    sc.treatment_column = str_or(s, "treatment", sc.treatment_column);
    sc.pos_column = str_or(s, "pos", sc.pos_column);
    if (s.contains("outcomes")) {
      if (!s["outcomes"].is_array()) config_fail("schema.outcomes must be an array");
      for (const auto& o : s["outcomes"]) {
        if (o.is_string()) {
          sc.outcomes.push_back({o.get<std::string>(), ""});
        } else if (o.is_object()) {
          check_keys(o, "schema.outcomes[]", {"name", "domain"});
          if (!o.contains("name")) config_fail("outcome entry needs a name");
          sc.outcomes.push_back(
              {o["name"].get<std::string>(), str_or(o, "domain", "")});
        } else {
          config_fail("schema.outcomes entries must be strings or objects");
        }
      }
    }
    if (s.contains("blocking")) {
      if (!s["blocking"].is_array()) config_fail("schema.blocking must be an array");
      for (const auto& b : s["blocking"]) {
        if (!b.is_string()) config_fail("schema.blocking entries must be strings");
        sc.blocking.push_back(b.get<std::string>());
      }
    }
    if (s.contains("role_overrides")) {
      if (!s["role_overrides"].is_object())
        config_fail("schema.role_overrides must be an object");
      for (const auto& [name, role] : s["role_overrides"].items()) {
        if (!role.is_string()) config_fail("role override must be a string");
        std::string r = role.get<std::string>();
        if (r == "matching") sc.role_overrides[name] = Role::Matching;
        else if (r == "blocking") sc.role_overrides[name] = Role::Blocking;
        else if (r == "outcome_adjust_only")
          sc.role_overrides[name] = Role::OutcomeAdjustOnly;
        else
          config_fail("role for '" + name +
                      "' must be matching|blocking|outcome_adjust_only");
      }
    }
    sc.numeric_fraction_threshold =
        num_or(s, "numeric_fraction_threshold", sc.numeric_fraction_threshold);
    sc.min_distinct = int_or(s, "min_distinct", sc.min_distinct);
    if (s.contains("interactions")) {
      if (!s["interactions"].is_array())
        config_fail("schema.interactions must be an array of pairs");
      for (const auto& pair : s["interactions"]) {
        if (!pair.is_array() || pair.size() != 2 || !pair[0].is_string() ||
            !pair[1].is_string())
          config_fail("each interaction must be a pair of covariate names");
        sc.interactions.emplace_back(pair[0].get<std::string>(),
                                     pair[1].get<std::string>());
      }
    }
  } else if (cfg.has_generate) {
    cfg.schema = generated_schema(cfg.dgp);
  }

  if (j.contains("propensity")) {
    const json& p = j["propensity"];
    check_keys(p, "propensity", {"epsilon", "max_iter", "tol"});
    cfg.propensity.epsilon = num_or(p, "epsilon", cfg.propensity.epsilon);
    cfg.propensity.glm.max_iter = int_or(p, "max_iter", cfg.propensity.glm.max_iter);
    cfg.propensity.glm.tol = num_or(p, "tol", cfg.propensity.glm.tol);
  }
  cfg.propensity.interactions = cfg.schema.interactions;

  if (j.contains("match")) {
    const json& m = j["match"];
    check_keys(m, "match",
               {"m", "caliper_multiplier", "w", "with_replacement",
                "per_block_caliper"});
    cfg.match.m = int_or(m, "m", cfg.match.m);
    cfg.match.caliper_multiplier =
        num_or(m, "caliper_multiplier", cfg.match.caliper_multiplier);
    cfg.match.w = num_or(m, "w", cfg.match.w);
    cfg.match.with_replacement =
        bool_or(m, "with_replacement", cfg.match.with_replacement);
    cfg.match.per_block_caliper =
        bool_or(m, "per_block_caliper", cfg.match.per_block_caliper);
  }

  if (j.contains("estimate")) {
    const json& e = j["estimate"];
    check_keys(e, "estimate",
               {"bootstrap", "alpha", "winsorize", "trim", "block_bootstrap"});
    cfg.estimate.bootstrap = int_or(e, "bootstrap", cfg.estimate.bootstrap);
    cfg.estimate.alpha = num_or(e, "alpha", cfg.estimate.alpha);
    cfg.estimate.winsorize = bool_or(e, "winsorize", cfg.estimate.winsorize);
    cfg.estimate.block_bootstrap =
        bool_or(e, "block_bootstrap", cfg.estimate.block_bootstrap);
    if (e.contains("trim")) {
      const json& tr = e["trim"];
      if (!tr.is_array() || tr.size() != 2 || !tr[0].is_number() ||
          !tr[1].is_number())
        config_fail("estimate.trim must be [low, high]");
      cfg.estimate.trim_low = tr[0].get<double>();
      cfg.estimate.trim_high = tr[1].get<double>();
    }
  }
  cfg.estimate.seed = cfg.seed;

  if (j.contains("sensitivity")) {
    const json& s = j["sensitivity"];
    check_keys(s, "sensitivity", {"gamma_grid", "alpha"});
    if (s.contains("gamma_grid")) {
      if (!s["gamma_grid"].is_array())
        config_fail("sensitivity.gamma_grid must be an array");
      cfg.gamma_grid.clear();
      for (const auto& g : s["gamma_grid"]) {
        if (!g.is_number()) config_fail("gamma values must be numbers");
        cfg.gamma_grid.push_back(g.get<double>());
      }
    }
    cfg.alpha = num_or(s, "alpha", cfg.alpha);
  }

  if (j.contains("report")) {
    const json& r = j["report"];
    check_keys(r, "report", {"density_variables"});
    if (r.contains("density_variables")) {
      if (!r["density_variables"].is_array())
        config_fail("report.density_variables must be an array");
      for (const auto& v : r["density_variables"]) {
        if (!v.is_string()) config_fail("density variables must be strings");
        cfg.density_variables.push_back(v.get<std::string>());
      }
    }
  }
  if (cfg.density_variables.empty())
    cfg.density_variables = {"propensity_score", cfg.schema.pos_column};

  return cfg;
}

PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Status::ConfigError, "config: cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

void validate_config(const PipelineConfig& cfg) {
  if (cfg.cohort_csv.empty() && !cfg.has_generate)
    config_fail("needs input.cohort_csv or a generate block");
  if (!cfg.cohort_csv.empty() && !std::filesystem::exists(cfg.cohort_csv))
    config_fail("input.cohort_csv does not exist: " + cfg.cohort_csv);
  for (const std::string* p :
       {&cfg.interventions_csv, &cfg.pos_daily_csv, &cfg.snapshots_csv})
    if (!p->empty() && !std::filesystem::exists(*p))
      config_fail("input file does not exist: " + *p);
  if (cfg.interventions_csv.empty() != cfg.pos_daily_csv.empty())
    config_fail("interventions_csv and pos_daily_csv must be given together");
  if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0))
    config_fail("alpha must lie in (0,1)");
  for (double g : cfg.gamma_grid)
    if (!(g >= 1.0)) config_fail("gamma grid values must be >= 1");
  if (!(cfg.estimate.trim_low >= 0.0 &&
        cfg.estimate.trim_low < cfg.estimate.trim_high &&
        cfg.estimate.trim_high <= 1.0))
    config_fail("estimate.trim must satisfy 0 <= low < high <= 1");
  if (cfg.estimate.bootstrap < 1) config_fail("estimate.bootstrap must be >= 1");
}

namespace {

json decisions_json(const PipelineConfig& cfg) {
  json d;
  d["numeric_fraction_threshold"] = cfg.schema.numeric_fraction_threshold;
  d["min_distinct"] = cfg.schema.min_distinct;
  d["pos_window"] = "calendar_month_before_intervention";
  d["pos_aggregation"] = "mean_of_window_days";
  d["control_anchor"] = "modal_treated_window_month_per_block_year_tie_earliest";
  d["snapshot_default"] = "dec31_of_prior_year";
  d["impute_numeric"] = "block_year_median_then_global_median";
  d["impute_categorical"] = "explicit_unknown_level";
  d["missing_indicator_suffix"] = "__miss";
  d["duplicate_rows"] = "first_non_missing_wins";
  d["epsilon"] = cfg.propensity.epsilon;
  d["irls_max_iter"] = cfg.propensity.glm.max_iter;
  d["irls_tol"] = cfg.propensity.glm.tol;
  d["irls_max_halvings"] = cfg.propensity.glm.max_halvings;
  d["onehot_reference"] = "lexicographically_smallest_level";
  d["standardization"] = "internal_zscore_coefficients_mapped_back";
  json inter = json::array();
  for (const auto& [a, b] : cfg.schema.interactions)
    inter.push_back(json::array({a, b}));
  d["interactions"] = inter;
  d["m"] = cfg.match.m;
  d["caliper_multiplier"] = cfg.match.caliper_multiplier;
  d["caliper_scope"] = cfg.match.per_block_caliper ? "per_block" : "global";
  d["composite_w"] = cfg.match.w;
  d["with_replacement"] = cfg.match.with_replacement;
  d["treated_order"] = "ascending_id";
  d["tie_breaking"] = "distance_then_logit_gap_then_control_id";
  d["gower_missing"] = "pairwise_exclusion";
  d["pos_rescale"] = "minmax_on_trimmed_sample_degenerate_half";
  d["balance_weighting"] = "control_multiplicity";
  d["smd_thresholds"] = json::array({0.10, 0.25});
  d["family_rule"] = "treated_arm_nonnegative_integers";
  d["family_integer_tol"] = 1e-8;
  d["poisson_failure"] = "least_squares_fallback";
  d["set_expansion"] = "controls_weighted_one_over_k";
  d["pi"] = "treated_share_of_expanded_observations";
  d["propensity_trim"] =
      json::array({cfg.estimate.trim_low, cfg.estimate.trim_high});
  d["bootstrap_replicates"] = cfg.estimate.bootstrap;
  d["bootstrap_unit"] =
      cfg.estimate.block_bootstrap ? "matched_set_within_block" : "matched_set";
  d["ci"] = "percentile_type7";
  d["alpha"] = cfg.estimate.alpha;
  d["p_floor"] = "two_over_b_plus_one";
  d["winsorize_headline"] = cfg.estimate.winsorize;
  d["winsor_bounds"] =
      json::array({cfg.estimate.winsor_low, cfg.estimate.winsor_high});
  d["hc0"] = "reported_only_inference_via_bootstrap";
  d["exact_enumeration_below"] = 8;
  d["continuity_correction"] = 0.5;
  d["tie_ranks"] = "average";
  json grid = json::array();
  for (double g : cfg.gamma_grid) grid.push_back(g);
  d["gamma_grid"] = grid;
  d["sensitivity_alpha"] = cfg.alpha;
  d["kde_bandwidth"] = "silverman_0.9_min_sd_iqr_over_1.34";
  d["kde_grid_points"] = 200;
  d["seed"] = cfg.seed;
  d["jobs"] = cfg.jobs;
  return d;
}

json versions_json() {
  json v;
  v["drmatch"] = "0.1.0";
  v["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." +
               std::to_string(EIGEN_MAJOR_VERSION) + "." +
               std::to_string(EIGEN_MINOR_VERSION);
  v["nlohmann_json"] = std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                       std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                       std::to_string(NLOHMANN_JSON_VERSION_PATCH);
  return v;
}

}  // namespace

std::string run_pipeline(const PipelineConfig& cfg, Stage through) {
  validate_config(cfg);
  namespace fs = std::filesystem;
  fs::create_directories(cfg.out_dir);
  auto out_path = [&](const std::string& name) {
    return (fs::path(cfg.out_dir) / name).string();
  };

  json manifest;
  manifest["tool"] = "drmatch";
  manifest["versions"] = versions_json();
  manifest["seed"] = cfg.seed;
  json stages = json::array();
  std::vector<std::string> artifacts;
  auto emit = [&](const std::string& name, const std::string& content) {
    write_file(out_path(name), content);
    artifacts.push_back(name);
  };

  Stage current = Stage::Load;
  try {
    // ---- load ----------------------------------------------------------
    current = Stage::Load;
    std::string cohort_path = cfg.cohort_csv;
    if (cfg.has_generate && cohort_path.empty()) {
      Generated gen = generate_cohort(cfg.dgp);
      emit("cohort.csv", serialize_cohort(gen.cohort));
      emit("ground_truth.json", ground_truth_json(gen.truth));
      if (cfg.emit_align_files) {
        AlignFixture fx = make_align_fixture(gen.cohort, cfg.dgp);
        emit("interventions.csv", fx.interventions_csv);
        emit("pos_daily.csv", fx.pos_daily_csv);
      }
      cohort_path = out_path("cohort.csv");
    }
    LoadReport load_rep;
    CohortTable table = load_cohort_file(cohort_path, cfg.schema, &load_rep);
    {
      json s;
      s["name"] = "load";
      s["status"] = "ok";
      s["rows"] = table.n();
      s["source"] = cfg.has_generate && cfg.cohort_csv.empty() ? "generated"
                                                               : "file";
      s["warnings"] = warnings_json(load_rep.warnings);
      stages.push_back(s);
    }
    if (through == Stage::Load) goto done;

    // ---- collapse ------------------------------------------------------
    {
      current = Stage::Collapse;
      size_t merged = 0;
      table = collapse_duplicates(table, &merged);
      json s;
      s["name"] = "collapse";
      s["status"] = "ok";
      s["rows_merged"] = merged;
      s["rows"] = table.n();
      stages.push_back(s);
    }
    if (through == Stage::Collapse) goto done;

    // ---- classify ------------------------------------------------------
    {
      current = Stage::Classify;
      std::vector<Warning> warnings;
      table.schema = classify_covariates(table, cfg.schema, &warnings);
      json cov = json::array();
      for (const auto& e : table.schema.entries)
        cov.push_back({{"name", e.name},
                       {"kind", kind_name(e.kind)},
                       {"role", role_name(e.role)}});
      json s;
      s["name"] = "classify";
      s["status"] = "ok";
      s["covariates"] = cov;
      s["warnings"] = warnings_json(warnings);
      stages.push_back(s);
    }
    if (through == Stage::Classify) goto done;

    // ---- align (temporal alignment + imputation) ------------------------
    {
      current = Stage::Align;
      json s;
      s["name"] = "align";
      std::string iv = cfg.interventions_csv, pd = cfg.pos_daily_csv;
      if (cfg.has_generate && cfg.emit_align_files && iv.empty()) {
        iv = out_path("interventions.csv");
        pd = out_path("pos_daily.csv");
      }
      if (!iv.empty()) {
        AlignInputs inputs = load_align_inputs(iv, pd, cfg.snapshots_csv);
        AlignReport rep;
        table = align_pretreatment(table, inputs, &rep);
        s["status"] = "ok";
        s["treated_aligned"] = rep.n_treated_aligned;
        s["controls_aligned"] = rep.n_controls_aligned;
        s["controls_unanchored"] = rep.n_controls_unanchored;
        s["warnings"] = warnings_json(rep.warnings);
      } else {
        s["status"] = "skipped";
        s["reason"] = "no intervention/PoS inputs; pos column used as given";
      }
      ImputeReport imp;
      table = impute_missing(table, &imp);
      s["numeric_imputed"] = imp.n_numeric_imputed;
      s["categorical_filled"] = imp.n_categorical_filled;
      json ind = json::array();
      for (const auto& c : imp.indicator_columns) ind.push_back(c);
      s["indicator_columns"] = ind;
      stages.push_back(s);
    }
    if (through == Stage::Align) goto done;

    {
      // ---- propensity ----------------------------------------------------
      current = Stage::Propensity;
      PropensityFit fit = fit_propensity(table, cfg.propensity);
      {
        json s;
        s["name"] = "propensity";
        s["status"] = "ok";
        s["iterations"] = fit.iterations;
        s["coefficients"] = fit.coef_names.size();
        s["warnings"] = warnings_json(fit.warnings);
        stages.push_back(s);
      }
      if (through == Stage::Propensity) {
        emit("propensity.json", propensity_json(table, fit));
        emit("scores.csv", scores_csv(table, fit));
        goto done;
      }

      // ---- common support ------------------------------------------------
      current = Stage::CommonSupport;
      common_support(fit, table);
      emit("propensity.json", propensity_json(table, fit));
      emit("scores.csv", scores_csv(table, fit));
      {
        json s;
        s["name"] = "common_support";
        s["status"] = "ok";
        s["low"] = json_num(fit.support_low);
        s["high"] = json_num(fit.support_high);
        s["trimmed_treated"] = fit.n_trimmed_treated;
        s["trimmed_control"] = fit.n_trimmed_control;
        stages.push_back(s);
      }
      if (through == Stage::CommonSupport) goto done;

      // ---- match ----------------------------------------------------------
      current = Stage::Match;
      MatchedSample ms = match(table, fit, cfg.match);
      emit("matched_pairs.json", matched_pairs_json(table, ms));
      emit("matched_wide.csv", matched_wide_csv(table, ms));
      {
        json s;
        s["name"] = "match";
        s["status"] = "ok";
        s["sets"] = ms.sets.size();
        s["caliper_width"] = json_num(ms.caliper_width);
        s["treated_unmatched"] = ms.n_treated_unmatched;
        s["warnings"] = warnings_json(ms.warnings);
        stages.push_back(s);
      }
      if (through == Stage::Match) goto done;

      // ---- balance ----------------------------------------------------------
      current = Stage::Balance;
      BalanceReport bal = balance_report(table, ms);
      emit("balance_long.csv", balance_csv(bal));
      emit("balance.json", balance_json(bal));
      {
        json s;
        s["name"] = "balance";
        s["status"] = "ok";
        s["worst_after"] = json_num(bal.worst_after());
        s["n_large_after"] = bal.n_large_after;
        s["warnings"] = warnings_json(bal.warnings);
        stages.push_back(s);
      }
      if (through == Stage::Balance) goto done;

      // ---- estimate ----------------------------------------------------------
      current = Stage::Estimate;
      if (table.outcomes.empty())
        fail(Status::InvalidSpec, "no outcome columns configured");
      std::vector<DrResult> results(table.outcomes.size());
      {
        int jobs = std::max(1, cfg.jobs);
        if (jobs == 1) {
          for (size_t k = 0; k < table.outcomes.size(); ++k)
            results[k] =
                estimate_outcome(table, ms, table.outcomes[k].name, cfg.estimate);
        } else {
          // outcomes are independent and each draws keyed substreams, so
          // splitting them across threads cannot change any number
          std::vector<std::thread> pool;
          std::atomic<size_t> next{0};
          std::vector<std::exception_ptr> errors(jobs);
          for (int w = 0; w < jobs; ++w)
            pool.emplace_back([&, w]() {
              try {
                for (size_t k = next.fetch_add(1); k < table.outcomes.size();
                     k = next.fetch_add(1))
                  results[k] = estimate_outcome(table, ms,
                                                table.outcomes[k].name,
                                                cfg.estimate);
              } catch (...) {
                errors[w] = std::current_exception();
              }
            });
          for (auto& th : pool) th.join();
          for (auto& e : errors)
            if (e) std::rethrow_exception(e);
        }
      }
      emit("dr_results.csv", dr_results_csv(results));
      emit("dr_results.json", dr_results_json(results));
      {
        json s;
        s["name"] = "estimate";
        s["status"] = "ok";
        s["outcomes"] = results.size();
        s["bootstrap"] = cfg.estimate.bootstrap;
        stages.push_back(s);
      }
      if (through == Stage::Estimate) goto done;

      // ---- sensitivity + report artifacts ----------------------------------
      current = Stage::Sensitivity;
      SensitivityTable sens = sensitivity_for_significant(
          results, table, ms, cfg.gamma_grid, cfg.alpha);
      emit("sensitivity.csv", sensitivity_csv(sens));
      emit("sensitivity.json", sensitivity_json(sens));
      emit("results_table.csv", results_table_csv(results, sens));
      emit("results_table.json", results_table_json(results, sens));
      for (const auto& var : cfg.density_variables)
        emit("density_" + var + ".csv", density_csv(table, ms, var));
      {
        json s;
        s["name"] = "sensitivity";
        s["status"] = "ok";
        s["rows"] = sens.rows.size();
        s["warnings"] = warnings_json(sens.warnings);
        stages.push_back(s);
      }
    }
  } catch (const StageFailure&) {
    throw;
  } catch (const Error& e) {
    throw StageFailure(current, e);
  } catch (const std::exception& e) {
    throw StageFailure(current, Error(Status::InternalError, e.what()));
  }

done:
  manifest["stages"] = stages;
  manifest["decisions"] = decisions_json(cfg);
  json arts = json::array();
  for (const auto& a : artifacts) arts.push_back(a);
  manifest["artifacts"] = arts;
  std::string text = manifest.dump(2) + "\n";
  if (through == Stage::Sensitivity) {
    write_file(out_path("manifest.json"), text);
  }
  return text;
}

}  // namespace drmatch
