#pragma once

#include <string>
#include <vector>

#include "estimator.hpp"
#include "matcher.hpp"
#include "propensity.hpp"
#include "synthcohort.hpp"
#include "table.hpp"

namespace drmatch {

enum class Stage {
  Load,
  Collapse,
  Classify,
  Align,
  Propensity,
  CommonSupport,
  Match,
  Balance,
  Estimate,
  Sensitivity,
};

const char* stage_name(Stage s);

struct PipelineConfig {
  // either a cohort file or a generator spec must be present
  std::string cohort_csv;
  std::string interventions_csv;
  std::string pos_daily_csv;
  std::string snapshots_csv;
  bool has_generate = false;
  DgpSpec dgp;
  bool emit_align_files = false;

  SchemaConfig schema;
  PropensityOptions propensity;
  MatchSpec match;
  EstimateOptions estimate;
  std::vector<double> gamma_grid = {1.0, 1.25, 1.5, 2.0, 2.5};
  double alpha = 0.05;
  std::vector<std::string> density_variables;  // default: score + PoS

  std::uint64_t seed = 0;
  int jobs = 1;
  std::string out_dir = "out";
};

// throws Error(ConfigError) with the offending key in the message
PipelineConfig parse_config(const std::string& json_text);
PipelineConfig load_config(const std::string& path);

// structural checks beyond parsing (input presence etc.)
void validate_config(const PipelineConfig& cfg);

// Thrown when a stage fails: carries the stage for structured reporting.
class StageFailure : public Error {
 public:
  StageFailure(Stage stage, const Error& cause)
      : Error(cause.code(), cause.what()), stage_(stage) {}
  Stage stage() const noexcept { return stage_; }

 private:
  Stage stage_;
};

// Runs stages Load..`through`, writing each stage's artifacts into
// cfg.out_dir. Returns the manifest JSON (written to manifest.json only
// for a full run). Deterministic: a rerun with the same config writes
// byte-identical artifacts.
std::string run_pipeline(const PipelineConfig& cfg,
                         Stage through = Stage::Sensitivity);

}  // namespace drmatch
