#include "drmatch.h"

#include <cstring>
#include <string>

#include "pipeline.hpp"

namespace {

thread_local std::string g_error;
thread_local std::string g_stage;
thread_local int g_status = DRM_OK;

void clear_error() {
  g_error.clear();
  g_stage.clear();
  g_status = DRM_OK;
}

int to_status(drmatch::Status code) {
  switch (code) {
    case drmatch::Status::Ok: return DRM_OK;
    case drmatch::Status::ConfigError:
    case drmatch::Status::InvalidSpec: return DRM_CONFIG_ERROR;
    default: return DRM_STAGE_ERROR;
  }
}

char* copy_string(const std::string& s) {
  char* out = new (std::nothrow) char[s.size() + 1];
  if (!out) return nullptr;
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

// runs fn, routing any exception into the thread-local error state
template <class Fn>
auto guarded(Fn&& fn) -> decltype(fn()) {
  clear_error();
  try {
    return fn();
  } catch (const drmatch::StageFailure& e) {
    g_error = e.what();
    g_stage = drmatch::stage_name(e.stage());
    g_status = e.code() == drmatch::Status::ConfigError ? DRM_CONFIG_ERROR
                                                        : DRM_STAGE_ERROR;
  } catch (const drmatch::Error& e) {
    g_error = e.what();
    g_status = to_status(e.code());
  } catch (const std::exception& e) {
    g_error = e.what();
    g_status = DRM_ERROR;
  }
  return decltype(fn())();
}

drmatch::Stage stage_from_name(const char* name, bool* ok) {
  *ok = true;
  if (!name || !*name) return drmatch::Stage::Sensitivity;
  using drmatch::Stage;
  for (Stage s : {Stage::Load, Stage::Collapse, Stage::Classify, Stage::Align,
                  Stage::Propensity, Stage::CommonSupport, Stage::Match,
                  Stage::Balance, Stage::Estimate, Stage::Sensitivity})
    if (std::strcmp(name, drmatch::stage_name(s)) == 0) return s;
  *ok = false;
  return Stage::Sensitivity;
}

}  // namespace

struct drm_config {
  drmatch::PipelineConfig cfg;
};

extern "C" {

const char* drm_version(void) { return "0.1.0"; }

const char* drm_last_error(void) { return g_error.c_str(); }

int drm_last_status(void) { return g_status; }

const char* drm_last_stage(void) { return g_stage.c_str(); }

void drm_string_free(char* s) { delete[] s; }

drm_config* drm_config_parse(const char* config_json) {
  if (!config_json) {
    g_error = "config_json is NULL";
    g_status = DRM_CONFIG_ERROR;
    return nullptr;
  }
  return guarded([&]() -> drm_config* {
    return new drm_config{drmatch::parse_config(config_json)};
  });
}

drm_config* drm_config_load(const char* config_path) {
  if (!config_path) {
    g_error = "config_path is NULL";
    g_status = DRM_CONFIG_ERROR;
    return nullptr;
  }
  return guarded([&]() -> drm_config* {
    return new drm_config{drmatch::load_config(config_path)};
  });
}

void drm_config_free(drm_config* cfg) { delete cfg; }

int drm_config_validate(const drm_config* cfg) {
  if (!cfg) {
    g_error = "cfg is NULL";
    return g_status = DRM_CONFIG_ERROR;
  }
  guarded([&]() { drmatch::validate_config(cfg->cfg); });
  return g_status;
}

int drm_config_set_seed(drm_config* cfg, uint64_t seed) {
  if (!cfg) {
    g_error = "cfg is NULL";
    return g_status = DRM_CONFIG_ERROR;
  }
  clear_error();
  cfg->cfg.seed = seed;
  cfg->cfg.estimate.seed = seed;
  if (cfg->cfg.has_generate) cfg->cfg.dgp.seed = seed;
  return DRM_OK;
}

int drm_config_set_jobs(drm_config* cfg, int jobs) {
  if (!cfg || jobs < 1) {
    g_error = !cfg ? "cfg is NULL" : "jobs must be >= 1";
    return g_status = DRM_CONFIG_ERROR;
  }
  clear_error();
  cfg->cfg.jobs = jobs;
  return DRM_OK;
}

int drm_config_set_output_dir(drm_config* cfg, const char* dir) {
  if (!cfg || !dir || !*dir) {
    g_error = !cfg ? "cfg is NULL" : "dir must be non-empty";
    return g_status = DRM_CONFIG_ERROR;
  }
  clear_error();
  cfg->cfg.out_dir = dir;
  return DRM_OK;
}

char* drm_config_output_dir(const drm_config* cfg) {
  if (!cfg) {
    g_error = "cfg is NULL";
    g_status = DRM_CONFIG_ERROR;
    return nullptr;
  }
  clear_error();
  return copy_string(cfg->cfg.out_dir);
}

int drm_stage_names(const char** names, int capacity) {
  using drmatch::Stage;
  static const Stage order[] = {
      Stage::Load,       Stage::Collapse, Stage::Classify,
      Stage::Align,      Stage::Propensity, Stage::CommonSupport,
      Stage::Match,      Stage::Balance,  Stage::Estimate,
      Stage::Sensitivity};
  const int n = static_cast<int>(sizeof(order) / sizeof(order[0]));
  if (names)
    for (int i = 0; i < n && i < capacity; ++i)
      names[i] = drmatch::stage_name(order[i]);
  return n;
}

char* drm_run(const drm_config* cfg, const char* through) {
  if (!cfg) {
    g_error = "cfg is NULL";
    g_status = DRM_CONFIG_ERROR;
    return nullptr;
  }
  bool ok = false;
  drmatch::Stage stop = stage_from_name(through, &ok);
  if (!ok) {
    g_error = std::string("unknown stage '") + through + "'";
    g_status = DRM_CONFIG_ERROR;
    return nullptr;
  }
  return guarded([&]() -> char* {
    return copy_string(drmatch::run_pipeline(cfg->cfg, stop));
  });
}

char* drm_run_json(const char* config_json, const char* through) {
  drm_config* cfg = drm_config_parse(config_json);
  if (!cfg) return nullptr;
  char* out = drm_run(cfg, through);
  int status = g_status;
  std::string error = g_error, stage = g_stage;
  drm_config_free(cfg);
  g_status = status;
  g_error = std::move(error);
  g_stage = std::move(stage);
  return out;
}

}  // extern "C"
