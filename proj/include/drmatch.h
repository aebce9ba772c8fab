#ifndef DRMATCH_H
#define DRMATCH_H

/* C interface to the drmatch pipeline: blocked propensity-score matching
 * with a composite covariate/progression distance, doubly robust effect
 * estimation with set-level bootstrap inference, balance diagnostics and
 * sensitivity bounds.
 *
 * All functions are synchronous. Error state is thread-local: when a call
 * fails (NULL / nonzero return), drm_last_error() and drm_last_status()
 * describe the failure for the calling thread. Strings returned as char*
 * are heap copies owned by the caller; release them with drm_string_free().
 */

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

/* Broad outcome classes; fine-grained codes live in the error message. */
typedef enum drm_status {
  DRM_OK = 0,
  DRM_ERROR = 1,        /* internal / usage error                    */
  DRM_CONFIG_ERROR = 2, /* bad configuration (matches CLI exit code) */
  DRM_STAGE_ERROR = 3   /* a pipeline stage failed                   */
} drm_status;

/* Library version, e.g. "0.1.0". Static storage, do not free. */
const char* drm_version(void);

/* Message and status of the calling thread's most recent failure.
 * The message is valid until the thread's next drmatch call. */
const char* drm_last_error(void);
int drm_last_status(void);

/* Name of the stage a failed drm_run stopped in ("" when the failure was
 * not tied to a stage). Thread-local, same lifetime as drm_last_error. */
const char* drm_last_stage(void);

void drm_string_free(char* s);

/* ------------------------------------------------------------------ */

typedef struct drm_config drm_config; /* opaque parsed configuration */

/* Parse a configuration from JSON text or a file; NULL on error. */
drm_config* drm_config_parse(const char* config_json);
drm_config* drm_config_load(const char* config_path);
void drm_config_free(drm_config* cfg);

/* Structural validation beyond parsing (input presence, ranges).
 * Returns DRM_OK or DRM_CONFIG_ERROR. */
int drm_config_validate(const drm_config* cfg);

/* Override the seed / output directory from the command line. */
int drm_config_set_seed(drm_config* cfg, uint64_t seed);
int drm_config_set_jobs(drm_config* cfg, int jobs);
int drm_config_set_output_dir(drm_config* cfg, const char* dir);

/* Effective output directory (heap copy; drm_string_free). */
char* drm_config_output_dir(const drm_config* cfg);

/* Canonical stage names in execution order:
 *   load, collapse, classify, align, propensity, common_support,
 *   match, balance, estimate, sensitivity
 * Returns the count; names[i] are static strings when names != NULL. */
int drm_stage_names(const char** names, int capacity);

/* Run stages load..`through` (a stage name; NULL or "" runs everything),
 * writing artifacts into the configured output directory. Returns the
 * manifest JSON, or NULL with drm_last_status() DRM_CONFIG_ERROR /
 * DRM_STAGE_ERROR and drm_last_stage() naming the failed stage. */
char* drm_run(const drm_config* cfg, const char* through);

/* One-shot: parse, validate and run in a single call. */
char* drm_run_json(const char* config_json, const char* through);

#ifdef __cplusplus
}
#endif

#endif /* DRMATCH_H */
