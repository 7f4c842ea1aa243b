/* aerotrack shared-library C API.
 *
 * All functionality is reached through an opaque pipeline handle: load or
 * override configuration, run stages, query metrics. Functions return 0 on
 * success or one of the AT_ERR_* codes; at_pipeline_error() returns the
 * message of the most recent failure on that handle.
 */
#ifndef AEROTRACK_C_H
#define AEROTRACK_C_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef struct at_pipeline at_pipeline;

enum {
  AT_OK = 0,
  AT_ERR_INTERNAL = 1,
  AT_ERR_CONFIG = 2,
  AT_ERR_IO = 3,
  AT_ERR_NUMERIC = 4
};

const char* at_version(void);

at_pipeline* at_pipeline_new(void);
void at_pipeline_free(at_pipeline* p);

/* Overlays a config file (defaults + file contents). */
int at_pipeline_load_config(at_pipeline* p, const char* path);

/* Sets one dotted key, e.g. at_pipeline_set(p, "mot.gate", "11.34"). */
int at_pipeline_set(at_pipeline* p, const char* key, const char* value);

/* Writes the full "key = value" dump into buf (NUL terminated). *needed
 * receives the required size including the terminator; returns AT_OK even
 * when truncated so callers can resize and retry. */
int at_pipeline_dump_config(const at_pipeline* p, char* buf, size_t cap, size_t* needed);

/* stage: synth|detect|track|finish|plot|classify|eval|pipeline|gradcheck */
int at_pipeline_run(at_pipeline* p, const char* stage);

/* Message of the last failed call on this handle ("" when none). */
const char* at_pipeline_error(const at_pipeline* p);

/* Metric produced by previous stages (e.g. "pose_mse", "seq_mse_0",
 * "classification_accuracy", "det_accuracy", "det_recall",
 * "gradcheck_max_rel_err", "runtime.synth"). Returns AT_ERR_CONFIG when the
 * metric does not exist. */
int at_pipeline_metric(const at_pipeline* p, const char* name, double* out);

#ifdef __cplusplus
}
#endif

#endif /* AEROTRACK_C_H */
