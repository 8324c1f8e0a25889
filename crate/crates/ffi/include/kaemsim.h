#ifndef KAEMSIM_H
#define KAEMSIM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/**
 * Outcome of a call.
 */
typedef enum KsStatus {
  KS_STATUS_OK = 0,
  KS_STATUS_NULL_ARGUMENT = 1,
  KS_STATUS_INVALID_UTF8 = 2,
  KS_STATUS_SYNTAX_ERROR = 3,
  KS_STATUS_RUNTIME_ERROR = 4,
  KS_STATUS_PROTOCOL_ERROR = 5,
  KS_STATUS_DEVICE_ERROR = 6,
  KS_STATUS_INVALID_CONFIG = 7,
  KS_STATUS_OUT_OF_RANGE = 8,
  KS_STATUS_BUFFER_TOO_SMALL = 9,
  KS_STATUS_INTERNAL = 10,
} KsStatus;

/**
 * Opaque result of a run.
 */
typedef struct KsRun KsRun;

/**
 * Settings for [`ks_run_source`]. Obtain defaults from
 * [`ks_options_default`].
 */
typedef struct KsOptions {
  bool lna;
  double rtol;
  double atol;
  uint32_t points;
  bool device;
  uint64_t seed;
} KsOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Default options: no noise, tolerances 1e-6/1e-8, 1000 points, no device.
 */
struct KsOptions ks_options_default(void);

/**
 * Evaluates and simulates `source`. On success `*out` receives a handle
 * to free with [`ks_run_free`]. `options` may be null for defaults.
 */
enum KsStatus ks_run_source(const char *source,
                            const struct KsOptions *options,
                            struct KsRun **out);

/**
 * Parses and statically checks `source` without simulating. Either
 * count pointer may be null.
 */
enum KsStatus ks_check_source(const char *source, size_t *species, size_t *reactions);

/**
 * Releases a handle. Null is ignored.
 */
void ks_run_free(struct KsRun *run);

size_t ks_run_species_count(const struct KsRun *run);

size_t ks_run_reaction_count(const struct KsRun *run);

/**
 * Display name of species `index`, or null when out of range.
 */
const char *ks_run_species_name(const struct KsRun *run, size_t index);

/**
 * Number of completed simulations.
 */
size_t ks_run_timecourse_count(const struct KsRun *run);

/**
 * Output points of simulation `tc`.
 */
size_t ks_run_point_count(const struct KsRun *run, size_t tc);

/**
 * Copies the time grid of simulation `tc` into `buffer`.
 */
enum KsStatus ks_run_copy_times(const struct KsRun *run, size_t tc, double *buffer, size_t len);

/**
 * Copies the mean concentration of network species `species` over
 * simulation `tc`. Species absent from that simulation's sample yield
 * [`KsStatus::OutOfRange`].
 */
enum KsStatus ks_run_copy_means(const struct KsRun *run,
                                size_t tc,
                                size_t species,
                                double *buffer,
                                size_t len);

size_t ks_run_artifact_count(const struct KsRun *run);

/**
 * File name of artifact `index` (e.g. `run1.csv`), or null.
 */
const char *ks_run_artifact_name(const struct KsRun *run, size_t index);

/**
 * Contents of artifact `index`, or null.
 */
const char *ks_run_artifact_contents(const struct KsRun *run, size_t index);

/**
 * Frames in the device trace; zero when device mode was off.
 */
size_t ks_run_device_frame_count(const struct KsRun *run);

/**
 * Message of the last failure on this thread, or null. Valid until the
 * next call on this thread.
 */
const char *ks_last_error_message(void);

/**
 * Source line of the last failure, or 0 when it has none.
 */
uint32_t ks_last_error_line(void);

/**
 * Source column of the last failure, or 0 when it has none.
 */
uint32_t ks_last_error_column(void);

/**
 * Library version as a static string.
 */
const char *ks_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* KAEMSIM_H */
