/* C interface to the surftrace surface-tracing library.
* Generated by the build script; do not edit by hand. */

#ifndef SURFTRACE_H
#define SURFTRACE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every API call; zero means success.
 */
typedef enum SurftraceStatus {
  /**
   * The call succeeded.
   */
  SURFTRACE_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  SURFTRACE_STATUS_NULL_POINTER = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  SURFTRACE_STATUS_INVALID_UTF8 = 2,
  /**
   * A scenario file, override, or parameter set failed validation.
   */
  SURFTRACE_STATUS_INVALID_CONFIG = 3,
  /**
   * A file could not be read or written.
   */
  SURFTRACE_STATUS_IO = 4,
  /**
   * The probe never reached the surface, or the estimator was queried
   * without a usable force signal.
   */
  SURFTRACE_STATUS_NO_CONTACT = 5,
  /**
   * The closed loop left the sane region and was aborted.
   */
  SURFTRACE_STATUS_DIVERGED = 6,
  /**
   * A (near-)singular matrix or degenerate geometry query.
   */
  SURFTRACE_STATUS_NUMERICAL = 7,
  /**
   * An index argument was out of range.
   */
  SURFTRACE_STATUS_OUT_OF_RANGE = 8,
  /**
   * The library panicked internally; treat the handle as poisoned.
   */
  SURFTRACE_STATUS_PANIC = 9,
} SurftraceStatus;

/**
 * Opaque incremental normal/friction estimator for callers that run their
 * own control loop. Destroy with [`surftrace_estimator_free`].
 */
typedef struct SurftraceEstimator SurftraceEstimator;

/**
 * Opaque completed run: per-cycle records plus summary metrics. Destroy
 * with [`surftrace_run_free`].
 */
typedef struct SurftraceRun SurftraceRun;

/**
 * Opaque validated scenario. Create with [`surftrace_scenario_load`] or
 * [`surftrace_scenario_from_toml`], destroy with [`surftrace_scenario_free`].
 */
typedef struct SurftraceScenario SurftraceScenario;

/**
 * Headline metrics of one run. Distances are meters, angles radians,
 * forces newtons.
 */
typedef struct SurftraceSummary {
  /**
   * RMS contact-point deviation from the desired path, settling excluded.
   */
  double rms_path_error;
  /**
   * Worst-case contact-point deviation, settling included.
   */
  double max_path_error;
  /**
   * Mean angle between the reported and true normals, settling excluded.
   */
  double normal_angle_error_mean;
  /**
   * Worst-case normal angle, settling included.
   */
  double normal_angle_error_max;
  /**
   * RMS deviation of the true normal force from its target.
   */
  double force_error_rms;
  /**
   * Final friction-coefficient window average.
   */
  double mu_final;
  /**
   * Number of recorded control cycles (approach + contact).
   */
  uintptr_t steps;
} SurftraceSummary;

/**
 * One logged control cycle; mirrors one CSV row.
 */
typedef struct SurftraceRecord {
  /**
   * Time since the start of the run (s).
   */
  double t;
  /**
   * Joint angles (rad).
   */
  double q[7];
  /**
   * Probe-center position (m).
   */
  double x_ee[3];
  /**
   * Desired contact point on the path (m).
   */
  double x_des[3];
  /**
   * Raw sensed force (N).
   */
  double f_s[3];
  /**
   * Friction-compensated force estimate (N).
   */
  double f_n_hat[3];
  /**
   * Reported unit surface normal.
   */
  double n_surf_hat[3];
  /**
   * Ground-truth unit surface normal at the contact point.
   */
  double n_true[3];
  /**
   * Friction-coefficient window average.
   */
  double mu_bar;
  /**
   * Per-cycle friction-coefficient sample.
   */
  double mu_k;
  /**
   * Angle between the control normal and the negated probe axis (rad).
   */
  double gamma;
  /**
   * Norm of the position-tracking error (m).
   */
  double e_norm;
} SurftraceRecord;

/**
 * Output of one estimator step.
 */
typedef struct SurftraceEstimate {
  /**
   * Force reading with the reconstructed friction removed (N).
   */
  double f_n_hat[3];
  /**
   * Unit surface-normal estimate.
   */
  double n_surf_hat[3];
  /**
   * Reconstructed friction force that was subtracted (N).
   */
  double f_tau[3];
  /**
   * Friction-coefficient sample produced this step.
   */
  double mu_k;
  /**
   * True when the sliding branch ran (speed above the threshold).
   */
  bool moving;
} SurftraceEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string; never null.
 */
const char *surftrace_version(void);

/**
 * Message describing the most recent failure on the calling thread; the
 * empty string if nothing failed yet. Valid until the next failing call on
 * the same thread. Never null.
 */
const char *surftrace_last_error(void);

/**
 * Loads and validates a scenario file, applying `override_count` textual
 * `key=value` overrides on top (the array may be null when the count is 0).
 *
 * # Safety
 * `path` and the override entries must be NUL-terminated strings; `out`
 * must be a valid pointer. On success `*out` owns the new handle.
 */
enum SurftraceStatus surftrace_scenario_load(const char *path,
                                             const char *const *overrides,
                                             uintptr_t override_count,
                                             struct SurftraceScenario **out);

/**
 * Parses and validates scenario text; `name` becomes the output base name.
 *
 * # Safety
 * `text`, `name`, and the override entries must be NUL-terminated strings;
 * `out` must be a valid pointer. On success `*out` owns the new handle.
 */
enum SurftraceStatus surftrace_scenario_from_toml(const char *text,
                                                  const char *name,
                                                  const char *const *overrides,
                                                  uintptr_t override_count,
                                                  struct SurftraceScenario **out);

/**
 * Releases a scenario handle; null is accepted and ignored.
 *
 * # Safety
 * `scenario` must be null or a handle produced by this library that has
 * not been freed yet.
 */
void surftrace_scenario_free(struct SurftraceScenario *scenario);

/**
 * Copies the scenario's base name into `buf` (NUL-terminated, truncated if
 * necessary) and returns the untruncated length excluding the terminator,
 * snprintf-style. Returns 0 for a null handle; `buf` may be null when
 * `cap` is 0.
 *
 * # Safety
 * `buf` must point to at least `cap` writable bytes when `cap > 0`.
 */
uintptr_t surftrace_scenario_name(const struct SurftraceScenario *scenario,
                                  char *buf,
                                  uintptr_t cap);

/**
 * Replaces the scenario's noise seed (the file-level default otherwise).
 *
 * # Safety
 * `scenario` must be a live handle produced by this library.
 */
enum SurftraceStatus surftrace_scenario_set_seed(struct SurftraceScenario *scenario, uint64_t seed);

/**
 * Number of contact-phase control steps the scenario will execute
 * (duration times rate); 0 for a null handle.
 *
 * # Safety
 * `scenario` must be null or a live handle produced by this library.
 */
uintptr_t surftrace_scenario_step_count(const struct SurftraceScenario *scenario);

/**
 * Executes a scenario; on success `*out` owns a run handle.
 *
 * # Safety
 * `scenario` must be a live handle; `out` must be a valid pointer.
 */
enum SurftraceStatus surftrace_run(const struct SurftraceScenario *scenario,
                                   struct SurftraceRun **out);

/**
 * Executes a scenario twice, with the estimator in the loop and with the
 * frozen-normal baseline; on success both out-pointers own run handles.
 *
 * # Safety
 * `scenario` must be a live handle; `out_on` and `out_off` must be valid
 * pointers.
 */
enum SurftraceStatus surftrace_compare(const struct SurftraceScenario *scenario,
                                       struct SurftraceRun **out_on,
                                       struct SurftraceRun **out_off);

/**
 * Releases a run handle; null is accepted and ignored.
 *
 * # Safety
 * `run` must be null or a handle produced by this library that has not
 * been freed yet.
 */
void surftrace_run_free(struct SurftraceRun *run);

/**
 * Number of recorded control cycles; 0 for a null handle.
 *
 * # Safety
 * `run` must be null or a live handle produced by this library.
 */
uintptr_t surftrace_run_steps(const struct SurftraceRun *run);

/**
 * Copies the run's summary metrics into `out`.
 *
 * # Safety
 * `run` must be a live handle; `out` must be a valid pointer.
 */
enum SurftraceStatus surftrace_run_summary(const struct SurftraceRun *run,
                                           struct SurftraceSummary *out);

/**
 * Copies record `index` into `out`; `OUT_OF_RANGE` past the end.
 *
 * # Safety
 * `run` must be a live handle; `out` must be a valid pointer.
 */
enum SurftraceStatus surftrace_run_record(const struct SurftraceRun *run,
                                          uintptr_t index,
                                          struct SurftraceRecord *out);

/**
 * Writes the run's records as CSV (header plus one row per cycle) to
 * `path`, replacing any existing file.
 *
 * # Safety
 * `run` must be a live handle; `path` must be a NUL-terminated string.
 */
enum SurftraceStatus surftrace_run_write_csv(const struct SurftraceRun *run, const char *path);

/**
 * Creates an incremental estimator with a uniformly weighted window.
 * `window` is the friction-average length, `v_epsilon` the speed below
 * which the probe counts as stationary (m/s), `mu_initial` the value the
 * window starts filled with, and `f_min` the force norm below which
 * directions are unreliable (N).
 *
 * # Safety
 * `out` must be a valid pointer. On success `*out` owns the new handle.
 */
enum SurftraceStatus surftrace_estimator_new(uintptr_t window,
                                             double v_epsilon,
                                             double mu_initial,
                                             double f_min,
                                             struct SurftraceEstimator **out);

/**
 * Releases an estimator handle; null is accepted and ignored.
 *
 * # Safety
 * `estimator` must be null or a handle produced by this library that has
 * not been freed yet.
 */
void surftrace_estimator_free(struct SurftraceEstimator *estimator);

/**
 * Advances the estimator by one cycle. `f_s` is the sensed force and
 * `v_hat` the probe-velocity estimate, both pointers to three doubles.
 * On success the estimator state advances and `out` receives the cleaned
 * force, normal estimate, and friction sample.
 *
 * # Safety
 * `estimator` must be a live handle; `f_s` and `v_hat` must point to three
 * readable doubles; `out` must be a valid pointer.
 */
enum SurftraceStatus surftrace_estimator_step(struct SurftraceEstimator *estimator,
                                              const double *f_s,
                                              const double *v_hat,
                                              struct SurftraceEstimate *out);

/**
 * Current weighted friction-coefficient average; NaN for a null handle.
 *
 * # Safety
 * `estimator` must be null or a live handle produced by this library.
 */
double surftrace_estimator_mu(const struct SurftraceEstimator *estimator);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SURFTRACE_H */
