#ifndef BLOSSOM_H
#define BLOSSOM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Phase that produced an evaluation.
 */
typedef enum BlossomPhase {
  BLOSSOM_PHASE_RANDOM_INIT = 0,
  BLOSSOM_PHASE_BAYES_ACQ = 1,
  BLOSSOM_PHASE_GLOBAL_REGRET_REDUCTION = 2,
  BLOSSOM_PHASE_LOCAL_EXPLOIT = 3,
  BLOSSOM_PHASE_TERMINATED = 4,
} BlossomPhase;

/**
 * Outcome of a library call.
 */
typedef enum BlossomStatus {
  BLOSSOM_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  BLOSSOM_STATUS_NULL_POINTER = 1,
  /**
   * An argument or option value was rejected.
   */
  BLOSSOM_STATUS_INVALID_ARGUMENT = 2,
  /**
   * A string argument was not valid UTF-8.
   */
  BLOSSOM_STATUS_INVALID_UTF8 = 3,
  /**
   * The named benchmark does not exist.
   */
  BLOSSOM_STATUS_UNKNOWN_OBJECTIVE = 4,
  /**
   * An index or buffer length was out of range.
   */
  BLOSSOM_STATUS_OUT_OF_RANGE = 5,
  /**
   * Reading or writing a file failed.
   */
  BLOSSOM_STATUS_IO = 6,
  /**
   * The library panicked; the call had no effect.
   */
  BLOSSOM_STATUS_PANIC = 7,
} BlossomStatus;

/**
 * Why a run stopped.
 */
typedef enum BlossomTermination {
  BLOSSOM_TERMINATION_REGRET_TARGET_MET = 0,
  BLOSSOM_TERMINATION_MAX_ITERATIONS = 1,
  BLOSSOM_TERMINATION_LOCAL_CONVERGED = 2,
  BLOSSOM_TERMINATION_EXTERNAL_STOP = 3,
  BLOSSOM_TERMINATION_ERROR = 4,
} BlossomTermination;

/**
 * Optimizer settings (opaque).
 */
typedef struct BlossomOptions BlossomOptions;

/**
 * Outcome of a run (opaque).
 */
typedef struct BlossomResult BlossomResult;

/**
 * Objective callback: returns f(x) for a point of `dim` coordinates.
 * Returning NaN or an infinity ends the run with `BLOSSOM_TERMINATION_ERROR`.
 */
typedef double (*BlossomObjectiveFn)(const double *x, size_t dim, void *user_data);

/**
 * Scalar fields of one trace row. Optional values absent from the row are NaN.
 */
typedef struct BlossomStep {
  size_t iteration;
  enum BlossomPhase phase;
  double y;
  double incumbent_y;
  double region_radius;
  double regret_estimate;
  double jitter;
  double wall_time_s;
} BlossomStep;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Static description of a status code. Never null.
 */
const char *blossom_status_message(enum BlossomStatus status);

/**
 * Message of the last failed call on this thread, or null if it succeeded.
 * The pointer stays valid until the next call into the library on this thread.
 */
const char *blossom_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *blossom_version(void);

/**
 * New options with default settings. Free with [`blossom_options_free`].
 */
struct BlossomOptions *blossom_options_new(void);

/**
 * Options parsed from a JSON object of settings; null on error.
 *
 * # Safety
 * `json` must be null or a NUL-terminated string.
 */
struct BlossomOptions *blossom_options_from_json(const char *json);

/**
 * # Safety
 * `opts` must be null or a handle from this library that has not been freed.
 */
void blossom_options_free(struct BlossomOptions *opts);

/**
 * Sets a numeric option by name (for example `target_global_regret`,
 * `max_iterations`, `seed`). Integer options require an integral value.
 *
 * # Safety
 * `opts` must be a live handle and `key` a NUL-terminated string.
 */
enum BlossomStatus blossom_options_set(struct BlossomOptions *opts, const char *key, double value);

/**
 * Sets a textual option by name: `kernel_family` (`Matern52`,
 * `SquaredExponential`), `bayes_acquisition` (`pes_discrete`,
 * `expected_improvement`) or `strategy` (`blossom`, `bayes_only`).
 *
 * # Safety
 * `opts` must be a live handle; `key` and `value` NUL-terminated strings.
 */
enum BlossomStatus blossom_options_set_string(struct BlossomOptions *opts,
                                              const char *key,
                                              const char *value);

/**
 * Reads a numeric option; non-numeric or unset options give NaN.
 *
 * # Safety
 * `opts` must be a live handle and `key` a NUL-terminated string.
 */
enum BlossomStatus blossom_options_get(const struct BlossomOptions *opts,
                                       const char *key,
                                       double *out);

/**
 * Minimizes `objective` over the box `[lower, upper]` (each of length `dim`).
 *
 * On `BLOSSOM_STATUS_OK`, `*out` receives a result handle to be freed with
 * [`blossom_result_free`]. A run that fails part-way (for example because
 * the objective returned NaN) still succeeds at this level; its termination
 * is `BLOSSOM_TERMINATION_ERROR` and the partial trace is kept.
 *
 * # Safety
 * `lower` and `upper` must point to `dim` doubles; `opts` must be a live
 * handle; `out` must be writable. `objective` is called synchronously from
 * this thread with `user_data`.
 */
enum BlossomStatus blossom_run(const struct BlossomOptions *opts,
                               size_t dim,
                               const double *lower,
                               const double *upper,
                               BlossomObjectiveFn objective,
                               void *user_data,
                               struct BlossomResult **out);

/**
 * Minimizes a built-in benchmark (`branin`, `camel3`, `camel6`, `hartmann3`,
 * `hartmann4`, `hartmann6`), log-transformed so that its minimum is 0.
 *
 * # Safety
 * `opts` must be a live handle, `name` a NUL-terminated string and `out` writable.
 */
enum BlossomStatus blossom_run_benchmark(const struct BlossomOptions *opts,
                                         const char *name,
                                         struct BlossomResult **out);

/**
 * # Safety
 * `res` must be null or a handle from this library that has not been freed.
 */
void blossom_result_free(struct BlossomResult *res);

/**
 * Dimension of the problem; 0 for a null handle.
 *
 * # Safety
 * `res` must be null or a live handle.
 */
size_t blossom_result_dim(const struct BlossomResult *res);

/**
 * Copies the recommended point into `out` (`len` must be at least the dimension).
 *
 * # Safety
 * `res` must be a live handle and `out` must hold `len` doubles.
 */
enum BlossomStatus blossom_result_recommendation(const struct BlossomResult *res,
                                                 double *out,
                                                 size_t len);

/**
 * Objective value at the recommendation; NaN for a null handle.
 *
 * # Safety
 * `res` must be null or a live handle.
 */
double blossom_result_recommended_y(const struct BlossomResult *res);

/**
 * Objective evaluations made, local-phase evaluations included.
 *
 * # Safety
 * `res` must be null or a live handle.
 */
size_t blossom_result_total_evals(const struct BlossomResult *res);

/**
 * Model-based proposals made (initialization and local phase excluded).
 *
 * # Safety
 * `res` must be null or a live handle.
 */
size_t blossom_result_bayes_iterations(const struct BlossomResult *res);

/**
 * Why the run stopped; `BLOSSOM_TERMINATION_ERROR` for a null handle.
 *
 * # Safety
 * `res` must be null or a live handle.
 */
enum BlossomTermination blossom_result_termination(const struct BlossomResult *res);

/**
 * Error message of a run that ended with `BLOSSOM_TERMINATION_ERROR`, else
 * null. Valid while the handle lives.
 *
 * # Safety
 * `res` must be null or a live handle.
 */
const char *blossom_result_error(const struct BlossomResult *res);

/**
 * Number of trace rows (objective evaluations).
 *
 * # Safety
 * `res` must be null or a live handle.
 */
size_t blossom_result_trace_len(const struct BlossomResult *res);

/**
 * Scalar fields of trace row `index`.
 *
 * # Safety
 * `res` must be a live handle and `out` writable.
 */
enum BlossomStatus blossom_result_trace_step(const struct BlossomResult *res,
                                             size_t index,
                                             struct BlossomStep *out);

/**
 * Copies the point evaluated at trace row `index` into `out`.
 *
 * # Safety
 * `res` must be a live handle and `out` must hold `len` doubles.
 */
enum BlossomStatus blossom_result_trace_x(const struct BlossomResult *res,
                                          size_t index,
                                          double *out,
                                          size_t len);

/**
 * Writes the trace as CSV to `path`.
 *
 * # Safety
 * `res` must be a live handle and `path` a NUL-terminated string.
 */
enum BlossomStatus blossom_result_write_trace(const struct BlossomResult *res, const char *path);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BLOSSOM_H */
