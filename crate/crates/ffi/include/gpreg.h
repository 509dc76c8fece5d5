#ifndef GPREG_H
#define GPREG_H

/* Generated by cbindgen from the gpreg-ffi crate. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result code of every fallible call.
 */
typedef enum GpregStatus {
  GPREG_STATUS_OK = 0,
  GPREG_STATUS_NULL_POINTER = 1,
  GPREG_STATUS_INVALID_ARGUMENT = 2,
  GPREG_STATUS_CONFIG = 3,
  GPREG_STATUS_NUMERICAL = 4,
  GPREG_STATUS_SIMULATION = 5,
  GPREG_STATUS_IO = 6,
  /*
   The experiment has not been run yet.
   */
  GPREG_STATUS_NOT_RUN = 7,
  GPREG_STATUS_PANIC = 8,
} GpregStatus;

/*
 A configured closed-loop experiment and, once run, its results.
 */
typedef struct GpregExperiment GpregExperiment;

/*
 Exact GP posterior with a squared-exponential kernel.
 */
typedef struct GpregGp GpregGp;

/*
 Headline numbers of a finished run.
 */
typedef struct GpregMetrics {
  double final_abs_error;
  double rms_error_last_quarter;
  size_t jump_count;
  size_t sample_count;
  /*
   Final-quarter RMS error of the feedback-only twin, NaN when the
   comparison was not requested.
   */
  double without_im_rms_error_last_quarter;
} GpregMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message describing the last failure on this thread, or an empty string.
 The pointer stays valid until the next call into this library on the
 same thread.
 */
const char *gpreg_last_error_message(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *gpreg_version(void);

/*
 Fits a GP to `n` inputs of dimension `dim` (row-major in `inputs`) and
 `n` targets. The kernel uses one lengthscale for every dimension.

 # Safety
 `inputs` must point to `n * dim` doubles, `targets` to `n` doubles and
 `out` to writable storage for one handle.
 */
enum GpregStatus gpreg_gp_fit(const double *inputs,
                              const double *targets,
                              size_t n,
                              size_t dim,
                              double signal_variance,
                              double lengthscale,
                              double noise_variance,
                              struct GpregGp **out);

/*
 Posterior mean and variance at one input of dimension `dim`.

 # Safety
 `gp` must come from [`gpreg_gp_fit`]; `x` must point to `dim` doubles;
 the output pointers must be writable.
 */
enum GpregStatus gpreg_gp_predict(const struct GpregGp *gp,
                                  const double *x,
                                  size_t dim,
                                  double *mean,
                                  double *variance);

/*
 Number of training points held by the model (0 for a null handle).

 # Safety
 `gp` must be null or come from [`gpreg_gp_fit`].
 */
size_t gpreg_gp_len(const struct GpregGp *gp);

/*
 # Safety
 `gp` must be null or come from [`gpreg_gp_fit`], and is invalid afterwards.
 */
void gpreg_gp_free(struct GpregGp *gp);

/*
 Parses a configuration document (see the README for keys).

 # Safety
 `text` must be a NUL-terminated string; `out` must be writable.
 */
enum GpregStatus gpreg_experiment_from_config(const char *text, struct GpregExperiment **out);

/*
 Runs the experiment. Output paths named in the configuration are written.

 # Safety
 `exp` must come from [`gpreg_experiment_from_config`].
 */
enum GpregStatus gpreg_experiment_run(struct GpregExperiment *exp);

/*
 # Safety
 `exp` must come from [`gpreg_experiment_from_config`]; `out` must be writable.
 */
enum GpregStatus gpreg_experiment_metrics(const struct GpregExperiment *exp,
                                          struct GpregMetrics *out);

/*
 Writes the trajectory of the last run as CSV.

 # Safety
 `exp` must come from [`gpreg_experiment_from_config`]; `path` must be a
 NUL-terminated string.
 */
enum GpregStatus gpreg_experiment_write_csv(const struct GpregExperiment *exp, const char *path);

/*
 # Safety
 `exp` must be null or come from [`gpreg_experiment_from_config`], and is
 invalid afterwards.
 */
void gpreg_experiment_free(struct GpregExperiment *exp);

/*
 Largest mismatch of the closed-form Lorenz steady-state maps over one
 exosystem period from `w(0) = (w1, w2)`, nominal plant parameters.

 # Safety
 `out` must be writable.
 */
enum GpregStatus gpreg_lorenz_residual(double sigma, double w1, double w2, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GPREG_H */
