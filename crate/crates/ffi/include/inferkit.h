#ifndef INFERKIT_H
#define INFERKIT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

/*
 Result of every fallible call.
 */
typedef enum InferkitStatus {
  INFERKIT_STATUS_OK = 0,
  /*
   A required pointer argument was null.
   */
  INFERKIT_STATUS_NULL_POINTER = 1,
  /*
   Bad argument or configuration.
   */
  INFERKIT_STATUS_INVALID_ARGUMENT = 2,
  /*
   All weights collapsed to zero.
   */
  INFERKIT_STATUS_DEGENERACY = 3,
  /*
   Reading or writing a file failed.
   */
  INFERKIT_STATUS_IO = 4,
  /*
   The model or the inference run failed otherwise.
   */
  INFERKIT_STATUS_FAILURE = 5,
  /*
   A Rust panic was caught at the boundary.
   */
  INFERKIT_STATUS_PANIC = 6,
} InferkitStatus;

typedef enum InferkitModelKind {
  INFERKIT_MODEL_KIND_CHAIN = 0,
  INFERKIT_MODEL_KIND_LOGREG = 1,
  INFERKIT_MODEL_KIND_COIN = 2,
  INFERKIT_MODEL_KIND_GAUSS = 3,
  INFERKIT_MODEL_KIND_LGSS = 4,
} InferkitModelKind;

typedef enum InferkitFormat {
  INFERKIT_FORMAT_CSV = 0,
  INFERKIT_FORMAT_JSON = 1,
} InferkitFormat;

/*
 A normalised weighted sample of result vectors.
 */
typedef struct InferkitHistogram InferkitHistogram;

/*
 A model whose result is a fixed-length vector of doubles.
 */
typedef struct InferkitModel InferkitModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Crate version as a static NUL-terminated string.
 */
const char *inferkit_version(void);

/*
 Message for the last failed call on this thread, or null after a
 success. Valid until the next call on this thread.
 */
const char *inferkit_last_error(void);

/*
 Builds a bundled model. Result dimension: 2 for logreg (slope,
 intercept), 1 otherwise.

 # Safety
 `out` must be null or valid for writes.
 */
enum InferkitStatus inferkit_model_new(enum InferkitModelKind kind, struct InferkitModel **out);

/*
 Builds the climate model for one month (1 to 12) of a temperature CSV.
 Result dimension 13, one latent per block.

 # Safety
 `data_path` must be null or a NUL-terminated string; `out` must be null
 or valid for writes.
 */
enum InferkitStatus inferkit_model_climate(const char *data_path,
                                           uint32_t month,
                                           struct InferkitModel **out);

/*
 # Safety
 `model` must be null or a handle from this library not yet freed.
 */
void inferkit_model_free(struct InferkitModel *model);

/*
 # Safety
 `model` must be null or a live handle.
 */
uintptr_t inferkit_model_dim(const struct InferkitModel *model);

/*
 Importance sampling with `particles` runs.

 # Safety
 `model` must be null or a live handle; `out` null or valid for writes.
 */
enum InferkitStatus inferkit_run_is(const struct InferkitModel *model,
                                    uintptr_t particles,
                                    uint64_t seed,
                                    struct InferkitHistogram **out);

/*
 Sequential Monte Carlo; `threads` workers advance the particles without
 changing the result.

 # Safety
 `model` must be null or a live handle; `out` null or valid for writes.
 */
enum InferkitStatus inferkit_run_smc(const struct InferkitModel *model,
                                     uintptr_t particles,
                                     uintptr_t steps,
                                     uintptr_t step_size,
                                     uint64_t seed,
                                     uintptr_t threads,
                                     struct InferkitHistogram **out);

/*
 Resample-move SMC with `t_steps` MH moves per round.

 # Safety
 `model` must be null or a live handle; `out` null or valid for writes.
 */
enum InferkitStatus inferkit_run_rmsmc(const struct InferkitModel *model,
                                       uintptr_t particles,
                                       uintptr_t steps,
                                       uintptr_t step_size,
                                       uintptr_t t_steps,
                                       uint64_t seed,
                                       uintptr_t threads,
                                       struct InferkitHistogram **out);

/*
 Trace MH; keeps the `steps - burnin` states after burn-in with equal
 weight.

 # Safety
 `model` must be null or a live handle; `out` null or valid for writes.
 */
enum InferkitStatus inferkit_run_tmcmc(const struct InferkitModel *model,
                                       uintptr_t steps,
                                       uintptr_t burnin,
                                       uint64_t seed,
                                       struct InferkitHistogram **out);

/*
 # Safety
 `h` must be null or a handle from this library not yet freed.
 */
void inferkit_histogram_free(struct InferkitHistogram *h);

/*
 Number of entries; 0 for a null handle.

 # Safety
 `h` must be null or a live handle.
 */
uintptr_t inferkit_histogram_len(const struct InferkitHistogram *h);

/*
 Length of each entry's value vector; 0 for a null handle.

 # Safety
 `h` must be null or a live handle.
 */
uintptr_t inferkit_histogram_dim(const struct InferkitHistogram *h);

/*
 Copies entry `index`: its normalised probability to `weight` and its
 value vector to `values`, which must hold `dim` doubles.

 # Safety
 `h` must be null or a live handle; `weight` and `values` null or valid
 for writes (`values` for `capacity` doubles).
 */
enum InferkitStatus inferkit_histogram_entry(const struct InferkitHistogram *h,
                                             uintptr_t index,
                                             double *weight,
                                             double *values,
                                             uintptr_t capacity);

/*
 Weighted mean and standard deviation of component `component`.

 # Safety
 `h` must be null or a live handle; `mean` and `std` null or valid for
 writes.
 */
enum InferkitStatus inferkit_histogram_moments(const struct InferkitHistogram *h,
                                               uintptr_t component,
                                               double *mean,
                                               double *std);

/*
 Writes component `component` in the CLI's histogram file format.

 # Safety
 `h` must be null or a live handle; `path` null or a NUL-terminated
 string.
 */
enum InferkitStatus inferkit_histogram_write(const struct InferkitHistogram *h,
                                             uintptr_t component,
                                             const char *path,
                                             enum InferkitFormat format);

/*
 Exact filtered means and variances of the scalar linear-Gaussian model
 with `len` observations; `a[0]` is unused. `means` and `variances` must
 hold `len` doubles.

 # Safety
 Each input array must be null or valid for `len` reads; each output
 array null or valid for `len` writes.
 */
enum InferkitStatus inferkit_kalman_exact(const double *a,
                                          const double *c,
                                          double q,
                                          const double *r,
                                          const double *y,
                                          uintptr_t len,
                                          double prior_mean,
                                          double prior_var,
                                          double *means,
                                          double *variances);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* INFERKIT_H */
