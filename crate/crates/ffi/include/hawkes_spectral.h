#ifndef HAWKES_SPECTRAL_H
#define HAWKES_SPECTRAL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Estimator modes, passed as `uint32_t`.
 */
typedef enum HsMode {
  HS_MODE_SCALAR = 1,
  HS_MODE_BISYMMETRIC = 2,
} HsMode;

/**
 * Result codes; 2 and 3 match the CLI exit codes.
 */
typedef enum HsStatus {
  HS_STATUS_OK = 0,
  /**
   * Invalid input: malformed JSON, bad parameters, non-stationary kernel.
   */
  HS_STATUS_VALIDATION = 2,
  /**
   * Singular matrices, unmet tolerances, simulation caps.
   */
  HS_STATUS_NUMERICAL = 3,
  HS_STATUS_NULL_POINTER = 4,
  /**
   * A caller buffer is smaller than the data to copy.
   */
  HS_STATUS_BUFFER_TOO_SMALL = 5,
  HS_STATUS_PANIC = 6,
} HsStatus;

typedef struct HsCovariance HsCovariance;

typedef struct HsEvents HsEvents;

typedef struct HsKernel HsKernel;

/**
 * Kernel matrix plus background rate.
 */
typedef struct HsModel HsModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *hs_last_error(void);

/**
 * Parses a model from JSON such as
 * `{"n":1,"entries":[[{"type":"exp","alpha":1,"beta":4}]],"mu":[1]}`.
 *
 * # Safety
 * `json` must be a nul-terminated string and `out` a valid pointer.
 */
enum HsStatus hs_model_from_json(const char *json, struct HsModel **out);

/**
 * Number of components of `model`, or 0 for null.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t hs_model_dimension(const struct HsModel *model);

/**
 * Writes the stationary mean intensities `Λ` into `buf[0..n]`.
 *
 * # Safety
 * `model` must be a live handle and `buf` must hold `len` doubles.
 */
enum HsStatus hs_model_mean_intensity(const struct HsModel *model, double *buf, size_t len);

/**
 * # Safety
 * `model` must be null or a handle not yet freed.
 */
void hs_model_free(struct HsModel *model);

/**
 * Simulates `model` on `[0, horizon]` with the default burn-in.
 *
 * # Safety
 * `model` must be a live handle and `out` a valid pointer.
 */
enum HsStatus hs_simulate(const struct HsModel *model,
                          double horizon,
                          uint64_t seed,
                          struct HsEvents **out);

/**
 * Builds an `n`-component series from parallel arrays of 1-based components
 * and timestamps, observed on `[t_start, t_end]`.
 *
 * # Safety
 * `components` and `times` must each hold `len` values; `out` must be valid.
 */
enum HsStatus hs_events_new(size_t n,
                            const uint32_t *components,
                            const double *times,
                            size_t len,
                            double t_start,
                            double t_end,
                            struct HsEvents **out);

/**
 * Number of components, or 0 for null.
 *
 * # Safety
 * `events` must be null or a live handle.
 */
size_t hs_events_dimension(const struct HsEvents *events);

/**
 * Event count of a 1-based component; 0 for null or out-of-range input.
 *
 * # Safety
 * `events` must be null or a live handle.
 */
size_t hs_events_count(const struct HsEvents *events, size_t component);

/**
 * Copies the timestamps of a 1-based component into `buf`.
 *
 * # Safety
 * `events` must be a live handle and `buf` must hold `len` doubles.
 */
enum HsStatus hs_events_copy(const struct HsEvents *events,
                             size_t component,
                             double *buf,
                             size_t len);

/**
 * # Safety
 * `events` must be null or a handle not yet freed.
 */
void hs_events_free(struct HsEvents *events);

/**
 * Binned covariance `v^(h)` at lags `0..=tau_max` in steps of `delta`.
 *
 * # Safety
 * `events` must be a live handle and `out` a valid pointer.
 */
enum HsStatus hs_covariance_estimate(const struct HsEvents *events,
                                     double h,
                                     double delta,
                                     double tau_max,
                                     struct HsCovariance **out);

/**
 * Mean of the per-component intensities recorded with the covariance; NaN for null.
 *
 * # Safety
 * `cov` must be null or a live handle.
 */
double hs_covariance_lambda_bar(const struct HsCovariance *cov);

/**
 * # Safety
 * `cov` must be null or a handle not yet freed.
 */
void hs_covariance_free(struct HsCovariance *cov);

/**
 * Kernel estimate from a covariance, with `λ̄` taken from the covariance.
 * `mode` is an [`HsMode`] value.
 *
 * # Safety
 * `cov` must be a live handle and `out` a valid pointer.
 */
enum HsStatus hs_kernel_estimate(const struct HsCovariance *cov,
                                 uint32_t mode,
                                 struct HsKernel **out);

/**
 * Samples per column (lags `0..=K`), or 0 for null.
 *
 * # Safety
 * `kernel` must be null or a live handle.
 */
size_t hs_kernel_len(const struct HsKernel *kernel);

/**
 * Column count: 1 in 1D (`phi11`), 2 for bisymmetric 2D (`phi11`, `phi12`).
 *
 * # Safety
 * `kernel` must be null or a live handle.
 */
size_t hs_kernel_columns(const struct HsKernel *kernel);

/**
 * Lag step of the estimate; NaN for null.
 *
 * # Safety
 * `kernel` must be null or a live handle.
 */
double hs_kernel_delta(const struct HsKernel *kernel);

/**
 * Copies column `index` (0-based) into `buf`.
 *
 * # Safety
 * `kernel` must be a live handle and `buf` must hold `len` doubles.
 */
enum HsStatus hs_kernel_copy_column(const struct HsKernel *kernel,
                                    size_t index,
                                    double *buf,
                                    size_t len);

/**
 * # Safety
 * `kernel` must be null or a handle not yet freed.
 */
void hs_kernel_free(struct HsKernel *kernel);

/**
 * Log-log least-squares fit `v ≈ α t^β` over `[t_lo, t_hi]`.
 *
 * # Safety
 * `times` and `values` must hold `len` doubles; `alpha` and `beta` must be valid.
 */
enum HsStatus hs_powerlaw_fit(const double *times,
                              const double *values,
                              size_t len,
                              double t_lo,
                              double t_hi,
                              double *alpha,
                              double *beta);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HAWKES_SPECTRAL_H */
