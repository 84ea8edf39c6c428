#ifndef LATENT_BASE_H
#define LATENT_BASE_H

/* This file is generated by cbindgen from latent-base-ffi; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible call.
 */
typedef enum LbStatus {
  LB_STATUS_OK = 0,
  LB_STATUS_NULL_POINTER = 1,
  LB_STATUS_INVALID_UTF8 = 2,
  LB_STATUS_IO = 3,
  LB_STATUS_INVALID_BUNDLE = 4,
  LB_STATUS_DIMENSION_MISMATCH = 5,
  LB_STATUS_NUMERICAL_FAILURE = 6,
  LB_STATUS_MISSING_BASE = 7,
  LB_STATUS_UNSUPPORTED = 8,
  LB_STATUS_BAD_ARGUMENT = 9,
  LB_STATUS_PANIC = 10,
} LbStatus;

/**
 * Opaque model handle: a loaded bundle (mapping plus optional base).
 */
typedef struct LbModel LbModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Static, NUL-terminated description of a status code.
 */
const char *lb_status_message(enum LbStatus status);

/**
 * Library version as a static NUL-terminated string.
 */
const char *lb_version(void);

/**
 * Load a model bundle directory. On success writes a handle that must be
 * released with `lb_model_free`.
 *
 * # Safety
 * `path` must be a valid NUL-terminated string; `out` must be a valid
 * pointer to a handle slot.
 */
enum LbStatus lb_model_load(const char *path, struct LbModel **out);

/**
 * Release a handle returned by `lb_model_load`. A null handle is a no-op.
 *
 * # Safety
 * `model` must be a pointer previously returned by `lb_model_load` and not
 * yet freed.
 */
void lb_model_free(struct LbModel *model);

/**
 * Observation-space dimension (0 for a null handle).
 *
 * # Safety
 * `model` must be a live handle or null.
 */
size_t lb_model_data_dim(const struct LbModel *model);

/**
 * Latent-space dimension (0 for a null handle).
 *
 * # Safety
 * `model` must be a live handle or null.
 */
size_t lb_model_latent_dim(const struct LbModel *model);

/**
 * Whether the bundle carries a fitted base distribution.
 *
 * # Safety
 * `model` must be a live handle or null.
 */
bool lb_model_has_base(const struct LbModel *model);

/**
 * Encode one observation into the latent space. `x_len` must equal the
 * data dimension and `out_len` the latent dimension.
 *
 * # Safety
 * `model` must be a live handle; `x` must point to `x_len` readable f64s;
 * `out` must point to `out_len` writable f64s.
 */
enum LbStatus lb_model_encode(const struct LbModel *model,
                              const double *x,
                              size_t x_len,
                              double *out,
                              size_t out_len);

/**
 * Decode one latent vector into the observation space. `h_len` must equal
 * the latent dimension and `out_len` the data dimension.
 *
 * # Safety
 * Same buffer rules as `lb_model_encode`, with roles swapped.
 */
enum LbStatus lb_model_decode(const struct LbModel *model,
                              const double *h,
                              size_t h_len,
                              double *out,
                              size_t out_len);

/**
 * Exact model log-density of one observation (invertible mappings only).
 *
 * # Safety
 * `model` must be a live handle; `x` must point to `len` readable f64s;
 * `out` must be writable.
 */
enum LbStatus lb_model_log_pdf(const struct LbModel *model,
                               const double *x,
                               size_t len,
                               double *out);

/**
 * Base log-density of the embedding (volume term omitted); defined for
 * every mapping kind.
 *
 * # Safety
 * Same rules as `lb_model_log_pdf`.
 */
enum LbStatus lb_model_proxy_log_pdf(const struct LbModel *model,
                                     const double *x,
                                     size_t len,
                                     double *out);

/**
 * Draw `n` decoded samples. `out` receives `n * data_dim` values row by
 * row; `labels` (optional, may be null) receives the component or state
 * index per sample. Sampling is deterministic in `seed`.
 *
 * # Safety
 * `model` must be a live handle; `out` must hold `n * data_dim` writable
 * f64s; `labels`, when non-null, must hold `n` writable u32s.
 */
enum LbStatus lb_model_sample(const struct LbModel *model,
                              uint64_t seed,
                              size_t n,
                              double *out,
                              uint32_t *labels);

/**
 * Kernel-density score of a test set under a sample set. Both buffers are
 * row-major `count x dim`. Writes the plain average density and the mean
 * log density.
 *
 * # Safety
 * `test` must hold `n_test * dim` readable f64s, `samples`
 * `n_samples * dim`; the out-pointers must be writable.
 */
enum LbStatus lb_kde_score(const double *test,
                           size_t n_test,
                           const double *samples,
                           size_t n_samples,
                           size_t dim,
                           double bandwidth_variance,
                           double *out_density,
                           double *out_log_density);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LATENT_BASE_H */
