#ifndef BELPM_H
#define BELPM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

enum BelpmStatus
#if defined(__cplusplus) || __STDC_VERSION__ >= 202311L
  : int32_t
#endif // defined(__cplusplus) || __STDC_VERSION__ >= 202311L
 {
  BELPM_STATUS_OK = 0,
  // A required pointer was null.
  BELPM_STATUS_NULL_POINTER = 1,
  BELPM_STATUS_INVALID_ARGUMENT = 2,
  BELPM_STATUS_CONFIG = 3,
  BELPM_STATUS_IO = 4,
  // Divergence, degenerate weights, undefined metric or another numeric failure.
  BELPM_STATUS_NUMERIC = 5,
  // A Rust panic was caught at the boundary.
  BELPM_STATUS_PANIC = 6,
};
#ifndef __cplusplus
#if __STDC_VERSION__ >= 202311L
typedef enum BelpmStatus BelpmStatus;
#else
typedef int32_t BelpmStatus;
#endif // __STDC_VERSION__ >= 202311L
#endif // __cplusplus

// Trained model handle.
typedef struct BelpmModel BelpmModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the calling thread's last error message into `buf` (NUL-terminated,
// truncated to `len`). Returns the full message length in bytes, excluding the NUL.
//
// # Safety
// `buf` must be null or valid for `len` writes.
size_t belpm_last_error(char *buf, size_t len);

// Writes `n` x-values of the Lorenz system sampled every `dt` seconds.
//
// # Safety
// `out` must be valid for `n` writes.
BelpmStatus belpm_generate_lorenz(double dt, size_t n, double *out);

// Writes `n` x-values of the Hénon map.
//
// # Safety
// `out` must be valid for `n` writes.
BelpmStatus belpm_generate_henon(size_t n, double *out);

// # Safety
// `predicted` and `target` must be valid for `n` reads; `out` for one write.
BelpmStatus belpm_nmse(const double *predicted, const double *target, size_t n, double *out);

// # Safety
// `predicted` and `target` must be valid for `n` reads; `out` for one write.
BelpmStatus belpm_mse(const double *predicted, const double *target, size_t n, double *out);

// Trains a model on `n` input rows of width `dim` and their targets.
// `config_toml` is a model configuration document, or null for defaults.
// On success `*out` receives a handle owned by the caller.
//
// # Safety
// `inputs` must be valid for `n * dim` reads, `targets` for `n`, `out` for one write.
BelpmStatus belpm_model_train(const double *inputs,
                              const double *targets,
                              size_t n,
                              size_t dim,
                              const char *config_toml,
                              struct BelpmModel **out);

// Predicts `n` rows of width `dim` into `out`.
//
// # Safety
// `model` must be a live handle; `inputs` valid for `n * dim` reads; `out` for `n` writes.
BelpmStatus belpm_model_predict(const struct BelpmModel *model,
                                const double *inputs,
                                size_t n,
                                size_t dim,
                                double *out);

// Online adaptation over `n` rows, `passes` times. The prediction made for each
// row of the first pass, before the update it triggers, is written to `out`.
//
// # Safety
// `model` must be a live handle; `inputs` valid for `n * dim` reads; `out` for `n` writes.
BelpmStatus belpm_model_adapt(struct BelpmModel *model,
                              const double *inputs,
                              size_t n,
                              size_t dim,
                              size_t passes,
                              double *out);

// # Safety
// `model` must be a live handle; `out` valid for one write.
BelpmStatus belpm_model_dim(const struct BelpmModel *model, size_t *out);

// Number of learnable parameters, `k_a + k_o + 8`.
//
// # Safety
// `model` must be a live handle; `out` valid for one write.
BelpmStatus belpm_model_parameter_count(const struct BelpmModel *model, size_t *out);

// # Safety
// `model` must be a live handle; `path` a NUL-terminated string.
BelpmStatus belpm_model_save(const struct BelpmModel *model, const char *path);

// # Safety
// `path` must be a NUL-terminated string; `out` valid for one write.
BelpmStatus belpm_model_load(const char *path, struct BelpmModel **out);

// Releases a handle. Null is ignored.
//
// # Safety
// `model` must be null or a handle not yet freed.
void belpm_model_free(struct BelpmModel *model);

// Weighted k-NN prediction of `m` queries from `n` training rows, with
// per-rank kernel scales set from the training distances.
// `kernel` is one of gaussian, inversion, rank, exponential, rational.
//
// # Safety
// `train_inputs` must be valid for `n * dim` reads, `train_targets` for `n`,
// `queries` for `m * dim`, `out` for `m` writes; `kernel` a NUL-terminated string.
BelpmStatus belpm_wknn_predict(const double *train_inputs,
                               const double *train_targets,
                               size_t n,
                               size_t dim,
                               size_t k,
                               const char *kernel,
                               const double *queries,
                               size_t m,
                               double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BELPM_H */
