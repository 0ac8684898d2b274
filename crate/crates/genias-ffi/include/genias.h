/* C interface for the genias anomaly-generation toolkit. */

#ifndef GENIAS_H
#define GENIAS_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Outcome of an FFI call.
 */
typedef enum GeniasStatus {
  GENIAS_STATUS_OK = 0,
  GENIAS_STATUS_INVALID_ARGUMENT = 1,
  GENIAS_STATUS_IO_ERROR = 2,
  GENIAS_STATUS_FORMAT_ERROR = 3,
  GENIAS_STATUS_SHAPE_MISMATCH = 4,
  GENIAS_STATUS_TRAINING_FAILED = 5,
  GENIAS_STATUS_METRIC_ERROR = 6,
  GENIAS_STATUS_VERIFICATION_FAILED = 7,
  GENIAS_STATUS_PANIC = 8,
} GeniasStatus;

/**
 * Opaque trained-model handle.
 */
typedef struct GeniasModel GeniasModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the most recent failure on this thread; empty when no
 * failure has occurred. The pointer stays valid until the next failing
 * call on the same thread.
 */
const char *genias_last_error_message(void);

/**
 * Load a checkpoint written by `genias_model_save` or the CLI.
 *
 * # Safety
 * `path` must be NUL-terminated; `out` must point to writable storage.
 */
enum GeniasStatus genias_model_load(const char *path, struct GeniasModel **out);

/**
 * Persist the model (including its normalization stats).
 *
 * # Safety
 * `model` must be a live handle; `path` must be NUL-terminated.
 */
enum GeniasStatus genias_model_save(const struct GeniasModel *model, const char *path);

/**
 * Release a model handle. Passing NULL is a no-op.
 *
 * # Safety
 * `model` must be NULL or a handle obtained from this library, and must
 * not be used afterwards.
 */
void genias_model_free(struct GeniasModel *model);

/**
 * Window length, input dimensions, and latent size of the model.
 *
 * # Safety
 * All pointers must be valid; `model` must be a live handle.
 */
enum GeniasStatus genias_model_dims(const struct GeniasModel *model,
                                    uint32_t *window_len,
                                    uint32_t *dims,
                                    uint32_t *latent);

/**
 * Mean constrained perturbation scale (always above 1).
 *
 * # Safety
 * `model` must be a live handle; `psi` must be writable.
 */
enum GeniasStatus genias_model_psi(const struct GeniasModel *model, double *psi);

/**
 * Train a model on a CSV series (header `dim_0,...`), slicing
 * non-overlapping windows and fitting min-max normalization on them.
 * `config_toml` may be NULL for defaults sized to the data, or a TOML
 * document with the training hyperparameters.
 *
 * # Safety
 * `train_csv` must be NUL-terminated; `config_toml` NULL or NUL-terminated;
 * `out` must be writable.
 */
enum GeniasStatus genias_train_csv(const char *train_csv,
                                   const char *config_toml,
                                   uint64_t seed,
                                   struct GeniasModel **out);

/**
 * Generate a perturbed window and compose it with the source by
 * deviation patching at threshold `tau`. The input is raw-space; the
 * patched output is mapped back to raw space. `out_mask` (length
 * window_len*dims) may be NULL if the mask is not needed.
 *
 * # Safety
 * Buffers must hold `window_len * dims` elements; `model` must be live.
 */
enum GeniasStatus genias_generate_patched(const struct GeniasModel *model,
                                          const double *window,
                                          uintptr_t len,
                                          double tau,
                                          uint64_t seed,
                                          double *out_window,
                                          uint8_t *out_mask);

/**
 * Anomaly score of a raw-space window: reconstruction MSE through the
 * posterior mean in normalized space. Deterministic.
 *
 * # Safety
 * `window` must hold `window_len * dims` values; `score` must be writable.
 */
enum GeniasStatus genias_recon_score(const struct GeniasModel *model,
                                     const double *window,
                                     uintptr_t len,
                                     double *score);

/**
 * Threshold-based detection metrics over scored windows. `labels` holds
 * 0/1 per window and must contain both classes.
 *
 * # Safety
 * `scores` and `labels` must hold `n` elements; outputs must be writable.
 */
enum GeniasStatus genias_detection_metrics(const double *scores,
                                           const uint8_t *labels,
                                           uintptr_t n,
                                           double *best_f1,
                                           double *best_threshold,
                                           double *aupr,
                                           double *auroc);

/**
 * Run the self-contained verification grid; returns Ok only when every
 * check holds. `checks_run` may be NULL.
 *
 * # Safety
 * `checks_run` must be NULL or writable.
 */
enum GeniasStatus genias_verify(uint64_t seed, uint32_t *checks_run);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GENIAS_H */
