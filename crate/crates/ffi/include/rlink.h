#ifndef RLINK_H
#define RLINK_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every entry point.
 */
typedef enum RlnkStatus {
  RLNK_STATUS_OK = 0,
  RLNK_STATUS_NULL_POINTER = 1,
  RLNK_STATUS_INVALID_ARGUMENT = 2,
  RLNK_STATUS_DATA = 3,
  RLNK_STATUS_NUMERICAL = 4,
  RLNK_STATUS_IO = 5,
  RLNK_STATUS_PANIC = 6,
} RlnkStatus;

/**
 * Opaque trained pipeline.
 */
typedef struct RlnkPipeline RlnkPipeline;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing why the last call on this thread failed; NULL if it
 * succeeded. The pointer stays valid until the next call on the same thread.
 */
const char *rlnk_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *rlnk_version(void);

/**
 * Loads a model file into a new handle stored in `*out`.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a writable pointer.
 */
enum RlnkStatus rlnk_pipeline_load(const char *path, struct RlnkPipeline **out);

/**
 * Trains on a dataset file. `config_json` holds a JSON object of pipeline
 * settings (missing keys take defaults) or is NULL for all defaults.
 *
 * # Safety
 * String arguments must be NUL-terminated; `out` must be writable.
 */
enum RlnkStatus rlnk_pipeline_train_file(const char *train_path,
                                         const char *config_json,
                                         struct RlnkPipeline **out);

/**
 * Writes the model file atomically.
 *
 * # Safety
 * `pipeline` must be a live handle and `path` NUL-terminated.
 */
enum RlnkStatus rlnk_pipeline_save(const struct RlnkPipeline *pipeline, const char *path);

/**
 * Releases a handle; NULL is ignored.
 *
 * # Safety
 * `pipeline` must be NULL or a handle not yet freed.
 */
void rlnk_pipeline_free(struct RlnkPipeline *pipeline);

/**
 * Feature and label counts of a trained pipeline.
 *
 * # Safety
 * `pipeline` must be a live handle; outputs must be writable.
 */
enum RlnkStatus rlnk_pipeline_dims(const struct RlnkPipeline *pipeline,
                                   size_t *n_features,
                                   size_t *n_labels);

/**
 * Label probabilities for CSR input (`row_offsets` has `n_rows + 1`
 * entries). Writes `n_rows × n_labels` values to `out`.
 *
 * # Safety
 * Arrays must hold the lengths implied by `n_rows` and `row_offsets[n_rows]`.
 */
enum RlnkStatus rlnk_pipeline_predict_csr(const struct RlnkPipeline *pipeline,
                                          size_t n_rows,
                                          size_t n_cols,
                                          const size_t *row_offsets,
                                          const size_t *col_indices,
                                          const double *values,
                                          double *out);

/**
 * Label probabilities for dense row-major input `x` (`n_rows × n_cols`).
 *
 * # Safety
 * `x` must hold `n_rows·n_cols` values and `out` `n_rows·n_labels`.
 */
enum RlnkStatus rlnk_pipeline_predict_dense(const struct RlnkPipeline *pipeline,
                                            size_t n_rows,
                                            size_t n_cols,
                                            const double *x,
                                            double *out);

/**
 * `out[i] = zhat[i] >= 0.5` over an `n × c` matrix.
 *
 * # Safety
 * Both arrays must hold `n·c` elements.
 */
enum RlnkStatus rlnk_threshold(const double *zhat, size_t n, size_t c, uint8_t *out);

/**
 * Per-class F1 decisions using the pipeline's training label frequencies.
 *
 * # Safety
 * `zhat` and `out` must hold `n·n_labels` elements.
 */
enum RlnkStatus rlnk_pipeline_f1_infer(const struct RlnkPipeline *pipeline,
                                       const double *zhat,
                                       size_t n,
                                       uint8_t *out);

/**
 * Hamming loss between two `n × c` 0/1 matrices.
 *
 * # Safety
 * `y` and `yhat` must hold `n·c` bytes; `out` must be writable.
 */
enum RlnkStatus rlnk_hamming_loss(const uint8_t *y,
                                  const uint8_t *yhat,
                                  size_t n,
                                  size_t c,
                                  double *out);

/**
 * Macro-averaged F1 between two `n × c` 0/1 matrices.
 *
 * # Safety
 * `y` and `yhat` must hold `n·c` bytes; `out` must be writable.
 */
enum RlnkStatus rlnk_macro_f1(const uint8_t *y,
                              const uint8_t *yhat,
                              size_t n,
                              size_t c,
                              double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RLINK_H */
