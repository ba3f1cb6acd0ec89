#ifndef KLDETECT_H
#define KLDETECT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum KdStatus {
  KD_STATUS_OK = 0,
  // A null pointer, bad UTF-8, unknown name or undersized buffer.
  KD_STATUS_INVALID_ARGUMENT = 1,
  KD_STATUS_IO = 2,
  // Malformed, inconsistent or unusable data.
  KD_STATUS_DATA = 3,
  KD_STATUS_INVALID_CONFIG = 4,
  // A bundle that could not be encoded or decoded.
  KD_STATUS_ENCODING = 5,
  KD_STATUS_PANIC = 6,
} KdStatus;

// A trained model together with its scaler and feature selection.
typedef struct KdModel KdModel;

// A loaded table of flows with binary labels.
typedef struct KdTable KdTable;

// Held-out metrics. Undefined ratios are NaN.
typedef struct KdMetrics {
  double accuracy;
  double precision;
  double recall;
  double specificity;
  double f1;
  double auc;
} KdMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer
// stays valid until the next failing call on the same thread.
const char *kd_last_error(void);

// Library version as a static NUL-terminated string.
const char *kd_version(void);

// Loads a flow CSV, dropping the identifier columns. `label_column` may be
// null to use the default candidates.
//
// # Safety
// `path` and a non-null `label_column` must be NUL-terminated strings; `out`
// must be writable.
enum KdStatus kd_table_load_csv(const char *path, const char *label_column, struct KdTable **out);

// Builds a table from a row-major `n_rows * n_features` matrix and 0/1
// labels. Features are named `f0`, `f1`, ...
//
// # Safety
// `features` must hold `n_rows * n_features` values and `labels` `n_rows`.
enum KdStatus kd_table_from_rows(const double *features,
                                 const uint8_t *labels,
                                 uintptr_t n_rows,
                                 uintptr_t n_features,
                                 struct KdTable **out);

// # Safety
// `table` must be null or a live handle.
uintptr_t kd_table_n_rows(const struct KdTable *table);

// # Safety
// `table` must be null or a live handle.
uintptr_t kd_table_n_features(const struct KdTable *table);

// Copies the 0/1 labels into `out`.
//
// # Safety
// `out` must hold `len` bytes.
enum KdStatus kd_table_labels(const struct KdTable *table, uint8_t *out, uintptr_t len);

// # Safety
// `table` must be null or a handle not yet freed.
void kd_table_free(struct KdTable *table);

// Fits a MinMax scaler on `table`, optionally balances it with SMOTE,
// applies the named feature-selection scenario (`all`, `info_gain`,
// `lasso_l1`, `fisher_score`) and trains the named model with its defaults.
//
// # Safety
// `table` must be a live handle, `scenario` and `model` NUL-terminated
// strings, `out` writable.
enum KdStatus kd_model_train(const struct KdTable *table,
                             const char *scenario,
                             const char *model,
                             uint64_t seed,
                             bool smote,
                             struct KdModel **out);

// Writes the model as `model.json` style JSON, or the compact binary form
// when `path` ends in `.bin`.
//
// # Safety
// `model` must be a live handle and `path` a NUL-terminated string.
enum KdStatus kd_model_save(const struct KdModel *model, const char *path);

// # Safety
// `path` must be a NUL-terminated string and `out` writable.
enum KdStatus kd_model_load(const char *path, struct KdModel **out);

// Number of features the model consumes after selection.
//
// # Safety
// `model` must be null or a live handle.
uintptr_t kd_model_n_features(const struct KdModel *model);

// # Safety
// `model` must be null or a handle not yet freed.
void kd_model_free(struct KdModel *model);

// Class-1 probabilities for every row of a raw (unscaled) table.
//
// # Safety
// Handles must be live and `out` must hold `len` doubles.
enum KdStatus kd_model_predict_proba(const struct KdModel *model,
                                     const struct KdTable *table,
                                     double *out,
                                     uintptr_t len);

// Metrics of the model on `table`, predictions at the 0.5 threshold.
//
// # Safety
// Handles must be live and `out` writable.
enum KdStatus kd_model_evaluate(const struct KdModel *model,
                                const struct KdTable *table,
                                struct KdMetrics *out);

// Area under the ROC curve of `scores` against 0/1 `labels`.
//
// # Safety
// `labels` and `scores` must hold `n` values; `out` must be writable.
enum KdStatus kd_roc_auc(const uint8_t *labels, const double *scores, uintptr_t n, double *out);

// SHAP values of row `row` of a raw table, against a background of up to
// `background_size` rows of the same table. Writes one value per model
// feature into `out` and the background expectation into `base_value`.
//
// # Safety
// Handles must be live, `out` must hold `len` doubles and `base_value` be
// null or writable.
enum KdStatus kd_model_shap(const struct KdModel *model,
                            const struct KdTable *table,
                            uintptr_t row,
                            uintptr_t background_size,
                            uint64_t seed,
                            double *out,
                            uintptr_t len,
                            double *base_value);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* KLDETECT_H */
