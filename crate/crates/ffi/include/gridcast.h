#ifndef GRIDCAST_H
#define GRIDCAST_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum GcStatus {
  GC_STATUS_OK = 0,
  GC_STATUS_NULL_POINTER = 1,
  GC_STATUS_INVALID_ARGUMENT = 2,
  GC_STATUS_IO = 3,
  GC_STATUS_DATA = 4,
  GC_STATUS_CONFIG = 5,
  GC_STATUS_COMPATIBILITY = 6,
  GC_STATUS_NUMERICAL = 7,
  GC_STATUS_BUFFER_TOO_SMALL = 8,
  GC_STATUS_PANIC = 9,
} GcStatus;

/**
 * A loaded checkpoint together with the dataset it was trained on.
 */
typedef struct GcModel GcModel;

typedef struct GcMetrics {
  double mae;
  double rmse;
  /**
   * Percent.
   */
  double mape;
  /**
   * Rows left out of MAPE because the actual value is near zero.
   */
  size_t mape_excluded;
} GcMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. The pointer is
 * valid until the next call into this library on the same thread.
 */
const char *gc_last_error(void);

/**
 * Library version as a static string.
 */
const char *gc_version(void);

/**
 * Loads a checkpoint and the processed dataset directory it was trained on.
 *
 * # Safety
 * `checkpoint_path` and `data_dir` must be NUL-terminated strings and `out`
 * a writable pointer.
 */
enum GcStatus gc_model_open(const char *checkpoint_path,
                            const char *data_dir,
                            struct GcModel **out);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `model` must come from [`gc_model_open`] and not be used afterwards.
 */
void gc_model_free(struct GcModel *model);

/**
 * # Safety
 * `model` must be a live handle and `out` writable.
 */
enum GcStatus gc_model_num_nodes(const struct GcModel *model, size_t *out);

/**
 * Input window length in hours.
 *
 * # Safety
 * `model` must be a live handle and `out` writable.
 */
enum GcStatus gc_model_seq_len(const struct GcModel *model, size_t *out);

/**
 * Number of scaled features per node and hour.
 *
 * # Safety
 * `model` must be a live handle and `out` writable.
 */
enum GcStatus gc_model_feature_width(const struct GcModel *model, size_t *out);

/**
 * Copies the name of node `index` into `buf` with a trailing NUL. `needed`,
 * when non-null, receives the buffer size required including the NUL.
 *
 * # Safety
 * `model` must be a live handle; `buf` must hold `buf_len` bytes.
 */
enum GcStatus gc_model_node_name(const struct GcModel *model,
                                 size_t index,
                                 char *buf,
                                 size_t buf_len,
                                 size_t *needed);

/**
 * Forecasts the load in MW one hour after `window_end` for every node,
 * using the dataset's own features. `window_end` is `YYYY-MM-DD HH:MM`.
 *
 * # Safety
 * `model` must be a live handle, `window_end` a NUL-terminated string and
 * `out` must hold `out_len` doubles.
 */
enum GcStatus gc_model_predict_at(const struct GcModel *model,
                                  const char *window_end,
                                  double *out,
                                  size_t out_len);

/**
 * Forecasts from caller-supplied scaled features laid out as
 * `[node][hour][feature]` (`num_nodes * seq_len * feature_width` values).
 * Writes one MW value per node.
 *
 * # Safety
 * `features` must hold `features_len` doubles and `out` `out_len` doubles.
 */
enum GcStatus gc_model_predict_features(const struct GcModel *model,
                                        const double *features,
                                        size_t features_len,
                                        double *out,
                                        size_t out_len);

/**
 * MAE, RMSE and MAPE over `n` paired values.
 *
 * # Safety
 * `actual` and `predicted` must each hold `n` doubles; `out` must be writable.
 */
enum GcStatus gc_metrics(const double *actual,
                         const double *predicted,
                         size_t n,
                         struct GcMetrics *out);

/**
 * Percentage by which `best` improves on `other`: `100 * (other - best) / other`.
 */
double gc_improvement(double best, double other);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GRIDCAST_H */
