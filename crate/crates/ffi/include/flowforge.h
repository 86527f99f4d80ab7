#ifndef FLOWFORGE_H
#define FLOWFORGE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum FfStatus {
  FF_STATUS_OK = 0,
  FF_STATUS_NULL_ARGUMENT = 1,
  FF_STATUS_INVALID_UTF8 = 2,
  FF_STATUS_CONFIG = 3,
  FF_STATUS_DATA = 4,
  FF_STATUS_IO = 5,
  FF_STATUS_PANIC = 6,
} FfStatus;

// Opaque model handle.
typedef struct FfModel FfModel;

// Opaque table handle.
typedef struct FfTable FfTable;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failure on this thread, or NULL. Owned by the
// library; valid until the next failing call on the same thread.
const char *ff_last_error(void);

// Library version as a static NUL-terminated string.
const char *ff_version(void);

// Reads a CSV with the schema at `schema_path`, or the bundled BoT-IoT
// schema when `schema_path` is NULL.
//
// # Safety
// Paths must be NUL-terminated strings; `out` must be writable.
enum FfStatus ff_table_read_csv(const char *path, const char *schema_path, struct FfTable **out);

// Rows of `table`; 0 for NULL.
//
// # Safety
// `table` must be NULL or a live handle.
size_t ff_table_row_count(const struct FfTable *table);

// Columns of `table`; 0 for NULL.
//
// # Safety
// `table` must be NULL or a live handle.
size_t ff_table_column_count(const struct FfTable *table);

// # Safety
// `table` must be NULL or a handle not yet freed.
void ff_table_free(struct FfTable *table);

// Loads a model JSON written by `flowforge train`.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum FfStatus ff_model_load(const char *path, struct FfModel **out);

// # Safety
// `model` must be NULL or a live handle.
size_t ff_model_num_features(const struct FfModel *model);

// # Safety
// `model` must be NULL or a live handle.
size_t ff_model_num_classes(const struct FfModel *model);

// # Safety
// `model` must be NULL or a handle not yet freed.
void ff_model_free(struct FfModel *model);

// Predicts the class index of one feature vector, in model feature order
// and already normalized to [0,1].
//
// # Safety
// `row` must point to `len` doubles; `out_class` must be writable.
enum FfStatus ff_model_predict(const struct FfModel *model,
                               const double *row,
                               size_t len,
                               uint32_t *out_class);

// Chi-square statistic and degrees of freedom between two integer-coded
// columns of length `n`.
//
// # Safety
// `feature` and `target` must point to `n` values; outputs must be
// writable.
enum FfStatus ff_chi_square(const uint32_t *feature,
                            const uint32_t *target,
                            size_t n,
                            double *out_statistic,
                            size_t *out_dof);

// Runs the experiment described by a JSON config file. On success
// `*out_report` receives the report JSON, to be released with
// [`ff_string_free`].
//
// # Safety
// `config_path` must be a NUL-terminated string; `out_report` must be
// writable.
enum FfStatus ff_run_experiment(const char *config_path, char **out_report);

// # Safety
// `s` must be NULL or a string returned by this library, not yet freed.
void ff_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FLOWFORGE_H */
