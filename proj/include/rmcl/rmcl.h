/* rmcl - resilient multiple choice learning for multimodal regression.
 *
 * C interface to the shared library: opaque handles plus integer status
 * codes. All functions returning rmcl_status set a thread-local message
 * readable through rmcl_last_error() on failure. Handles are created and
 * destroyed by the matching _create/_destroy pair; strings passed in are
 * copied, strings returned stay valid until the next call on the same
 * thread (messages) or until the owning handle is destroyed (names).
 */
#ifndef RMCL_H
#define RMCL_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define RMCL_API __declspec(dllexport)
#else
#define RMCL_API __attribute__((visibility("default")))
#endif

typedef enum rmcl_status {
  RMCL_OK = 0,
  RMCL_ERR_UNKNOWN = 1,
  RMCL_ERR_CONFIG = 2,  /* invalid configuration or arguments */
  RMCL_ERR_DATA = 3,    /* malformed files / datasets */
  RMCL_ERR_NUMERIC = 4, /* non-finite values, degenerate states */
  RMCL_ERR_IO = 5       /* filesystem failures */
} rmcl_status;

RMCL_API const char* rmcl_status_name(rmcl_status status);
RMCL_API const char* rmcl_last_error(void);

/* 0 = use all hardware threads. Worker count never changes results. */
RMCL_API void rmcl_set_num_threads(int n);

/* ------------------------------------------------------------- config --- */

/* Key-value configuration; the key set is documented in the README. */
typedef struct rmcl_config rmcl_config;

RMCL_API rmcl_config* rmcl_config_create(void);
RMCL_API void rmcl_config_destroy(rmcl_config* config);
RMCL_API rmcl_status rmcl_config_load(rmcl_config* config, const char* path);
RMCL_API rmcl_status rmcl_config_set(rmcl_config* config, const char* key,
                                     const char* value);
/* Writes the value into buf (NUL-terminated, truncating); missing keys fail
 * with RMCL_ERR_CONFIG. */
RMCL_API rmcl_status rmcl_config_get(const rmcl_config* config,
                                     const char* key, char* buf,
                                     size_t buf_len);

/* ------------------------------------------------------------ dataset --- */

/* Generates the synthetic dataset described by the config and writes it as
 * CSV (train + validation splits) to out_path. */
RMCL_API rmcl_status rmcl_generate_dataset(const rmcl_config* config,
                                           const char* out_path);

/* ----------------------------------------------------------- training --- */

/* Trains per the config on the dataset at dataset_path, writes the lowest-
 * validation-loss checkpoint to checkpoint_out, and (when log_out is not
 * NULL) the per-epoch loss log as a report JSON. */
RMCL_API rmcl_status rmcl_train(const rmcl_config* config,
                                const char* dataset_path,
                                const char* checkpoint_out,
                                const char* log_out);

/* Trains `members` single-hypothesis models with seeds train_seed + i and
 * writes them to <checkpoint_prefix><i>.ckpt. */
RMCL_API rmcl_status rmcl_train_ensemble(const rmcl_config* config,
                                         const char* dataset_path,
                                         int members,
                                         const char* checkpoint_prefix);

/* -------------------------------------------------------------- model --- */

typedef struct rmcl_model rmcl_model;

RMCL_API rmcl_model* rmcl_model_load(const char* path);
RMCL_API void rmcl_model_destroy(rmcl_model* model);
RMCL_API int rmcl_model_hypothesis_count(const rmcl_model* model);
RMCL_API int rmcl_model_output_dim(const rmcl_model* model);
RMCL_API int rmcl_model_input_dim(const rmcl_model* model);

/* One forward pass. hypotheses receives K*q doubles (head-major), scores K
 * raw scores in (0,1). Either output pointer may be NULL to skip it. */
RMCL_API rmcl_status rmcl_model_predict(const rmcl_model* model,
                                        const double* x, size_t x_len,
                                        double* hypotheses, double* scores);

/* ------------------------------------------------------------ reports --- */

/* A report is a table of named numeric columns plus string metadata. */
typedef struct rmcl_report rmcl_report;

RMCL_API void rmcl_report_destroy(rmcl_report* report);
RMCL_API size_t rmcl_report_rows(const rmcl_report* report);
RMCL_API size_t rmcl_report_cols(const rmcl_report* report);
RMCL_API const char* rmcl_report_column_name(const rmcl_report* report,
                                             size_t col);
RMCL_API rmcl_status rmcl_report_value(const rmcl_report* report, size_t row,
                                       size_t col, double* out);
RMCL_API rmcl_status rmcl_report_meta(const rmcl_report* report,
                                      const char* key, char* buf,
                                      size_t buf_len);
/* format is "csv" or "json"; the JSON form round-trips via _load. */
RMCL_API rmcl_status rmcl_report_export(const rmcl_report* report,
                                        const char* path, const char* format);
RMCL_API rmcl_report* rmcl_report_load(const char* path);

/* --------------------------------------------------------- evaluation --- */

/* Evaluates one or more checkpoints over the configured t grid. More than
 * one checkpoint is stacked into a single uniform-weight mixture
 * (independent-ensemble evaluation). On success *out owns a new report. */
RMCL_API rmcl_status rmcl_evaluate(const rmcl_config* config,
                                   const char* const* checkpoint_paths,
                                   size_t n_checkpoints, rmcl_report** out);

/* Probabilistic-interpretation diagnostics: per-cell centroid errors and
 * score-vs-mass calibration (cells_out) plus the winner histogram over the
 * dataset's validation split (histogram_out). */
RMCL_API rmcl_status rmcl_diagnose(const rmcl_config* config,
                                   const char* checkpoint_path,
                                   const char* dataset_path,
                                   rmcl_report** cells_out,
                                   rmcl_report** histogram_out);

/* ------------------------------------------------------------ numeric --- */

/* Exact 1-Wasserstein distance between two weighted point sets of dimension
 * dim; weights must each sum to 1. spherical != 0 selects the great-circle
 * distance over (phi, theta) pairs. */
RMCL_API rmcl_status rmcl_emd(const double* a_points, const double* a_weights,
                              size_t a_count, const double* b_points,
                              const double* b_weights, size_t b_count,
                              size_t dim, int spherical, double* out);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* RMCL_H */
