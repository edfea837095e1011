/* Licensed under the Apache License 2.0 (see LICENSE file). */

#ifndef NEURALSURV_NEURALSURV_H
#define NEURALSURV_NEURALSURV_H

#include <stddef.h>
#include <stdint.h>

#if defined(NEURALSURV_BUILDING)
#define NS_API __attribute__((visibility("default")))
#else
#define NS_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes double as process exit codes for the command-line tool. */
typedef enum ns_status {
  NS_OK = 0,
  NS_ERR_INTERNAL = 1,
  NS_ERR_INPUT = 2,
  NS_ERR_NUMERIC = 3,
  /* An iteration cap was hit; the output handle is still produced. */
  NS_ERR_CONVERGENCE = 4
} ns_status;

typedef struct ns_config ns_config;
typedef struct ns_dataset ns_dataset;
typedef struct ns_model ns_model;
typedef struct ns_survival ns_survival;

/* Message of the last failed call on this thread ("" if none). */
NS_API const char* ns_last_error(void);
NS_API const char* ns_version(void);
/* Frees strings returned through char** out-parameters. */
NS_API void ns_string_free(char* s);
/* Caps internal worker threads; 0 or 1 runs everything on the calling thread. */
NS_API void ns_set_threads(size_t n);

/* Run configuration: key = value settings with defaults for every key. */
NS_API ns_status ns_config_create(ns_config** out);
NS_API void ns_config_free(ns_config* cfg);
NS_API ns_status ns_config_set(ns_config* cfg, const char* key, const char* value);
NS_API ns_status ns_config_get(const ns_config* cfg, const char* key, char** out);
NS_API ns_status ns_config_load(ns_config* cfg, const char* path);
NS_API ns_status ns_config_text(const ns_config* cfg, char** out);
NS_API ns_status ns_config_hash(const ns_config* cfg, char** out);

/* Right-censored data in original units. features is a comma list or "rest". */
NS_API ns_status ns_dataset_load_csv(const char* path, const char* time_col, const char* event_col,
                                     const char* features, ns_dataset** out);
/* Two-group lognormal benchmark with three noise covariates. */
NS_API ns_status ns_dataset_synthetic(size_t n, uint64_t seed, ns_dataset** out);
/* X is n x p row-major. */
NS_API ns_status ns_dataset_from_arrays(size_t n, size_t p, const double* X, const double* time, const int* event,
                                        ns_dataset** out);
NS_API ns_status ns_dataset_write_csv(const ns_dataset* ds, const char* path);
NS_API size_t ns_dataset_size(const ns_dataset* ds);
NS_API size_t ns_dataset_covariates(const ns_dataset* ds);
NS_API size_t ns_dataset_events(const ns_dataset* ds);
NS_API double ns_dataset_max_time(const ns_dataset* ds);
NS_API void ns_dataset_free(ns_dataset* ds);

/* MAP estimate by EM followed by coordinate-ascent variational inference.
   On NS_ERR_CONVERGENCE *out is still set. */
NS_API ns_status ns_fit(const ns_dataset* train, const ns_config* cfg, ns_model** out);
NS_API ns_status ns_model_save(const ns_model* model, const char* path);
NS_API ns_status ns_model_load(const char* path, ns_model** out);
/* JSON summaries: scalar state, and the EM / CAVI traces of a fitted (not loaded) model. */
NS_API ns_status ns_model_info(const ns_model* model, char** out);
NS_API ns_status ns_model_em_trace(const ns_model* model, char** out);
NS_API ns_status ns_model_cavi_trace(const ns_model* model, char** out);
/* Largest training time (original units), the model's time normalizer. */
NS_API double ns_model_max_time(const ns_model* model);
NS_API void ns_model_free(ns_model* model);

/* Posterior survival curves for every subject of ds at the given times
   (original units, non-decreasing). */
NS_API ns_status ns_predict(const ns_model* model, const ns_dataset* ds, const double* times, size_t n_times,
                            size_t draws, double level, uint64_t seed, ns_survival** out);
NS_API size_t ns_survival_subjects(const ns_survival* s);
NS_API size_t ns_survival_times(const ns_survival* s);
NS_API size_t ns_survival_draws(const ns_survival* s);
/* Each output array holds ns_survival_times values. */
NS_API ns_status ns_survival_summary(const ns_survival* s, size_t subject, double* mean, double* median, double* lo,
                                     double* hi);
/* draws x times, row-major. */
NS_API ns_status ns_survival_samples(const ns_survival* s, size_t subject, double* out);
/* Columns: subject, time, mean, median, lo, hi. */
NS_API ns_status ns_survival_write_csv(const ns_survival* s, const char* path);
/* "NSDRAWS1", u64 subjects, u64 draws, u64 times, the times, then each
   subject's draws x times block, all little-endian doubles. */
NS_API ns_status ns_survival_write_draws(const ns_survival* s, const char* path);
NS_API void ns_survival_free(ns_survival* s);

/* Metrics JSON {c_index, ipcw_ibs, n, n_events, grid}. constant_half != 0
   scores the constant 1/2 predictor instead of the model. */
NS_API ns_status ns_evaluate(const ns_model* model, const ns_dataset* test, const ns_config* cfg, int constant_half,
                             char** out);

#define NS_SELFTEST_FLIP_JACOBIAN 1u
/* Oracle checks; *passed is set to 1 when every check passes. */
NS_API ns_status ns_selftest(uint64_t seed, unsigned flags, char** report, int* passed);

#ifdef __cplusplus
}
#endif

#endif
