#ifndef IHM_H
#define IHM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum IhmStatus {
  IHM_STATUS_OK = 0,
  IHM_STATUS_INVALID_ARGUMENT = 1,
  IHM_STATUS_CONFIG_ERROR = 2,
  IHM_STATUS_DATA_ERROR = 3,
  IHM_STATUS_TRAINING_ERROR = 4,
  IHM_STATUS_IO_ERROR = 5,
  IHM_STATUS_PANIC = 6,
} IhmStatus;

/**
 * Cohort partition selector.
 */
typedef enum IhmSplit {
  IHM_SPLIT_TRAIN = 0,
  IHM_SPLIT_VAL = 1,
  IHM_SPLIT_TEST = 2,
} IhmSplit;

/**
 * A loaded or generated cohort.
 */
typedef struct IhmCohort IhmCohort;

/**
 * A trained model together with its featurization settings.
 */
typedef struct IhmModel IhmModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *ihm_version(void);

/**
 * Message of the last failed call on this thread, or null if none. The
 * pointer stays valid until the next failing call on this thread.
 */
const char *ihm_last_error(void);

/**
 * Loads a cohort JSONL file. In strict mode the first invalid line fails
 * the call; otherwise invalid lines are skipped.
 *
 * # Safety
 * `path` must be a valid NUL-terminated string and `out` a valid pointer.
 */
enum IhmStatus ihm_cohort_load(const char *path, bool strict, struct IhmCohort **out);

/**
 * Generates a synthetic cohort with default settings for `n_patients`
 * episodes and the given seed.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum IhmStatus ihm_cohort_generate(size_t n_patients, uint64_t seed, struct IhmCohort **out);

/**
 * Number of episodes; 0 for a null handle.
 *
 * # Safety
 * `cohort` must be null or a handle from this library.
 */
size_t ihm_cohort_len(const struct IhmCohort *cohort);

/**
 * Share of positive labels; NaN for a null or empty handle.
 *
 * # Safety
 * `cohort` must be null or a handle from this library.
 */
double ihm_cohort_prevalence(const struct IhmCohort *cohort);

/**
 * # Safety
 * `cohort` must be null or a handle from this library not yet freed.
 */
void ihm_cohort_free(struct IhmCohort *cohort);

/**
 * Trains `variant` (e.g. `"ts_notes_expert"`) on the training split of
 * `cohort`. `config_toml` uses the CLI config format; null means defaults.
 *
 * # Safety
 * `cohort` must be a live handle, `variant` a valid string, `config_toml`
 * null or a valid string, and `out` a valid pointer.
 */
enum IhmStatus ihm_model_train(const struct IhmCohort *cohort,
                               const char *variant,
                               const char *config_toml,
                               struct IhmModel **out);

/**
 * Loads a checkpoint JSON written by the CLI or [`ihm_model_save`].
 *
 * # Safety
 * `path` must be a valid string and `out` a valid pointer.
 */
enum IhmStatus ihm_model_load(const char *path, struct IhmModel **out);

/**
 * # Safety
 * `model` must be a live handle and `path` a valid string.
 */
enum IhmStatus ihm_model_save(const struct IhmModel *model, const char *path);

/**
 * Scores one split of `cohort`, writing at most `capacity` probabilities
 * to `scores` in split order and the split size to `written`. Fails with
 * `InvalidArgument` when the buffer is too small; `written` still holds the
 * required size.
 *
 * # Safety
 * `model` and `cohort` must be live handles, `scores` must point to
 * `capacity` doubles (or be null with `capacity == 0`), and `written` must
 * be a valid pointer.
 */
enum IhmStatus ihm_model_predict(const struct IhmModel *model,
                                 const struct IhmCohort *cohort,
                                 enum IhmSplit split,
                                 double *scores,
                                 size_t capacity,
                                 size_t *written);

/**
 * # Safety
 * `model` must be null or a handle from this library not yet freed.
 */
void ihm_model_free(struct IhmModel *model);

/**
 * Area under the ROC curve of `n` scores with 0/1 labels.
 *
 * # Safety
 * `scores` and `labels` must each point to `n` elements.
 */
enum IhmStatus ihm_auroc(const double *scores, const uint8_t *labels, size_t n, double *out);

/**
 * Average precision of `n` scores with 0/1 labels.
 *
 * # Safety
 * `scores` and `labels` must each point to `n` elements.
 */
enum IhmStatus ihm_auprc(const double *scores, const uint8_t *labels, size_t n, double *out);

/**
 * Percent change of `metric` over `baseline`; requires `baseline > 0`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum IhmStatus ihm_improvement(double metric, double baseline, double *out);

/**
 * `exp(-lambda * (t - chart_time))`; requires `chart_time <= t` and
 * `lambda >= 0`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum IhmStatus ihm_decay_weight(double t, double chart_time, double lambda, double *out);

/**
 * Hashed unigram+bigram embedding of `text` into `dim` L2-normalized
 * components written to `out`.
 *
 * # Safety
 * `text` must be a valid string and `out` must point to `dim` doubles.
 */
enum IhmStatus ihm_embed_text(const char *text, size_t dim, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* IHM_H */
