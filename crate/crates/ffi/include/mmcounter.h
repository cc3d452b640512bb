#ifndef MMCOUNTER_H
#define MMCOUNTER_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes; the non-zero values match the command line exit codes
 * where one exists.
 */
typedef enum MmcStatus {
  MMC_STATUS_OK = 0,
  /**
   * Null pointer, invalid UTF-8 or out-of-range argument.
   */
  MMC_STATUS_INVALID_ARGUMENT = 1,
  /**
   * Malformed input or configuration.
   */
  MMC_STATUS_PARSE = 2,
  MMC_STATUS_CORRUPT = 3,
  MMC_STATUS_MISSING = 4,
  MMC_STATUS_INTERNAL = 5,
} MmcStatus;

/**
 * Pipeline configuration plus an optional classifier.
 */
typedef struct MmcPipeline MmcPipeline;

typedef struct MmcProfile MmcProfile;

typedef struct MmcResolutions {
  double range_resolution;
  double velocity_resolution;
  double max_range;
  double max_velocity;
} MmcResolutions;

typedef struct MmcCount {
  size_t count;
  /**
   * Winning votes over the number of augmentations.
   */
  double confidence;
  /**
   * 0 clustering, 1 attention classifier.
   */
  int method;
} MmcCount;

typedef struct MmcWeightedMetrics {
  double precision;
  double recall;
  double f1;
} MmcWeightedMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *mmc_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *mmc_version(void);

/**
 * Derived resolutions of a named preset (`full`, `low-res`, `compact`).
 *
 * # Safety
 * `preset_name` must be a NUL-terminated string and `out` a valid pointer.
 */
enum MmcStatus mmc_resolutions(const char *preset_name, struct MmcResolutions *out);

/**
 * Simulates the scene JSON file into an `.mmcr` recording. Existing
 * output is only replaced when `overwrite` is non-zero.
 *
 * # Safety
 * All pointers must be NUL-terminated strings.
 */
enum MmcStatus mmc_simulate_file(const char *scene_path,
                                 const char *preset_name,
                                 const char *out_path,
                                 int overwrite);

/**
 * New pipeline with default parameters and the clustering estimator.
 */
struct MmcPipeline *mmc_pipeline_new(void);

/**
 * # Safety
 * `p` must come from [`mmc_pipeline_new`] and not be used afterwards.
 */
void mmc_pipeline_free(struct MmcPipeline *p);

/**
 * Breathing band edges (Hz) and minimum breathing score.
 *
 * # Safety
 * `p` must be a live pipeline handle.
 */
enum MmcStatus mmc_pipeline_set_breathing(struct MmcPipeline *p,
                                          double low_hz,
                                          double high_hz,
                                          double min_quality);

/**
 * Seed, ICA iteration count and minimum non-zero fraction.
 *
 * # Safety
 * `p` must be a live pipeline handle.
 */
enum MmcStatus mmc_pipeline_set_separation(struct MmcPipeline *p,
                                           uint64_t seed,
                                           size_t ica_iterations,
                                           double min_nonzero_fraction);

/**
 * Loads a classifier checkpoint and switches the estimator to it.
 *
 * # Safety
 * `p` must be a live pipeline handle and `model_path` a NUL-terminated string.
 */
enum MmcStatus mmc_pipeline_load_model(struct MmcPipeline *p, const char *model_path);

/**
 * Runs the whole pipeline on an `.mmcr` recording.
 *
 * # Safety
 * `p` must be a live pipeline handle, `path` a NUL-terminated string and
 * `out` a valid pointer.
 */
enum MmcStatus mmc_count_recording(const struct MmcPipeline *p,
                                   const char *path,
                                   struct MmcCount *out);

/**
 * Loads a profile CSV.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum MmcStatus mmc_profile_load(const char *path, struct MmcProfile **out);

/**
 * Builds a profile from a row-major `rows x cols` matrix. Columns are
 * labelled `point:<j>:0`. Rows are used as given.
 *
 * # Safety
 * `data` must point to `rows * cols` doubles and `out` be a valid pointer.
 */
enum MmcStatus mmc_profile_from_rows(const double *data,
                                     size_t rows,
                                     size_t cols,
                                     struct MmcProfile **out);

/**
 * # Safety
 * `p` must be a live profile handle.
 */
size_t mmc_profile_rows(const struct MmcProfile *p);

/**
 * # Safety
 * `p` must be a live profile handle.
 */
size_t mmc_profile_cols(const struct MmcProfile *p);

/**
 * # Safety
 * `p` must come from a profile constructor and not be used afterwards.
 */
void mmc_profile_free(struct MmcProfile *p);

/**
 * Counts people in a profile with the pipeline's estimator.
 *
 * # Safety
 * Handles must be live and `out` a valid pointer.
 */
enum MmcStatus mmc_profile_count(const struct MmcPipeline *p,
                                 const struct MmcProfile *profile,
                                 struct MmcCount *out);

/**
 * Mean absolute and mean squared counting error over `n` pairs.
 *
 * # Safety
 * `pred` and `truth` must point to `n` values; `mae` and `mse` must be valid.
 */
enum MmcStatus mmc_counting_errors(const size_t *pred,
                                   const size_t *truth,
                                   size_t n,
                                   double *mae,
                                   double *mse);

/**
 * Weighted precision, recall and F1 from per-class precision/recall and
 * class weights, all arrays of length `n` indexed alike.
 *
 * # Safety
 * Array pointers must point to `n` values and `out` be valid.
 */
enum MmcStatus mmc_weighted_metrics(const size_t *labels,
                                    const double *precision,
                                    const double *recall,
                                    const double *weights,
                                    size_t n,
                                    struct MmcWeightedMetrics *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MMCOUNTER_H */
