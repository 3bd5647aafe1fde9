#ifndef VOCODER_FINGERPRINT_H
#define VOCODER_FINGERPRINT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum VfpStatus {
  VFP_STATUS_OK = 0,
  VFP_STATUS_NULL_POINTER = 1,
  VFP_STATUS_INVALID_ARGUMENT = 2,
  VFP_STATUS_IO = 3,
  VFP_STATUS_MISSING_INPUT = 4,
  VFP_STATUS_FORMAT = 5,
  VFP_STATUS_UNSUPPORTED = 6,
  VFP_STATUS_LENGTH = 7,
  VFP_STATUS_DIMENSION = 8,
  VFP_STATUS_CONFIG = 9,
  VFP_STATUS_DATA = 10,
  VFP_STATUS_CHECKPOINT = 11,
  VFP_STATUS_PANIC = 12,
} VfpStatus;

typedef enum VfpFeatureKind {
  VFP_FEATURE_KIND_LFCC = 0,
  VFP_FEATURE_KIND_MFCC = 1,
} VfpFeatureKind;

/**
 * A feature matrix, frames by dims, row-major.
 */
typedef struct VfpFeatures VfpFeatures;

/**
 * A loaded classifier with its class names and feature configuration.
 */
typedef struct VfpModel VfpModel;

typedef struct VfpScores {
  double precision;
  double recall;
  double f1;
} VfpScores;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty if none. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *vfp_last_error(void);

/**
 * Loads a checkpoint file. On success `*out` receives a handle to release
 * with [`vfp_model_free`].
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum VfpStatus vfp_model_load(const char *path, struct VfpModel **out);

/**
 * # Safety
 * `model` must come from [`vfp_model_load`] and not be used afterwards.
 */
void vfp_model_free(struct VfpModel *model);

/**
 * Number of classes, or 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t vfp_model_num_classes(const struct VfpModel *model);

/**
 * Length of the fingerprint vector, or 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t vfp_model_fingerprint_dim(const struct VfpModel *model);

/**
 * Feature dimensions the model expects, or 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t vfp_model_feature_dims(const struct VfpModel *model);

/**
 * Name of class `index`, or null when out of range. Owned by the model.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
const char *vfp_model_class_name(const struct VfpModel *model, size_t index);

/**
 * Extracts features from `n_samples` samples in [-1, 1].
 *
 * # Safety
 * `samples` must point to `n_samples` doubles and `out` be valid.
 */
enum VfpStatus vfp_features_extract(const double *samples,
                                    size_t n_samples,
                                    uint32_t sample_rate_hz,
                                    enum VfpFeatureKind kind,
                                    struct VfpFeatures **out);

/**
 * Extracts features with the configuration stored in the model's checkpoint.
 *
 * # Safety
 * `model` must be a live handle, `samples` point to `n_samples` doubles
 * and `out` be valid.
 */
enum VfpStatus vfp_features_extract_for_model(const struct VfpModel *model,
                                              const double *samples,
                                              size_t n_samples,
                                              uint32_t sample_rate_hz,
                                              struct VfpFeatures **out);

/**
 * Reads a 16-bit mono WAV file and extracts features.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` valid.
 */
enum VfpStatus vfp_features_from_wav(const char *path,
                                     enum VfpFeatureKind kind,
                                     struct VfpFeatures **out);

/**
 * # Safety
 * `features` must be null or a live handle.
 */
size_t vfp_features_frames(const struct VfpFeatures *features);

/**
 * # Safety
 * `features` must be null or a live handle.
 */
size_t vfp_features_dims(const struct VfpFeatures *features);

/**
 * Row-major `frames * dims` values owned by the handle, or null.
 *
 * # Safety
 * `features` must be null or a live handle.
 */
const float *vfp_features_data(const struct VfpFeatures *features);

/**
 * # Safety
 * `features` must come from an extract call and not be used afterwards.
 */
void vfp_features_free(struct VfpFeatures *features);

/**
 * Classifies one utterance. `*out_class` receives the arg-max class; when
 * `out_logits` is non-null it receives `logits_len` logits, which must
 * equal the class count.
 *
 * # Safety
 * Handles must be live; `out_logits` must be null or hold `logits_len`
 * floats.
 */
enum VfpStatus vfp_model_classify(const struct VfpModel *model,
                                  const struct VfpFeatures *features,
                                  size_t *out_class,
                                  float *out_logits,
                                  size_t logits_len);

/**
 * Writes the fingerprint (pooled embedding) into `out`, which must hold
 * exactly [`vfp_model_fingerprint_dim`] floats.
 *
 * # Safety
 * Handles must be live and `out` hold `out_len` floats.
 */
enum VfpStatus vfp_model_embed(const struct VfpModel *model,
                               const struct VfpFeatures *features,
                               float *out,
                               size_t out_len);

/**
 * Precision, recall and F1 from one-vs-rest counts; zero denominators give 0.
 */
struct VfpScores vfp_metrics_f1(uint64_t tp, uint64_t fp, uint64_t fn_);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* VOCODER_FINGERPRINT_H */
