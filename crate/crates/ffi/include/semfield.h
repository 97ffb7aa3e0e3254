#ifndef SEMFIELD_H
#define SEMFIELD_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes. Zero is success.
 */
typedef enum SfStatus {
  SF_STATUS_OK = 0,
  SF_STATUS_NULL_POINTER = 1,
  SF_STATUS_INVALID_ARGUMENT = 2,
  SF_STATUS_CONFIG = 3,
  SF_STATUS_IO = 4,
  SF_STATUS_FORMAT = 5,
  SF_STATUS_VERSION = 6,
  SF_STATUS_RUNTIME = 7,
  SF_STATUS_PANIC = 8,
} SfStatus;

/**
 * Trained field together with its optimizer state.
 */
typedef struct SfField SfField;

/**
 * Analytic scene with ground-truth geometry and materials.
 */
typedef struct SfScene SfScene;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *sf_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *sf_version(void);

/**
 * Parses a scene from JSON text.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum SfStatus sf_scene_from_json(const char *json, struct SfScene **out);

/**
 * Loads a scene file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum SfStatus sf_scene_load(const char *path, struct SfScene **out);

/**
 * # Safety
 * `scene` must come from an `sf_scene_*` constructor and not be used afterwards.
 */
void sf_scene_free(struct SfScene *scene);

/**
 * Exact signed distance at `point` (three doubles).
 *
 * # Safety
 * Pointers must be valid; `point` must hold three doubles.
 */
enum SfStatus sf_scene_sdf(const struct SfScene *scene, const double *point, double *out);

/**
 * Ground-truth class index at a surface point. Fails with `InvalidArgument`
 * when the point is farther than the scene's surface tolerance.
 *
 * # Safety
 * Pointers must be valid; `point` must hold three doubles.
 */
enum SfStatus sf_scene_material(const struct SfScene *scene, const double *point, uint32_t *out);

/**
 * Loads a `.sfck` checkpoint.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum SfStatus sf_field_load(const char *path, struct SfField **out);

/**
 * Writes the field and optimizer state as a `.sfck` checkpoint.
 *
 * # Safety
 * `field` must be a live handle and `path` a NUL-terminated string.
 */
enum SfStatus sf_field_save(const struct SfField *field, const char *path);

/**
 * # Safety
 * `field` must come from an `sf_field_*` constructor and not be used afterwards.
 */
void sf_field_free(struct SfField *field);

/**
 * Number of material classes the field predicts.
 *
 * # Safety
 * `field` must be a live handle or NULL (which yields 0).
 */
size_t sf_field_num_classes(const struct SfField *field);

/**
 * Evaluates `n` points (`3n` doubles). Writes `n` distances to `sdf_out`,
 * `n` argmax classes to `class_out` and `n * num_classes` softmax
 * probabilities to `prob_out`. Any of the three outputs may be NULL.
 *
 * # Safety
 * Non-NULL buffers must have the sizes above.
 */
enum SfStatus sf_field_query(const struct SfField *field,
                             const double *points,
                             size_t n,
                             float *sdf_out,
                             uint32_t *class_out,
                             float *prob_out);

/**
 * Matching percentage of the field on `n_points` ROI samples drawn with `seed`.
 *
 * # Safety
 * Pointers must be valid handles.
 */
enum SfStatus sf_field_matching_percentage(const struct SfField *field,
                                           const struct SfScene *scene,
                                           size_t n_points,
                                           uint64_t seed,
                                           double *out);

/**
 * Trains a field on a simulated stream over `scene`. `config_json` uses the
 * run-config schema; its `scene` entry is ignored. `final_pct` may be NULL.
 *
 * # Safety
 * `config_json` must be NUL-terminated; other pointers must be valid.
 */
enum SfStatus sf_run_mapping(const struct SfScene *scene,
                             const char *config_json,
                             struct SfField **out,
                             double *final_pct);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SEMFIELD_H */
