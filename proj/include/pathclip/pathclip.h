/* Copyright (C) 2026 The pathclip Authors
 * SPDX-License-Identifier: Apache-2.0
 *
 * C interface to the pathclip library. Every function returns a pc_status;
 * on failure a human-readable message is available from pc_last_error() on
 * the calling thread until the next call into the library. Strings returned
 * through char** out-parameters are owned by the caller and released with
 * pc_string_free. Handles are released with their matching *_free function;
 * passing NULL to any *_free function is a no-op.
 */

#ifndef PATHCLIP_PATHCLIP_H_
#define PATHCLIP_PATHCLIP_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define PC_API __declspec(dllexport)
#else
#define PC_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum pc_status {
  PC_OK = 0,
  PC_INVALID_ARGUMENT = 1,
  PC_MISSING_FIELD = 2,
  PC_MALFORMED_NUMBER = 3,
  PC_VERTEX_COUNT_OUT_OF_RANGE = 4,
  PC_UNBALANCED_BRACKETS = 5,
  PC_UNEXPECTED_TOKEN = 6,
  PC_DEGENERATE_POLYGON = 7,
  PC_DIMENSION_MISMATCH = 8,
  PC_EMPTY_MASK = 9,
  PC_LENGTH_MISMATCH = 10,
  PC_EMPTY_EXEMPLARS = 11,
  PC_INVALID_EXEMPLAR = 12,
  PC_NO_PRIMITIVES_FOUND = 13,
  PC_BACKEND_FAILURE = 14,
  PC_FIXTURE_NOT_FOUND = 15,
  PC_STEP_ORDER_VIOLATION = 16,
  PC_NON_POSITIVE_VARIANCE = 17,
  PC_EMPTY_DATASET = 18,
  PC_SHAPE_MISMATCH = 19,
  PC_RANK_TOO_LARGE = 20,
  PC_NON_FINITE_ENERGY = 21,
  PC_UNKNOWN_PALETTE_TOKEN = 22,
  PC_IO = 23,
  PC_FORMAT = 24,
  PC_CONFIG = 25,
  PC_INVALID_SCHEDULE = 26,
  PC_EMPTY_INPUT = 27,
  PC_INTERNAL = 100
} pc_status;

typedef struct pc_config pc_config;
typedef struct pc_scene pc_scene;
typedef struct pc_model pc_model;

/* stage, step (1-based), total (0 when unknown), stage-specific value. */
typedef void (*pc_progress_fn)(const char* stage, int step, int total, double value, void* user);

PC_API const char* pc_version(void);
PC_API const char* pc_status_name(pc_status status);
PC_API const char* pc_last_error(void);
/* 1 when the status denotes bad input data rather than a runtime failure. */
PC_API int pc_status_is_input_error(pc_status status);
PC_API void pc_string_free(char* s);

/* Configuration. */
PC_API pc_status pc_config_new(pc_config** out);
PC_API pc_status pc_config_load(const char* path, pc_config** out);
PC_API pc_status pc_config_parse(const char* text, pc_config** out);
PC_API pc_status pc_config_set(pc_config* cfg, const char* key, const char* value);
PC_API pc_status pc_config_get(const pc_config* cfg, const char* key, char** value);
PC_API pc_status pc_config_serialize(const pc_config* cfg, char** text);
PC_API pc_status pc_config_validate(const pc_config* cfg);
PC_API void pc_config_free(pc_config* cfg);

/* Primitive grammar: parses one CSS primitive and writes its canonical form. */
PC_API pc_status pc_css_canonicalize(const char* css, char** canonical);

/* Scenes. */
PC_API pc_status pc_scene_from_json(const char* json, pc_scene** out);
PC_API pc_status pc_scene_load(const char* path, pc_scene** out);
PC_API pc_status pc_scene_save(const pc_scene* scene, const char* path);
PC_API pc_status pc_scene_to_json(const pc_scene* scene, char** json);
PC_API pc_status pc_scene_primitive_count(const pc_scene* scene, size_t* count);
PC_API void pc_scene_free(pc_scene* scene);

/* Fits one polygon per PGM mask; captions may be NULL. ious (may be NULL)
 * receives count values. */
PC_API pc_status pc_fit(const pc_config* cfg, const char* const* mask_paths, const char* const* captions,
                        size_t count, pc_scene** out, double* ious);

/* Plans a scene from a prompt with the configured planner backend. */
PC_API pc_status pc_plan(const pc_config* cfg, const char* prompt, pc_scene** out);

/* Toy denoiser. */
PC_API pc_status pc_model_load(const char* path, pc_model** out);
PC_API pc_status pc_model_save(const pc_model* model, const char* path);
PC_API pc_status pc_train(const pc_config* cfg, uint64_t seed, pc_progress_fn progress, void* user, pc_model** out);
PC_API void pc_model_free(pc_model* model);

/* Guided generation. condition_ppm and diagnostics_path may be NULL. */
PC_API pc_status pc_generate(const pc_model* model, const pc_config* cfg, const pc_scene* scene,
                             const char* condition_ppm, uint64_t seed, const char* out_ppm,
                             const char* diagnostics_path, pc_progress_fn progress, void* user);

/* DDIM inversion of a PPM image, conditioned on scene (NULL: null
 * conditioning). Writes the inverted noise and per-step features as feature
 * dumps into out_dir; round_trip_error (may be NULL) receives the relative L2
 * error of sampling back. */
PC_API pc_status pc_invert(const pc_model* model, const pc_config* cfg, const pc_scene* scene,
                           const char* image_ppm, const char* out_dir, double* round_trip_error);

/* Layout adherence of a PPM image against a scene; report_json may be NULL. */
PC_API pc_status pc_evaluate(const pc_config* cfg, const char* image_ppm, const pc_scene* scene,
                             double* precision, double* recall, char** report_json);

/* Adherence over the configured held-out synthetic scenes. */
PC_API pc_status pc_evaluate_model(const pc_model* model, const pc_config* cfg, uint64_t seed,
                                   pc_progress_fn progress, void* user, char** summary_json);

/* End-to-end demo bundle; report_json may be NULL. */
PC_API pc_status pc_demo(const pc_config* cfg, uint64_t seed, const char* out_dir, pc_progress_fn progress,
                         void* user, char** report_json);

#ifdef __cplusplus
}
#endif

#endif /* PATHCLIP_PATHCLIP_H_ */
