/* SPDX-License-Identifier: Apache-2.0
 *
 * C interface to the encrypted CNN engine.
 *
 * All objects are opaque handles released with their matching *_free call.
 * Every function returns a gcnn_status; on failure a description is
 * available from gcnn_last_error() on the calling thread. Output handles are
 * left untouched on failure.
 */
#ifndef GCNN_GCNN_H
#define GCNN_GCNN_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define GCNN_API __declspec(dllexport)
#else
#define GCNN_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum gcnn_status {
    GCNN_OK = 0,
    GCNN_ERR_USAGE = 2,
    GCNN_ERR_IO = 3,
    GCNN_ERR_SHAPE = 4,
    GCNN_ERR_NOISE = 5,
    GCNN_ERR_VERIFY = 6,
    GCNN_ERR_PARAM = 7,
    GCNN_ERR_RANGE = 8,
    GCNN_ERR_FORMAT = 9,
    GCNN_ERR_INTERNAL = 10
} gcnn_status;

typedef enum gcnn_backend { GCNN_BACKEND_CLEAR = 0, GCNN_BACKEND_GSW = 1 } gcnn_backend;

typedef enum gcnn_payload { GCNN_PAYLOAD_IMAGE = 1, GCNN_PAYLOAD_SCORES = 2 } gcnn_payload;

typedef struct gcnn_key gcnn_key;
typedef struct gcnn_model gcnn_model;
typedef struct gcnn_bundle gcnn_bundle;
typedef struct gcnn_report gcnn_report;

typedef struct gcnn_classify_options {
    size_t workers;      /* 0 is treated as 1 */
    int encrypt_weights; /* nonzero: model parameters enter as private inputs */
    uint64_t seed;       /* drives weight encryption and refresh randomness */
} gcnn_classify_options;

typedef struct gcnn_gate_stats {
    uint64_t nand_count;
    uint64_t constant_count;
    uint64_t refresh_count;
    uint64_t overflow_count; /* clear backend only */
    double max_noise;
    double seconds;
} gcnn_gate_stats;

/* Thread-local description of the last failure; empty after success. */
GCNN_API const char* gcnn_last_error(void);
GCNN_API const char* gcnn_status_name(gcnn_status status);
GCNN_API const char* gcnn_version(void);

/* Keys. `preset` is "toy" or "demo". */
GCNN_API gcnn_status gcnn_keygen(const char* preset, uint64_t seed, gcnn_key** out);
GCNN_API gcnn_status gcnn_key_load(const char* path, gcnn_key** out);
GCNN_API gcnn_status gcnn_key_save(const gcnn_key* key, const char* path);
GCNN_API const char* gcnn_key_preset(const gcnn_key* key);
GCNN_API size_t gcnn_key_ct_dim(const gcnn_key* key);
GCNN_API void gcnn_key_free(gcnn_key* key);

/* Models in the text model format. */
GCNN_API gcnn_status gcnn_model_load(const char* path, gcnn_model** out);
GCNN_API void gcnn_model_input_shape(const gcnn_model* model, size_t* channels, size_t* height, size_t* width);
GCNN_API void gcnn_model_format(const gcnn_model* model, unsigned* total_bits, unsigned* frac_bits);
GCNN_API size_t gcnn_model_class_count(const gcnn_model* model);
GCNN_API void gcnn_model_free(gcnn_model* model);

/* Image encryption. `key` is required for GCNN_BACKEND_GSW and ignored for
 * the clear backend. Images are .pgm (8-bit) or .csv with values in [-1, 1]. */
GCNN_API gcnn_status gcnn_encrypt_image(const gcnn_model* model, gcnn_backend backend, const gcnn_key* key,
                                        const char* image_path, uint64_t seed, gcnn_bundle** out);
GCNN_API gcnn_status gcnn_encrypt_values(const gcnn_model* model, gcnn_backend backend, const gcnn_key* key,
                                         const double* values, size_t count, uint64_t seed, gcnn_bundle** out);

/* Ciphertext bundles (encrypted images and encrypted scores). */
GCNN_API gcnn_status gcnn_bundle_load(const char* path, gcnn_bundle** out);
GCNN_API gcnn_status gcnn_bundle_save(const gcnn_bundle* bundle, const char* path);
GCNN_API gcnn_backend gcnn_bundle_backend(const gcnn_bundle* bundle);
GCNN_API gcnn_payload gcnn_bundle_payload(const gcnn_bundle* bundle);
GCNN_API size_t gcnn_bundle_value_count(const gcnn_bundle* bundle);
GCNN_API void gcnn_bundle_free(gcnn_bundle* bundle);

/* Encrypted inference. For gsw bundles `key` acts as the trusted refresh
 * oracle and must match the bundle's parameters. `options` and `stats` may
 * be NULL. */
GCNN_API gcnn_status gcnn_classify(const gcnn_model* model, const gcnn_bundle* image, const gcnn_key* key,
                                   const gcnn_classify_options* options, gcnn_bundle** scores,
                                   gcnn_gate_stats* stats);

/* Decrypts a scores bundle into `values` (capacity `capacity`). `count`
 * receives the number of scores and `label` the argmax, lowest index on
 * ties. Either output pointer may be NULL. */
GCNN_API gcnn_status gcnn_decrypt_scores(const gcnn_bundle* scores, const gcnn_key* key, double* values,
                                         size_t capacity, size_t* count, size_t* label);

/* Worst-case numerical error report for a model. */
GCNN_API gcnn_status gcnn_bound(const gcnn_model* model, gcnn_report** out);

/* Runs the fixed-point path on the clear backend and the double reference
 * for every image. Returns GCNN_ERR_VERIFY (with `out` filled) when any
 * class differs, any error exceeds the bound plus slack, or any value
 * overflows the format. */
GCNN_API gcnn_status gcnn_verify(const gcnn_model* model, const char* const* image_paths, size_t image_count,
                                 size_t workers, gcnn_report** out);

/* Writes `text` to `path` through a temporary file and rename. */
GCNN_API gcnn_status gcnn_save_text(const char* path, const char* text);

/* Report accessors. Text is owned by the report. */
GCNN_API const char* gcnn_report_text(const gcnn_report* report, int key_values);
GCNN_API double gcnn_report_r_product(const gcnn_report* report);
GCNN_API double gcnn_report_total_bound(const gcnn_report* report);
GCNN_API double gcnn_report_rescaling_slack(const gcnn_report* report);
GCNN_API size_t gcnn_report_image_count(const gcnn_report* report);
GCNN_API size_t gcnn_report_matches(const gcnn_report* report);
GCNN_API double gcnn_report_mean_error(const gcnn_report* report);
GCNN_API double gcnn_report_max_error(const gcnn_report* report);
GCNN_API void gcnn_report_free(gcnn_report* report);

#ifdef __cplusplus
}
#endif

#endif /* GCNN_GCNN_H */
