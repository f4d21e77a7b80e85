#ifndef TTFS_H
#define TTFS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call.
typedef enum TtfsStatus {
  TTFS_STATUS_OK = 0,
  TTFS_STATUS_NULL_POINTER = 1,
  TTFS_STATUS_INVALID_ARGUMENT = 2,
  TTFS_STATUS_IO = 3,
  TTFS_STATUS_FORMAT = 4,
  TTFS_STATUS_DIMENSION = 5,
  TTFS_STATUS_QUANTIZATION = 6,
  TTFS_STATUS_EMULATOR = 7,
  TTFS_STATUS_INTERNAL = 8,
  TTFS_STATUS_PANIC = 9,
} TtfsStatus;

// Packed synapse and dendrite memories.
typedef struct TtfsImage TtfsImage;

// A trained floating-point network.
typedef struct TtfsModel TtfsModel;

// A fixed-point network.
typedef struct TtfsQuantized TtfsQuantized;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *ttfs_version(void);

// Message of the last failed call on this thread, or NULL. Valid until the
// next failing call on the same thread.
const char *ttfs_last_error(void);

// Loads the network from a training checkpoint.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a writable pointer.
enum TtfsStatus ttfs_model_load(const char *path, struct TtfsModel **out);

// # Safety
// `model` must come from this library and not be used afterwards.
void ttfs_model_free(struct TtfsModel *model);

// Number of input pixels, or 0 for NULL.
//
// # Safety
// `model` must be NULL or a live handle.
size_t ttfs_model_input_size(const struct TtfsModel *model);

// Number of tasks, or 0 for NULL.
//
// # Safety
// `model` must be NULL or a live handle.
size_t ttfs_model_task_count(const struct TtfsModel *model);

// Classifies one 8-bit image under `task`.
//
// # Safety
// `pixels` must point to `len` bytes; `out_class` must be writable.
enum TtfsStatus ttfs_model_predict(const struct TtfsModel *model,
                                   const uint8_t *pixels,
                                   size_t len,
                                   size_t task,
                                   uint32_t *out_class);

// Quantizes the network to 4-bit weights and 8-bit delays.
//
// # Safety
// `model` must be a live handle and `out` writable.
enum TtfsStatus ttfs_model_quantize(const struct TtfsModel *model, struct TtfsQuantized **out);

// # Safety
// `q` must come from this library and not be used afterwards.
void ttfs_quantized_free(struct TtfsQuantized *q);

// Classifies one image with the discrete fixed-point reference inference.
//
// # Safety
// As for [`ttfs_model_predict`].
enum TtfsStatus ttfs_quantized_predict(const struct TtfsQuantized *q,
                                       const uint8_t *pixels,
                                       size_t len,
                                       size_t task,
                                       uint32_t *out_class);

// Packs a quantized network into memory words.
//
// # Safety
// `q` must be a live handle and `out` writable.
enum TtfsStatus ttfs_image_export(const struct TtfsQuantized *q, struct TtfsImage **out);

// # Safety
// `path` must be a NUL-terminated string and `out` writable.
enum TtfsStatus ttfs_image_load(const char *path, struct TtfsImage **out);

// # Safety
// `image` must be a live handle and `path` a NUL-terminated string.
enum TtfsStatus ttfs_image_save(const struct TtfsImage *image, const char *path);

// # Safety
// `image` must come from this library and not be used afterwards.
void ttfs_image_free(struct TtfsImage *image);

// Number of output neurons of the image, or 0 for NULL.
//
// # Safety
// `image` must be NULL or a live handle.
size_t ttfs_image_output_size(const struct TtfsImage *image);

// Runs one image through the hardware emulator. `out_times` receives one
// spike timestep per output neuron (-1 for no spike) and must hold
// `out_len >= ttfs_image_output_size(image)` entries; it may be NULL when
// `out_len` is 0.
//
// # Safety
// `pixels` must point to `len` bytes, `out_times` to `out_len` writable
// `int32_t`, and `out_class` must be writable.
enum TtfsStatus ttfs_emulate(const struct TtfsImage *image,
                             const uint8_t *pixels,
                             size_t len,
                             size_t task,
                             uint32_t *out_class,
                             int32_t *out_times,
                             size_t out_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TTFS_H */
