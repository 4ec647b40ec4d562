#ifndef DRAGFORGE_H
#define DRAGFORGE_H

/* Generated by cbindgen from dragforge-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes returned by every fallible function.
typedef enum df_status {
  DF_STATUS_OK = 0,
  // A pointer argument was null or a value was out of range.
  DF_STATUS_INVALID_ARGUMENT = 1,
  // Geometry could not be built or rasterized.
  DF_STATUS_GEOMETRY = 2,
  // The flow solve or the training run diverged.
  DF_STATUS_DIVERGED = 3,
  // File or parse error.
  DF_STATUS_IO = 4,
  // Any other library error; see `df_last_error_message`.
  DF_STATUS_INTERNAL = 5,
} df_status;

// Opaque dataset handle.
typedef struct df_dataset df_dataset;

// Opaque surrogate-model handle.
typedef struct df_model df_model;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *df_version(void);

// Copies the calling thread's last error message into `buf` (truncated to
// `len - 1` bytes, always NUL-terminated). Returns the full message length.
uintptr_t df_last_error_message(char *buf, uintptr_t len);

// Runs the flow solver on one shape with the default configuration.
// `theta` points at 4 control heights; drag and a 0/1 convergence flag are
// written to the out-pointers.
//
// # Safety
// `theta` must point at 4 readable doubles; out-pointers must be writable.
enum df_status df_evaluate_shape(const double *theta,
                                 double width,
                                 double *drag_out,
                                 int32_t *converged_out);

// Generates the full-factorial dataset (`levels`^4 flow solves) at the
// given width. On success writes a new handle; free with `df_dataset_free`.
//
// # Safety
// `out` must be a writable pointer.
enum df_status df_dataset_generate(double width, uintptr_t levels, struct df_dataset **out);

// Loads a dataset from a CSV file written by `df_dataset_save_csv`.
//
// # Safety
// `path` must be NUL-terminated; `out` writable.
enum df_status df_dataset_load_csv(const char *path, struct df_dataset **out);

// # Safety
// `ds` must be a live handle; `path` NUL-terminated.
enum df_status df_dataset_save_csv(const struct df_dataset *ds, const char *path);

// Number of samples in the dataset; 0 for a null handle.
//
// # Safety
// `ds` must be a live handle or null.
uintptr_t df_dataset_len(const struct df_dataset *ds);

// # Safety
// `ds` must come from this library and not be freed twice.
void df_dataset_free(struct df_dataset *ds);

// Trains the standard six-hidden-layer network on `ds`. `epochs` and
// `step_size` of 0 select the library defaults.
//
// # Safety
// `ds` must be a live handle; `out` writable.
enum df_status df_model_train(const struct df_dataset *ds,
                              uint64_t seed,
                              uintptr_t epochs,
                              double step_size,
                              struct df_model **out);

// Loads a model from its JSON serialization.
//
// # Safety
// `path` must be NUL-terminated; `out` writable.
enum df_status df_model_load_json(const char *path, struct df_model **out);

// # Safety
// `model` must be a live handle; `path` NUL-terminated.
enum df_status df_model_save_json(const struct df_model *model, const char *path);

// Surrogate drag prediction for one shape.
//
// # Safety
// `model` live handle, `theta` 4 doubles, `out` writable.
enum df_status df_model_predict(const struct df_model *model,
                                const double *theta,
                                double width,
                                double *out);

// Gradient of the prediction with respect to (θ₁..θ₄, width); writes 5
// doubles to `grad_out`.
//
// # Safety
// `model` live handle, `theta` 4 doubles, `grad_out` 5 writable doubles.
enum df_status df_model_gradient(const struct df_model *model,
                                 const double *theta,
                                 double width,
                                 double *grad_out);

// # Safety
// `model` must come from this library and not be freed twice.
void df_model_free(struct df_model *model);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DRAGFORGE_H */
