#ifndef SMRD_H
#define SMRD_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call.
typedef enum SmrdStatus {
  SMRD_STATUS_OK = 0,
  SMRD_STATUS_NULL_POINTER = 1,
  SMRD_STATUS_INVALID_UTF8 = 2,
  SMRD_STATUS_CONFIG = 3,
  SMRD_STATUS_IO = 4,
  SMRD_STATUS_NUMERICAL = 5,
  SMRD_STATUS_BUFFER_TOO_SMALL = 6,
  SMRD_STATUS_OUT_OF_RANGE = 7,
  SMRD_STATUS_PANIC = 8,
} SmrdStatus;

// Experiment configuration (phantom, mask, noise, prior, sampler, tuning).
typedef struct SmrdConfig SmrdConfig;

// A simulated or loaded acquisition.
typedef struct SmrdProblem SmrdProblem;

// Output of one reconstruction.
typedef struct SmrdReport SmrdReport;

// One row of a reconstruction trace. `mse` and `psnr` are NaN without ground truth.
typedef struct SmrdTraceRow {
  size_t t;
  double sure;
  double lambda;
  double mse;
  double psnr;
} SmrdTraceRow;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *smrd_version(void);

// Message for the most recent failure on this thread; empty after a success.
//
// The pointer stays valid until the next `smrd_*` call on the same thread.
const char *smrd_last_error(void);

// Default configuration.
//
// # Safety
// `out` must be null or valid for writing one pointer.
enum SmrdStatus smrd_config_new(struct SmrdConfig **out);

// Parses flat `key = value` text; unknown keys are rejected.
//
// # Safety
// `text` must be null or a NUL-terminated string; `out` null or writable.
enum SmrdStatus smrd_config_parse(const char *text, struct SmrdConfig **out);

// Sets one key; the config is left unchanged if the result would be invalid.
//
// # Safety
// `cfg` must be null or a live handle; `key` and `value` null or NUL-terminated.
enum SmrdStatus smrd_config_set(struct SmrdConfig *cfg, const char *key, const char *value);

// Serialized config; free the returned string with [`smrd_string_free`].
//
// # Safety
// `cfg` must be null or a live handle; `out` null or writable.
enum SmrdStatus smrd_config_to_text(const struct SmrdConfig *cfg, char **out);

// # Safety
// `s` must be null or a string returned by this library, not yet freed.
void smrd_string_free(char *s);

// # Safety
// `cfg` must be null or a handle from this library, not yet freed.
void smrd_config_free(struct SmrdConfig *cfg);

// Simulates phantom, coils, mask and noisy k-space in memory.
//
// # Safety
// `cfg` must be null or a live handle; `out` null or writable.
enum SmrdStatus smrd_problem_simulate(const struct SmrdConfig *cfg, struct SmrdProblem **out);

// Loads a directory written by `smrd simulate`.
//
// # Safety
// `dir` must be null or NUL-terminated; `out` null or writable.
enum SmrdStatus smrd_problem_load(const char *dir, struct SmrdProblem **out);

// Image height, width and coil count.
//
// # Safety
// `problem` must be null or a live handle; each out pointer null or writable.
enum SmrdStatus smrd_problem_shape(const struct SmrdProblem *problem,
                                   size_t *height,
                                   size_t *width,
                                   size_t *coils);

// # Safety
// `problem` must be null or a handle from this library, not yet freed.
void smrd_problem_free(struct SmrdProblem *problem);

// Runs the method named by the config's `sampler.method`.
//
// # Safety
// `cfg` and `problem` must be null or live handles; `out` null or writable.
enum SmrdStatus smrd_reconstruct(const struct SmrdConfig *cfg,
                                 const struct SmrdProblem *problem,
                                 struct SmrdReport **out);

// Executed steps (`T` when early stopping never fired, 0 for zero_filled).
//
// # Safety
// `report` must be null or a live handle; `out` null or writable.
enum SmrdStatus smrd_report_t_es(const struct SmrdReport *report, size_t *out);

// Final λ; NaN for methods without a data-consistency weight.
//
// # Safety
// `report` must be null or a live handle; `out` null or writable.
enum SmrdStatus smrd_report_final_lambda(const struct SmrdReport *report, double *out);

// # Safety
// `report` must be null or a live handle; `out` null or writable.
enum SmrdStatus smrd_report_trace_len(const struct SmrdReport *report, size_t *out);

// # Safety
// `report` must be null or a live handle; `out` null or writable.
enum SmrdStatus smrd_report_trace_row(const struct SmrdReport *report,
                                      size_t index,
                                      struct SmrdTraceRow *out);

// Copies the final image as interleaved (re, im) pairs in row-major order.
//
// `len` is the capacity of `buf` in doubles and must be at least `2·H·W`.
//
// # Safety
// `report` must be null or a live handle; `buf` null or valid for `len` doubles.
enum SmrdStatus smrd_report_copy_image(const struct SmrdReport *report, double *buf, size_t len);

// PSNR and SSIM of the report's final image against the problem's ground truth.
//
// # Safety
// `problem` and `report` must be null or live handles; out pointers null or writable.
enum SmrdStatus smrd_report_quality(const struct SmrdProblem *problem,
                                    const struct SmrdReport *report,
                                    double *psnr,
                                    double *ssim);

// # Safety
// `report` must be null or a handle from this library, not yet freed.
void smrd_report_free(struct SmrdReport *report);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SMRD_H */
