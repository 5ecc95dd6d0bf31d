/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef TQS_H
#define TQS_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum TqsStatus {
  TQS_STATUS_OK = 0,
  TQS_STATUS_NULL_POINTER = 1,
  TQS_STATUS_INVALID_UTF8 = 2,
  TQS_STATUS_INVALID_CONFIG = 3,
  TQS_STATUS_INVALID_ARGUMENT = 4,
  TQS_STATUS_BUFFER_TOO_SMALL = 5,
  TQS_STATUS_NO_IMPACTS = 6,
  TQS_STATUS_PANIC = 7,
} TqsStatus;

/**
 * Opaque result of one batch run.
 */
typedef struct TqsBatch TqsBatch;

/**
 * Opaque validated configuration.
 */
typedef struct TqsConfig TqsConfig;

/**
 * Particles that did not reach the detector, by cause.
 */
typedef struct TqsFailures {
  uint64_t max_steps;
  uint64_t absorbed;
  uint64_t non_finite;
} TqsFailures;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *tqs_version(void);

/**
 * Copies the last error message of this thread, NUL-terminated, into `buf`.
 * Returns the message length without the terminator; a result `>= cap`
 * means it was truncated.
 *
 * # Safety
 * `buf` must be null or point to `cap` writable bytes.
 */
size_t tqs_last_error(char *buf, size_t cap);

/**
 * The bundled reference configuration.
 *
 * # Safety
 * `out` must be a valid pointer to a handle slot.
 */
enum TqsStatus tqs_config_appendix(struct TqsConfig **out);

/**
 * Parses `key = value` config text of `len` bytes (no terminator needed).
 *
 * # Safety
 * `text` must point to `len` readable bytes and `out` to a handle slot.
 */
enum TqsStatus tqs_config_parse(const char *text, size_t len, struct TqsConfig **out);

/**
 * Like [`tqs_config_parse`] for a NUL-terminated string.
 *
 * # Safety
 * `text` must be a valid C string and `out` a handle slot.
 */
enum TqsStatus tqs_config_parse_cstr(const char *text, struct TqsConfig **out);

/**
 * # Safety
 * `cfg` must be null or a handle from this library, freed at most once.
 */
void tqs_config_free(struct TqsConfig *cfg);

/**
 * Number of particles the config emits.
 *
 * # Safety
 * `cfg` must be a live config handle and `out` writable.
 */
enum TqsStatus tqs_config_particle_count(const struct TqsConfig *cfg, uint64_t *out);

/**
 * Runs every particle of `cfg`. `threads` 0 uses all cores.
 *
 * # Safety
 * `cfg` must be a live config handle and `out` a handle slot.
 */
enum TqsStatus tqs_run_batch(const struct TqsConfig *cfg, uint32_t threads, struct TqsBatch **out);

/**
 * # Safety
 * `batch` must be null or a handle from this library, freed at most once.
 */
void tqs_batch_free(struct TqsBatch *batch);

/**
 * Number of recorded impacts; 0 for a null handle.
 *
 * # Safety
 * `batch` must be null or a live batch handle.
 */
size_t tqs_batch_len(const struct TqsBatch *batch);

/**
 * # Safety
 * `batch` must be a live batch handle and `out` writable.
 */
enum TqsStatus tqs_batch_failures(const struct TqsBatch *batch, struct TqsFailures *out);

/**
 * Detector ordinates in emission order. `indices` may be null; otherwise it
 * receives the matching emission indices and must have the same capacity.
 *
 * # Safety
 * `y` and `indices` must be null or hold `cap` elements; `len` writable.
 */
enum TqsStatus tqs_batch_impacts(const struct TqsBatch *batch,
                                 double *y,
                                 uint64_t *indices,
                                 size_t cap,
                                 size_t *len);

/**
 * Bins the impacts with width `bin_width` on a grid through `origin`.
 * `first_edge` receives the lower edge of `counts[0]`.
 *
 * # Safety
 * `counts` must be null or hold `cap` elements; `len` and `first_edge`
 * writable.
 */
enum TqsStatus tqs_batch_histogram(const struct TqsBatch *batch,
                                   double bin_width,
                                   double origin,
                                   uint64_t *counts,
                                   size_t cap,
                                   size_t *len,
                                   double *first_edge);

/**
 * `floor(d / (v0 tau))` with integer snapping; 0 for invalid input.
 */
uint64_t tqs_compute_n0(double d, double v0, double tau);

/**
 * True when `d / (v0 tau)` is an integer of at least one.
 */
bool tqs_is_black_region(double d, double v0, double tau);

/**
 * Fork heights `a_i` and angles `phi_i` for `i = -i_max..-1, 1..i_max`
 * (`2 * i_max` values each).
 *
 * # Safety
 * `a` and `phi` must be null or hold `cap` elements; `len` writable.
 */
enum TqsStatus tqs_deviation_origins(double d,
                                     double v0,
                                     double tau,
                                     uint32_t i_max,
                                     double *a,
                                     double *phi,
                                     size_t cap,
                                     size_t *len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TQS_H */
