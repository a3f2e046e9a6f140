#ifndef DOMINO_H
#define DOMINO_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum DominoStatus {
  DOMINO_STATUS_OK = 0,
  DOMINO_STATUS_NULL_POINTER = 1,
  DOMINO_STATUS_INVALID_ARGUMENT = 2,
  DOMINO_STATUS_INVALID_LAYOUT = 3,
  DOMINO_STATUS_ILL_CONDITIONED = 4,
  DOMINO_STATUS_LENGTH_MISMATCH = 5,
  DOMINO_STATUS_EMPTY_SIGNAL = 6,
  DOMINO_STATUS_DOMINANT_TAP_TOO_WEAK = 7,
  DOMINO_STATUS_TOO_SHORT = 8,
  // The rate output still holds the best in-band guess.
  DOMINO_STATUS_NO_PEAK = 9,
  DOMINO_STATUS_FORMAT = 10,
  DOMINO_STATUS_IO = 11,
  DOMINO_STATUS_PANIC = 12,
} DominoStatus;

// Dominant-path compensator bound to one layout and tap window.
typedef struct DominoCompensator DominoCompensator;

// Subcarrier layout handle.
typedef struct DominoLayout DominoLayout;

// Trace file loaded in memory.
typedef struct DominoTrace DominoTrace;

typedef struct DominoComplex {
  double re;
  double im;
} DominoComplex;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or NULL. The pointer is
// valid until the next failing call on the same thread.
const char *domino_last_error(void);

// The 256-bin, 234-subcarrier, 625 kHz layout.
struct DominoLayout *domino_layout_desk(void);

// Layout from explicit active bin indices (FFT order, sorted, unique).
//
// # Safety
// `active` must point to `n_active` readable values and `out` must be
// writable.
enum DominoStatus domino_layout_new(size_t n_fft,
                                    const size_t *active,
                                    size_t n_active,
                                    double delta_f_hz,
                                    struct DominoLayout **out);

// # Safety
// `layout` must be NULL or a live handle.
size_t domino_layout_n_active(const struct DominoLayout *layout);

// # Safety
// `layout` must be NULL or a handle not yet freed.
void domino_layout_free(struct DominoLayout *layout);

// Compensator over taps `[-taps_before, taps_after]`. `use_idft` selects the
// IDFT estimator instead of least squares; `ridge < 0` picks the ridge
// automatically.
//
// # Safety
// `layout` must be a live handle and `out` writable.
enum DominoStatus domino_compensator_new(const struct DominoLayout *layout,
                                         size_t taps_before,
                                         size_t taps_after,
                                         bool use_idft,
                                         double ridge,
                                         struct DominoCompensator **out);

// Number of taps written by the estimate and compensate calls.
//
// # Safety
// `comp` must be NULL or a live handle.
size_t domino_compensator_n_taps(const struct DominoCompensator *comp);

// Signed delay (in taps) of each output position.
//
// # Safety
// `comp` must be a live handle and `out_delays` hold `n_taps` values.
enum DominoStatus domino_compensator_tap_delays(const struct DominoCompensator *comp,
                                                int64_t *out_delays,
                                                size_t n_taps);

// Raw CIR estimate of one frame, without alignment or normalization.
//
// # Safety
// `csi` must hold `n_csi` values and `out_taps` room for `n_taps`.
enum DominoStatus domino_estimate_cir(const struct DominoCompensator *comp,
                                      const struct DominoComplex *csi,
                                      size_t n_csi,
                                      struct DominoComplex *out_taps,
                                      size_t n_taps);

// Aligns one frame on its dominant path and writes the normalized CIR (tap 0
// equals exactly 1). `out_epsilon` may be NULL; otherwise it receives the
// delay correction in taps.
//
// # Safety
// `csi` must hold `n_csi` values and `out_taps` room for `n_taps`.
enum DominoStatus domino_compensate(const struct DominoCompensator *comp,
                                    const struct DominoComplex *csi,
                                    size_t n_csi,
                                    struct DominoComplex *out_taps,
                                    size_t n_taps,
                                    double *out_epsilon);

// # Safety
// `comp` must be NULL or a handle not yet freed.
void domino_compensator_free(struct DominoCompensator *comp);

// Breathing rate of a real series sampled at `fs_hz`, searched in
// `[lo_hz, hi_hz]`. On [`DominoStatus::NoPeak`] `out_bpm` still receives the
// best guess and `out_confidence` the peak ratio. `out_confidence` may be
// NULL.
//
// # Safety
// `signal` must hold `len` values; `out_bpm` must be writable.
enum DominoStatus domino_estimate_rate(const double *signal,
                                       size_t len,
                                       double fs_hz,
                                       double lo_hz,
                                       double hi_hz,
                                       double *out_bpm,
                                       double *out_confidence);

// # Safety
// `path` must be a NUL-terminated UTF-8 string and `out` writable.
enum DominoStatus domino_trace_open(const char *path, struct DominoTrace **out);

// # Safety
// `trace` must be NULL or a live handle.
size_t domino_trace_n_antennas(const struct DominoTrace *trace);

// # Safety
// `trace` must be NULL or a live handle.
size_t domino_trace_n_frames(const struct DominoTrace *trace);

// New handle for the trace's layout; free it with [`domino_layout_free`].
//
// # Safety
// `trace` must be NULL or a live handle.
struct DominoLayout *domino_trace_layout(const struct DominoTrace *trace);

// Copies one frame. `out_timestamp` may be NULL.
//
// # Safety
// `trace` must be a live handle and `out_values` hold `n_values` entries.
enum DominoStatus domino_trace_frame(const struct DominoTrace *trace,
                                     size_t antenna,
                                     size_t frame,
                                     struct DominoComplex *out_values,
                                     size_t n_values,
                                     double *out_timestamp);

// # Safety
// `trace` must be NULL or a handle not yet freed.
void domino_trace_free(struct DominoTrace *trace);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DOMINO_H */
