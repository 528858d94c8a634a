#ifndef LFF_H
#define LFF_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Filter shape selector: 0 triangle, 1 bell.
 */
#define LFF_SHAPE_TRIANGLE 0

#define LFF_SHAPE_BELL 1

/**
 * Result code of every fallible call.
 */
typedef enum LffStatus {
  LFF_STATUS_OK = 0,
  LFF_STATUS_NULL_POINTER = 1,
  /**
   * Malformed or unsupported input data.
   */
  LFF_STATUS_FORMAT = 2,
  LFF_STATUS_EMPTY_INPUT = 3,
  /**
   * Argument outside its mathematical domain (e.g. beta below the floor).
   */
  LFF_STATUS_DOMAIN = 4,
  LFF_STATUS_TOO_SHORT = 5,
  /**
   * Array length does not match the expected shape.
   */
  LFF_STATUS_SHAPE = 6,
  LFF_STATUS_CONFIG = 7,
  /**
   * Internal invariant violation or caught panic.
   */
  LFF_STATUS_INTERNAL = 8,
} LffStatus;

/**
 * Filter centers and bandwidths of one filterbank.
 */
typedef struct LffFilterBank LffFilterBank;

/**
 * A `frames x bins` STFT spectrum.
 */
typedef struct LffSpectrum LffSpectrum;

/**
 * STFT settings. `window_kind`: 0 Hann, 1 Hamming, 2 rectangular.
 * `spectrum_kind`: 0 magnitude, 1 power.
 */
typedef struct LffStftConfig {
  uint32_t window_len;
  uint32_t hop;
  uint32_t n_fft;
  uint32_t window_kind;
  uint32_t spectrum_kind;
} LffStftConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null if none failed yet.
 * The pointer stays valid until the next failing call on the same thread.
 */
const char *lff_last_error_message(void);

/**
 * Default analysis: 400-sample Hann window, hop 160, 1024-point FFT, power spectrum.
 */
struct LffStftConfig lff_stft_config_default(void);

/**
 * Mel-initialized filterbank of `n_filters` filters over `n_bins` bins.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle pointer.
 */
enum LffStatus lff_filterbank_mel(size_t n_filters,
                                  size_t n_bins,
                                  uint32_t sample_rate,
                                  uint32_t shape,
                                  struct LffFilterBank **out);

/**
 * Filterbank from explicit centers and bandwidths (both in bins, `n_filters` each).
 *
 * # Safety
 * `alphas` and `betas` must point to `n_filters` readable doubles; `out` must be writable.
 */
enum LffStatus lff_filterbank_new(uint32_t shape,
                                  size_t n_bins,
                                  const double *alphas,
                                  const double *betas,
                                  size_t n_filters,
                                  struct LffFilterBank **out);

/**
 * # Safety
 * `fb` must be null or a handle from this library that has not been freed.
 */
void lff_filterbank_free(struct LffFilterBank *fb);

/**
 * Number of filters, or 0 for a null handle.
 *
 * # Safety
 * `fb` must be null or a live handle.
 */
size_t lff_filterbank_n_filters(const struct LffFilterBank *fb);

/**
 * Copies centers and bandwidths into caller arrays of length `n_filters`.
 *
 * # Safety
 * `fb` must be a live handle; `alphas`/`betas` must point to `n_filters` writable doubles.
 */
enum LffStatus lff_filterbank_get(const struct LffFilterBank *fb,
                                  double *alphas,
                                  double *betas,
                                  size_t n_filters);

/**
 * Replaces centers and bandwidths, then clamps them into their valid range.
 *
 * # Safety
 * `fb` must be a live handle; `alphas`/`betas` must point to `n_filters` readable doubles.
 */
enum LffStatus lff_filterbank_set_projected(struct LffFilterBank *fb,
                                            const double *alphas,
                                            const double *betas,
                                            size_t n_filters);

/**
 * STFT of `n_samples` mono samples in `[-1, 1]`.
 *
 * # Safety
 * `samples` must point to `n_samples` readable doubles; `config` and `out` must be valid.
 */
enum LffStatus lff_spectrum_compute(const double *samples,
                                    size_t n_samples,
                                    uint32_t sample_rate,
                                    const struct LffStftConfig *config,
                                    struct LffSpectrum **out);

/**
 * Wraps caller-provided `n_frames x n_bins` non-negative values as a spectrum.
 *
 * # Safety
 * `values` must point to `n_frames * n_bins` readable doubles; `config` and `out` must be valid.
 */
enum LffStatus lff_spectrum_from_values(const double *values,
                                        size_t n_frames,
                                        size_t n_bins,
                                        const struct LffStftConfig *config,
                                        struct LffSpectrum **out);

/**
 * # Safety
 * `spec` must be null or a live handle.
 */
void lff_spectrum_free(struct LffSpectrum *spec);

/**
 * # Safety
 * `spec` must be a live handle; `n_frames` and `n_bins` must be writable.
 */
enum LffStatus lff_spectrum_shape(const struct LffSpectrum *spec, size_t *n_frames, size_t *n_bins);

/**
 * Copies the row-major spectrum into `values` (length `n_frames * n_bins`).
 *
 * # Safety
 * `spec` must be a live handle; `values` must point to `len` writable doubles.
 */
enum LffStatus lff_spectrum_values(const struct LffSpectrum *spec, double *values, size_t len);

/**
 * Log filterbank features `10 log10(S W + epsilon)`, written row-major into
 * `features` (length `n_frames * n_filters`).
 *
 * # Safety
 * Handles must be live; `features` must point to `len` writable doubles.
 */
enum LffStatus lff_forward(const struct LffFilterBank *fb,
                           const struct LffSpectrum *spec,
                           double epsilon,
                           double *features,
                           size_t len);

/**
 * Gradients of `sum(upstream * features)` with respect to each center and bandwidth.
 *
 * # Safety
 * Handles must be live; `upstream` must hold `upstream_len` doubles and the gradient
 * arrays `n_filters` writable doubles each.
 */
enum LffStatus lff_backward(const struct LffFilterBank *fb,
                            const struct LffSpectrum *spec,
                            const double *upstream,
                            size_t upstream_len,
                            double epsilon,
                            double *d_alpha,
                            double *d_beta,
                            size_t n_filters);

/**
 * Equal error rate of `n` scores; `is_target[i]` is nonzero for target trials.
 *
 * # Safety
 * `scores` and `is_target` must point to `n` readable elements; `eer` and `threshold` must be writable.
 */
enum LffStatus lff_compute_eer(const double *scores,
                               const uint8_t *is_target,
                               size_t n,
                               double *eer,
                               double *threshold);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LFF_H */
