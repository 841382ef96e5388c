#ifndef OTFS_OUTAGE_H
#define OTFS_OUTAGE_H

/* Generated with cbindgen:0.29.4 */

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum {
  OTFS_STATUS_OK = 0,
  OTFS_STATUS_NULL_POINTER = 1,
  OTFS_STATUS_INVALID_ARGUMENT = 2,
  OTFS_STATUS_UNSUPPORTED_STRUCTURE = 3,
  OTFS_STATUS_NOT_POSITIVE_DEFINITE = 4,
  OTFS_STATUS_CONFIG = 5,
  OTFS_STATUS_IO = 6,
  OTFS_STATUS_INTERNAL_ERROR = 7,
} OtfsStatus;

/**
 * Opaque multipath channel realization.
 */
typedef struct OtfsChannel OtfsChannel;

typedef struct {
  double re;
  double im;
} OtfsComplex;

/**
 * One resolvable path.
 */
typedef struct {
  OtfsComplex gain;
  size_t delay_idx;
  int64_t doppler_idx;
} OtfsPath;

/**
 * Frame geometry; the slot duration is fixed to `1 / delta_f`.
 */
typedef struct {
  size_t m;
  size_t n;
  double delta_f;
  uint32_t bits_per_symbol;
} OtfsGrid;

/**
 * Monte-Carlo outage run. `gamma` is the linear SNR.
 */
typedef struct {
  OtfsGrid grid;
  size_t paths;
  size_t l_max;
  size_t k_max;
  double gamma;
  double distortion;
  uint64_t trials;
  uint64_t seed;
} OtfsOutageParams;

typedef struct {
  uint64_t trials;
  uint64_t outages;
  double p_hat;
  double ci_low;
  double ci_high;
  double lower_bound;
} OtfsOutageEstimate;

/**
 * Outcome of the determinant inequality checks on one realization.
 * Booleans are `0`/`1`; log-determinants are base 2.
 */
typedef struct {
  uint8_t prop1_holds;
  uint8_t prop2_holds;
  uint8_t chain_holds;
  double log2_det_full;
  double log2_det_without_b2;
  double log2_det_h_a;
} OtfsPropositionResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the last failure on this thread, or `""`.
 *
 * The pointer stays valid until the next failing call on the same thread.
 */
const char *otfs_last_error_message(void);

/**
 * Draws `paths` Rayleigh paths on distinct cells of
 * `[0, l_max] x [-k_max, k_max]` from the seeded stream `seed`.
 *
 * # Safety
 * `out` must be valid for writes.
 */
OtfsStatus otfs_channel_sample(size_t paths,
                               size_t l_max,
                               size_t k_max,
                               uint64_t seed,
                               OtfsChannel **out);

/**
 * Builds a channel from explicit paths.
 *
 * # Safety
 * `paths` must point to `count` readable elements; `out` must be valid for writes.
 */
OtfsStatus otfs_channel_from_paths(const OtfsPath *paths, size_t count, OtfsChannel **out);

/**
 * Releases a channel. Null is ignored.
 *
 * # Safety
 * `ch` must be null or a handle from an `otfs_channel_*` constructor that
 * has not been freed.
 */
void otfs_channel_free(OtfsChannel *ch);

/**
 * # Safety
 * `ch` must be a live handle; `out` must be valid for writes.
 */
OtfsStatus otfs_channel_path_count(const OtfsChannel *ch, size_t *out);

/**
 * # Safety
 * `ch` must be a live handle; `out` must be valid for writes.
 */
OtfsStatus otfs_channel_get_path(const OtfsChannel *ch, size_t index, OtfsPath *out);

/**
 * Total path energy `Σ|h_i|^2`.
 *
 * # Safety
 * `ch` must be a live handle; `out` must be valid for writes.
 */
OtfsStatus otfs_channel_energy(const OtfsChannel *ch, double *out);

/**
 * Normalized capacity `log2 det(I + γ H^H H) / MN` in bits per symbol.
 *
 * # Safety
 * Pointers must be valid; `ch` must be a live handle.
 */
OtfsStatus otfs_capacity(const OtfsGrid *grid_params,
                         const OtfsChannel *ch,
                         double gamma,
                         double *out);

/**
 * `y = H_DD x + noise`; all three buffers hold `len = M·N` elements.
 *
 * # Safety
 * `x` and `noise` must be readable and `y` writable for `len` elements.
 */
OtfsStatus otfs_apply_channel(const OtfsGrid *grid_params,
                              const OtfsChannel *ch,
                              const OtfsComplex *x,
                              const OtfsComplex *noise,
                              OtfsComplex *y,
                              size_t len);

/**
 * # Safety
 * `out` must be valid for writes.
 */
OtfsStatus otfs_binary_entropy(double p, double *out);

/**
 * # Safety
 * `out` must be valid for writes.
 */
OtfsStatus otfs_inv_binary_entropy(double v, double *out);

/**
 * Rate `R = K (1 - H_b(D))` in bits per symbol.
 *
 * # Safety
 * `out` must be valid for writes.
 */
OtfsStatus otfs_rate_from_distortion(double distortion, uint32_t bits_per_symbol, double *out);

/**
 * `2^R - 1` for the target `(D, K)`.
 *
 * # Safety
 * `out` must be valid for writes.
 */
OtfsStatus otfs_snr_threshold(double distortion, uint32_t bits_per_symbol, double *out);

/**
 * `1 - e^{-x} Σ_{i<P} x^i/i!`.
 *
 * # Safety
 * `out` must be valid for writes.
 */
OtfsStatus otfs_chi_square_tail_sum(uint32_t paths, double x, double *out);

/**
 * Closed-form outage lower bound at linear SNR `gamma`.
 *
 * # Safety
 * `out` must be valid for writes.
 */
OtfsStatus otfs_lower_bound(uint32_t paths,
                            double gamma,
                            double distortion,
                            uint32_t bits_per_symbol,
                            double *out);

/**
 * Monte-Carlo outage estimate; deterministic in `params.seed`.
 *
 * # Safety
 * `params` must be readable and `out` writable.
 */
OtfsStatus otfs_monte_carlo_outage(const OtfsOutageParams *params, OtfsOutageEstimate *out);

/**
 * Runs both determinant inequality checks on one realization.
 *
 * # Safety
 * Pointers must be valid; `ch` must be a live handle.
 */
OtfsStatus otfs_verify_propositions(const OtfsGrid *grid_params,
                                    const OtfsChannel *ch,
                                    double gamma,
                                    OtfsPropositionResult *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OTFS_OUTAGE_H */
