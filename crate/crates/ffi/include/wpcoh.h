#ifndef WPCOH_H
#define WPCOH_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum WpcohStatus {
  WPCOH_STATUS_OK = 0,
  WPCOH_STATUS_NULL_POINTER = 1,
  WPCOH_STATUS_INVALID_ARGUMENT = 2,
  WPCOH_STATUS_IO = 3,
  WPCOH_STATUS_NUMERICAL = 4,
  WPCOH_STATUS_PANIC = 5,
} WpcohStatus;

typedef enum WpcohAxis {
  WPCOH_AXIS_DELAY = 0,
  WPCOH_AXIS_PHASE = 1,
} WpcohAxis;

/**
 * Run configuration.
 */
typedef struct WpcohConfig WpcohConfig;

/**
 * Covariance map `cov[point][bin]` with jackknife errors.
 */
typedef struct WpcohCovarianceMap WpcohCovarianceMap;

/**
 * Spline potential curve (bohr, eV).
 */
typedef struct WpcohPotential WpcohPotential;

/**
 * Two-surface propagation result.
 */
typedef struct WpcohTrajectory WpcohTrajectory;

typedef struct WpcohHockey {
  double r_squared;
  double departure;
  double slope;
  double intercept;
  bool passes;
} WpcohHockey;

/**
 * Cosine fit `y = c0 + c1 cos(k φ - phase)` of one KER bin.
 */
typedef struct WpcohPhaseFit {
  double c0;
  double c1;
  double phase;
  double residual_rms;
  double sigma_c0;
  double sigma_c1;
  double sigma_phase;
  bool significant;
} WpcohPhaseFit;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. Valid until
 * the next call into the library on the same thread.
 */
const char *wpcoh_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *wpcoh_version(void);

/**
 * # Safety
 * `out` must be a valid pointer to write a handle to.
 */
enum WpcohStatus wpcoh_config_default(struct WpcohConfig **out_config);

/**
 * Parse and validate a TOML configuration.
 *
 * # Safety
 * `toml` must be a NUL-terminated string; `out_config` must be writable.
 */
enum WpcohStatus wpcoh_config_from_toml(const char *toml, struct WpcohConfig **out_config);

/**
 * # Safety
 * `config` must be a handle from this library.
 */
enum WpcohStatus wpcoh_config_set_seed(struct WpcohConfig *config, uint64_t seed);

/**
 * # Safety
 * `config` must be null or a handle from this library, freed once.
 */
void wpcoh_config_free(struct WpcohConfig *config);

/**
 * Natural cubic spline through `n` control points (bohr, eV).
 *
 * # Safety
 * `r_bohr` and `v_ev` must hold `n` values each.
 */
enum WpcohStatus wpcoh_potential_new(const double *r_bohr,
                                     const double *v_ev,
                                     size_t n,
                                     struct WpcohPotential **out_potential);

/**
 * Evaluate the curve at `n` radii; values in eV.
 *
 * # Safety
 * `r_bohr` and `out_v_ev` must hold `n` values each.
 */
enum WpcohStatus wpcoh_potential_eval(const struct WpcohPotential *potential,
                                      const double *r_bohr,
                                      size_t n,
                                      double *out_v_ev);

/**
 * # Safety
 * `potential` must be null or a handle from this library, freed once.
 */
void wpcoh_potential_free(struct WpcohPotential *potential);

/**
 * Propagate the two-state packet described by `config`.
 *
 * # Safety
 * `config` must be a handle; `out_trajectory` must be writable.
 */
enum WpcohStatus wpcoh_simulate(const struct WpcohConfig *config,
                                struct WpcohTrajectory **out_trajectory);

/**
 * Number of snapshots and grid points.
 *
 * # Safety
 * `trajectory` must be a handle; the out-pointers must be writable.
 */
enum WpcohStatus wpcoh_trajectory_shape(const struct WpcohTrajectory *trajectory,
                                        size_t *out_snapshots,
                                        size_t *out_points);

/**
 * Snapshot times (fs); `out_times_fs` must hold one value per snapshot.
 *
 * # Safety
 * `out_times_fs` must hold `capacity` values.
 */
enum WpcohStatus wpcoh_trajectory_times(const struct WpcohTrajectory *trajectory,
                                        double *out_times_fs,
                                        size_t capacity);

/**
 * R-resolved phase difference at snapshot time `t_fs`, restricted to
 * points where both densities exceed `density_floor` times their maxima.
 * Writes up to `capacity` points and the actual count to `out_len`; if
 * `capacity` is too small nothing is copied, `out_len` holds the required
 * size and the status is `InvalidArgument`.
 *
 * # Safety
 * `out_r_bohr` and `out_phase` must hold `capacity` values.
 */
enum WpcohStatus wpcoh_trajectory_phase_difference(const struct WpcohTrajectory *trajectory,
                                                   double t_fs,
                                                   double density_floor,
                                                   double *out_r_bohr,
                                                   double *out_phase,
                                                   size_t capacity,
                                                   size_t *out_len);

/**
 * Hockey-stick metrics of the phase difference at `t_fs`, using the
 * density floor and thresholds of `config`. `out_found` is false when the
 * phase difference is too short to fit.
 *
 * # Safety
 * All pointers must be valid.
 */
enum WpcohStatus wpcoh_trajectory_hockey(const struct WpcohTrajectory *trajectory,
                                         const struct WpcohConfig *config,
                                         double t_fs,
                                         struct WpcohHockey *out_metrics,
                                         bool *out_found);

/**
 * # Safety
 * `trajectory` must be null or a handle from this library, freed once.
 */
void wpcoh_trajectory_free(struct WpcohTrajectory *trajectory);

/**
 * Complex shaper mask `M(ν)` for frequencies in PHz and `τ` in fs.
 *
 * # Safety
 * `out_re` and `out_im` must be writable.
 */
enum WpcohStatus wpcoh_shaper_mask(double nu_phz,
                                   double a_tot,
                                   double a_r,
                                   double tau_fs,
                                   double phi_l,
                                   double nu_l_phz,
                                   double *out_re,
                                   double *out_im);

/**
 * Controllable phase `φ_L - 2π ν_L τ`, wrapped to `(-π, π]`.
 *
 * # Safety
 * `out_phi` must be writable.
 */
enum WpcohStatus wpcoh_controllable_phase(double phi_l,
                                          double nu_l_phz,
                                          double tau_fs,
                                          double *out_phi);

/**
 * Least-squares fit of `y = c0 + c1 cos(k φ - ΔΦ)` over `n` samples.
 * `sigma` may be null for unweighted data.
 *
 * # Safety
 * `phases`, `y` and (when non-null) `sigma` must hold `n` values.
 */
enum WpcohStatus wpcoh_fit_cosine(const double *phases,
                                  const double *y,
                                  const double *sigma,
                                  size_t n,
                                  double k,
                                  struct WpcohPhaseFit *out_fit);

/**
 * Per-bin single-harmonic fits of a phase scan. `y` is row-major
 * `[bins][n_phases]`; `out_fits` receives `bins` results.
 *
 * # Safety
 * `phases` must hold `n_phases` values, `y` `bins * n_phases` values and
 * `out_fits` `bins` entries.
 */
enum WpcohStatus wpcoh_fit_phase_scan(const double *phases,
                                      size_t n_phases,
                                      const double *y,
                                      size_t bins,
                                      double significance,
                                      double min_relative_amplitude,
                                      struct WpcohPhaseFit *out_fits);

/**
 * Stream an event file into a covariance map using the species, bins and
 * gate of `config`.
 *
 * # Safety
 * `path` must be a NUL-terminated string; other pointers must be valid.
 */
enum WpcohStatus wpcoh_covariance_from_events(const struct WpcohConfig *config,
                                              const char *path,
                                              enum WpcohAxis axis,
                                              struct WpcohCovarianceMap **out_map);

/**
 * # Safety
 * All pointers must be valid.
 */
enum WpcohStatus wpcoh_covariance_shape(const struct WpcohCovarianceMap *map,
                                        size_t *out_points,
                                        size_t *out_bins);

/**
 * Copy the map out. `scan_values` takes `points` values, `ker_edges_ev`
 * `bins + 1`, and `cov` / `sigma` are row-major `[points][bins]`. Any of
 * the output pointers may be null to skip it.
 *
 * # Safety
 * Non-null outputs must have the sizes reported by
 * [`wpcoh_covariance_shape`].
 */
enum WpcohStatus wpcoh_covariance_copy(const struct WpcohCovarianceMap *map,
                                       double *scan_values,
                                       double *ker_edges_ev,
                                       double *cov,
                                       double *sigma);

/**
 * # Safety
 * `map` must be null or a handle from this library, freed once.
 */
void wpcoh_covariance_free(struct WpcohCovarianceMap *map);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WPCOH_H */
