#ifndef MLCA_TRENDS_H
#define MLCA_TRENDS_H

/* Generated with cbindgen:0.29.4 */

/* Generated by cbindgen from crates/ffi/src. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MlcaStatus {
  MLCA_STATUS_OK = 0,
  MLCA_STATUS_NULL_POINTER = 1,
  MLCA_STATUS_INVALID_UTF8 = 2,
  MLCA_STATUS_INVALID_ARGUMENT = 3,
  MLCA_STATUS_CATALOG = 10,
  MLCA_STATUS_SYSTEMS = 11,
  MLCA_STATUS_ESTIMATION = 12,
  MLCA_STATUS_LCA = 13,
  MLCA_STATUS_STATS = 14,
  MLCA_STATUS_CONFIG = 15,
  MLCA_STATUS_IO = 16,
  MLCA_STATUS_PANIC = 99,
} MlcaStatus;

typedef enum MlcaWeighting {
  MLCA_WEIGHTING_OLS = 0,
  MLCA_WEIGHTING_FEASIBLE_WLS = 1,
} MlcaWeighting;

/**
 * Fitted relation between direct and FLOP-based GPU-hours.
 */
typedef struct MlcaBridge MlcaBridge;

/**
 * Card table with its plausibility ranking.
 */
typedef struct MlcaCatalog MlcaCatalog;

typedef struct MlcaConstants {
  double pue;
  double lifespan_hours;
  double avg_lifetime_utilization;
  double training_usage;
} MlcaConstants;

typedef struct MlcaServerProfile {
  uint32_t gpus_per_server;
  uint32_t cpus_per_server;
  double cpu_tdp_w;
} MlcaServerProfile;

typedef struct MlcaImpact {
  double energy_kwh;
  double gwp_kg;
  double adpe_kgsb;
} MlcaImpact;

typedef struct MlcaBridgeStats {
  double intercept;
  double slope;
  double intercept_se;
  double slope_se;
  double r2;
  double adj_r2;
  double f_statistic;
  double f_p_value;
  size_t n_observations;
  double performance_ratio;
} MlcaBridgeStats;

typedef struct MlcaTrend {
  double slope_per_year;
  double intercept;
  double growth_factor;
  double cagr_percent;
  /**
   * NaN when the series does not grow.
   */
  double doubling_time_years;
  size_t n_used;
  enum MlcaWeighting weighting;
} MlcaTrend;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on the calling thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *mlca_last_error_message(void);

/**
 * Library version as a static nul-terminated string.
 */
const char *mlca_version(void);

/**
 * # Safety
 * `s` must be null or a string returned by this library and not yet freed.
 */
void mlca_string_free(char *s);

/**
 * Writes the bundled default constants.
 *
 * # Safety
 * `out` must be null or valid for writes.
 */
enum MlcaStatus mlca_default_constants(struct MlcaConstants *out);

/**
 * GPU-hours from a training duration and a device count.
 *
 * # Safety
 * `out` must be null or valid for writes.
 */
enum MlcaStatus mlca_gpu_hours_direct(double duration_hours, uint32_t quantity, double *out);

/**
 * GPU-hours from a training FLOP count and a card's peak training
 * throughput in FLOP/s.
 *
 * # Safety
 * `out` must be null or valid for writes.
 */
enum MlcaStatus mlca_gpu_hours_from_flop(double flop, double peak_flops, double *out);

/**
 * Training energy in kWh.
 *
 * # Safety
 * `server` and `constants` must point to valid values; `out` must be null
 * or valid for writes.
 */
enum MlcaStatus mlca_training_energy(double gpu_hours,
                                     double tdp_w,
                                     const struct MlcaServerProfile *server,
                                     const struct MlcaConstants *constants,
                                     double *out);

/**
 * Share of the production impact of `quantity` devices used during
 * `training_hours`.
 *
 * # Safety
 * `card_impact` and `constants` must point to valid values; `out` must be
 * null or valid for writes.
 */
enum MlcaStatus mlca_amortized_embodied(const struct MlcaImpact *card_impact,
                                        uint32_t quantity,
                                        double training_hours,
                                        const struct MlcaConstants *constants,
                                        struct MlcaImpact *out);

/**
 * Usage impact of `energy_kwh` on a grid with the given intensities.
 *
 * # Safety
 * `out` must be null or valid for writes.
 */
enum MlcaStatus mlca_usage_impact(double energy_kwh,
                                  double carbon_intensity_g_per_kwh,
                                  double adpe_kgsb_per_kwh,
                                  struct MlcaImpact *out);

/**
 * Carbon intensity after a yearly relative reduction applied from the
 * base year to `release_year`.
 *
 * # Safety
 * `out` must be null or valid for writes.
 */
enum MlcaStatus mlca_apply_ci_scenario(double carbon_intensity_g_per_kwh,
                                       double ratio,
                                       int32_t release_year,
                                       double *out);

/**
 * Fits `ln(direct) = a + b ln(flop_based)` over `n` pairs.
 *
 * # Safety
 * `direct_hours` and `flop_hours` must point to `n` readable values;
 * `out` must be null or valid for writes. The handle written to `out` is
 * released with [`mlca_bridge_free`].
 */
enum MlcaStatus mlca_bridge_fit(const double *direct_hours,
                                const double *flop_hours,
                                size_t n,
                                struct MlcaBridge **out);

/**
 * # Safety
 * `bridge` must be a live handle; `out` must be null or valid for writes.
 */
enum MlcaStatus mlca_bridge_stats(const struct MlcaBridge *bridge, struct MlcaBridgeStats *out);

/**
 * Bridged GPU-hours for a FLOP-based estimate.
 *
 * # Safety
 * `bridge` must be a live handle; `out` must be null or valid for writes.
 */
enum MlcaStatus mlca_bridge_apply(const struct MlcaBridge *bridge, double flop_hours, double *out);

/**
 * # Safety
 * `bridge` must be null or a handle from [`mlca_bridge_fit`] not yet freed.
 */
void mlca_bridge_free(struct MlcaBridge *bridge);

/**
 * Opens a card table, or the bundled catalog when `path` is null.
 *
 * # Safety
 * `path` must be null or a nul-terminated string; `out` must be null or
 * valid for writes. The handle is released with [`mlca_catalog_free`].
 */
enum MlcaStatus mlca_catalog_open(const char *path, struct MlcaCatalog **out);

/**
 * # Safety
 * `catalog` must be a live handle; `out` must be null or valid for writes.
 */
enum MlcaStatus mlca_catalog_len(const struct MlcaCatalog *catalog, size_t *out);

/**
 * FLOP-based GPU-hours on the reference card resolved for `hardware_name`.
 *
 * # Safety
 * `catalog` must be a live handle; `hardware_name` a nul-terminated
 * string; `out` null or valid for writes.
 */
enum MlcaStatus mlca_catalog_gpu_hours_from_flop(const struct MlcaCatalog *catalog,
                                                 const char *hardware_name,
                                                 double flop,
                                                 double *out);

/**
 * Production impact of one reference card resolved for `hardware_name`,
 * with the bundled impact factors.
 *
 * # Safety
 * `catalog` must be a live handle; `hardware_name` a nul-terminated
 * string; `out` null or valid for writes.
 */
enum MlcaStatus mlca_catalog_production_impact(const struct MlcaCatalog *catalog,
                                               const char *hardware_name,
                                               struct MlcaImpact *out);

/**
 * # Safety
 * `catalog` must be null or a handle from [`mlca_catalog_open`] not yet
 * freed.
 */
void mlca_catalog_free(struct MlcaCatalog *catalog);

/**
 * Exponential trend of a dated series. Dates are days since 1970-01-01;
 * `weighting` takes an `MlcaWeighting` value.
 *
 * # Safety
 * `days` and `values` must point to `n` readable values; `out` must be null
 * or valid for writes.
 */
enum MlcaStatus mlca_exp_trend(const int32_t *days,
                               const double *values,
                               size_t n,
                               uint32_t weighting,
                               struct MlcaTrend *out);

/**
 * Runs the full pipeline from a JSON run config and writes the run summary
 * as a JSON string to `summary_json`, to be released with
 * [`mlca_string_free`]. `summary_json` may be null when the summary is not
 * wanted.
 *
 * # Safety
 * `config_path` must be a nul-terminated string; `summary_json` must be
 * null or valid for writes.
 */
enum MlcaStatus mlca_run_report(const char *config_path, char **summary_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MLCA_TRENDS_H */
