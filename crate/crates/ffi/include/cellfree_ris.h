#ifndef CELLFREE_RIS_H
#define CELLFREE_RIS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CfrStatus {
  CFR_STATUS_OK = 0,
  CFR_STATUS_NULL_POINTER = 1,
  CFR_STATUS_INVALID_ARGUMENT = 2,
  CFR_STATUS_CONFIG = 3,
  CFR_STATUS_SOLVER = 4,
  CFR_STATUS_ZF_INFEASIBLE = 5,
  CFR_STATUS_IO = 6,
  // A Rust panic was caught at the boundary.
  CFR_STATUS_INTERNAL = 7,
  // The experiment ran but at least half of its trials failed.
  CFR_STATUS_MOSTLY_FAILED = 8,
} CfrStatus;

// One channel draw.
typedef struct CfrRealization CfrRealization;

// Output of one optimization run.
typedef struct CfrResult CfrResult;

// Scenario parameters.
typedef struct CfrScenario CfrScenario;

// Message of the last failure on this thread, or NULL. Valid until the next call
// into this library on the same thread.
const char *cfr_last_error(void);

// Library version as a static NUL-terminated string.
const char *cfr_version(void);

// Default scenario: 8 APs, one user, 4 RISs of 12 elements.
//
// # Safety
// `scenario` must be a valid pointer to writable storage.
enum CfrStatus cfr_scenario_default(struct CfrScenario **scenario);

// Scenario from TOML text; missing keys take their defaults.
//
// # Safety
// `toml_text` must be NUL-terminated; `scenario` must be writable.
enum CfrStatus cfr_scenario_from_toml(const char *toml_text, struct CfrScenario **scenario);

// Sets the number of elements per RIS.
//
// # Safety
// `scenario` must be a live handle.
enum CfrStatus cfr_scenario_set_elements(struct CfrScenario *scenario, size_t elements);

// Normalized transmit SNR `P` of the scenario (linear).
//
// # Safety
// `scenario` must be a live handle and `snr` writable.
enum CfrStatus cfr_scenario_snr(const struct CfrScenario *scenario, double *snr);

// # Safety
// `scenario` must be NULL or a handle not yet freed.
void cfr_scenario_free(struct CfrScenario *scenario);

// Draws the channel realization for `seed`.
//
// # Safety
// `scenario` must be a live handle; `realization` must be writable.
enum CfrStatus cfr_realization_generate(const struct CfrScenario *scenario,
                                        uint64_t seed,
                                        struct CfrRealization **realization);

// Dimensions `M` (APs), `K` (users) and `I = L·N` (phases).
//
// # Safety
// `realization` must be a live handle; the out pointers must be writable.
enum CfrStatus cfr_realization_dims(const struct CfrRealization *realization,
                                    size_t *aps,
                                    size_t *users,
                                    size_t *phases);

// Hash of every channel coefficient; equal realizations give equal values.
//
// # Safety
// `realization` must be a live handle and `fingerprint` writable.
enum CfrStatus cfr_realization_fingerprint(const struct CfrRealization *realization,
                                           uint64_t *fingerprint);

// # Safety
// `realization` must be NULL or a handle not yet freed.
void cfr_realization_free(struct CfrRealization *realization);

// Runs one scheme with default solver options.
//
// `algorithm` is one of `alg1`, `alg2[:b]`, `alg5`, `alg6[:b]`,
// `random_phase[:b]`, `no_ris` (bits default to 2). `p` is the linear SNR and
// `seed` drives randomization.
//
// # Safety
// `realization` must be a live handle, `algorithm` NUL-terminated and `result` writable.
enum CfrStatus cfr_optimize(const struct CfrRealization *realization,
                            const char *algorithm,
                            double p,
                            uint64_t seed,
                            struct CfrResult **result);

// Minimum user rate in bit/s/Hz.
//
// # Safety
// `result` must be a live handle and `rate` writable.
enum CfrStatus cfr_result_min_rate(const struct CfrResult *result, double *rate);

// Iterations reported by the algorithm.
//
// # Safety
// `result` must be a live handle and `iterations` writable.
enum CfrStatus cfr_result_iterations(const struct CfrResult *result, size_t *iterations);

// Per-user rates. With `buf` NULL only `len` is written; otherwise `cap` must be at least `len`.
//
// # Safety
// `buf` must be NULL or hold `cap` doubles; `len` must be writable.
enum CfrStatus cfr_result_user_rates(const struct CfrResult *result,
                                     double *buf,
                                     size_t cap,
                                     size_t *len);

// Phase angles in radians (empty for `no_ris`). Buffer protocol as for rates.
//
// # Safety
// `buf` must be NULL or hold `cap` doubles; `len` must be writable.
enum CfrStatus cfr_result_phases(const struct CfrResult *result,
                                 double *buf,
                                 size_t cap,
                                 size_t *len);

// # Safety
// `result` must be NULL or a handle not yet freed.
void cfr_result_free(struct CfrResult *result);

// Linear-interpolation quantile of `len` values, `0 < q < 1`.
//
// # Safety
// `values` must point to `len` doubles and `value` must be writable.
enum CfrStatus cfr_percentile(const double *values, size_t len, double q, double *value);

// Runs an experiment described by TOML text and writes its CSV files to `out_dir`
// (NULL uses the `out` key of the config).
//
// # Safety
// `toml_text` must be NUL-terminated; `out_dir` must be NULL or NUL-terminated.
enum CfrStatus cfr_run_experiment(const char *toml_text, size_t jobs, const char *out_dir);

#endif  /* CELLFREE_RIS_H */
