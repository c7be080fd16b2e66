#ifndef SCHELLING_H
#define SCHELLING_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SchellingStatus {
  SCHELLING_STATUS_OK = 0,
  SCHELLING_STATUS_NULL_POINTER = 1,
  SCHELLING_STATUS_INVALID_ARGUMENT = 2,
  SCHELLING_STATUS_TOO_LARGE = 3,
  SCHELLING_STATUS_NO_CONVERGENCE = 4,
  SCHELLING_STATUS_IO = 5,
  SCHELLING_STATUS_INTERNAL = 6,
} SchellingStatus;

/**
 * Values accepted by the `scheduler` arguments, which are passed as plain
 * integers so that out-of-range values can be rejected.
 */
typedef enum SchellingScheduler {
  SCHELLING_SCHEDULER_UNIFORM = 0,
  SCHELLING_SCHEDULER_CONTAGION = 1,
} SchellingScheduler;

/**
 * An enumerated state space with its scheduler and parameters.
 */
typedef struct SchellingAnalysis SchellingAnalysis;

/**
 * A running Monte Carlo chain.
 */
typedef struct SchellingSimulation SchellingSimulation;

/**
 * Message of the last failure on this thread, or NULL. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *schelling_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *schelling_version(void);

/**
 * Creates a chain on the `n`×`n` torus from a random configuration with
 * `red_count` red cells. `self_weight <= 0` selects the contagion default.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum SchellingStatus schelling_simulation_new(size_t n,
                                              size_t red_count,
                                              double r,
                                              double beta,
                                              uint32_t scheduler,
                                              double self_weight,
                                              uint64_t seed,
                                              struct SchellingSimulation **out);

/**
 * Creates a chain from a JSON run config file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` valid for one write.
 */
enum SchellingStatus schelling_simulation_from_config(const char *path,
                                                      struct SchellingSimulation **out);

/**
 * Advances the chain by `steps` transitions.
 *
 * # Safety
 * `sim` must be a live handle from `schelling_simulation_new`.
 */
enum SchellingStatus schelling_simulation_step(struct SchellingSimulation *sim, uint64_t steps);

/**
 * Copies the `n²` cell colors (`+1` red, `-1` blue, row-major) into `buf`.
 *
 * # Safety
 * `sim` must be a live handle and `buf` valid for `len` writes.
 */
enum SchellingStatus schelling_simulation_colors(const struct SchellingSimulation *sim,
                                                 int8_t *buf,
                                                 size_t len);

/**
 * Current potential, steps taken and bichromatic edge count. Any output
 * pointer may be NULL.
 *
 * # Safety
 * `sim` must be a live handle; non-null outputs must be writable.
 */
enum SchellingStatus schelling_simulation_observe(const struct SchellingSimulation *sim,
                                                  double *potential,
                                                  uint64_t *steps,
                                                  size_t *bichromatic_edges);

/**
 * Releases a chain. NULL is ignored.
 *
 * # Safety
 * `sim` must be NULL or a live handle, not used afterwards.
 */
void schelling_simulation_free(struct SchellingSimulation *sim);

/**
 * Enumerates the composite state space for exact analysis. Sides above 3
 * are rejected with `SCHELLING_STATUS_TOO_LARGE`.
 *
 * # Safety
 * `out` must be valid for one write.
 */
enum SchellingStatus schelling_analysis_new(size_t n,
                                            size_t red_count,
                                            double r,
                                            uint32_t scheduler,
                                            double self_weight,
                                            struct SchellingAnalysis **out);

/**
 * Number of composite states.
 *
 * # Safety
 * `a` must be a live handle and `states` writable.
 */
enum SchellingStatus schelling_analysis_states(const struct SchellingAnalysis *a, size_t *states);

/**
 * Stationary mass on maximally segregated configurations at `beta`.
 *
 * # Safety
 * `a` must be a live handle and `mass` writable.
 */
enum SchellingStatus schelling_analysis_mass_on_max_segregated(const struct SchellingAnalysis *a,
                                                               double beta,
                                                               double *mass);

/**
 * Stochastically stable states: their number, the number of distinct
 * configurations among them, the minimum tree resistance, and whether
 * every stable configuration is maximally segregated. Outputs may be NULL.
 *
 * # Safety
 * `a` must be a live handle; non-null outputs must be writable.
 */
enum SchellingStatus schelling_analysis_stable(const struct SchellingAnalysis *a,
                                               size_t *states,
                                               size_t *configurations,
                                               double *min_resistance,
                                               bool *subset_of_max_segregated);

/**
 * Releases an analysis. NULL is ignored.
 *
 * # Safety
 * `a` must be NULL or a live handle, not used afterwards.
 */
void schelling_analysis_free(struct SchellingAnalysis *a);

/**
 * Minimum number of bichromatic edges over configurations with
 * `red_count` red cells, and how many configurations attain it. Sides up
 * to 4 are accepted.
 *
 * # Safety
 * Both outputs must be writable.
 */
enum SchellingStatus schelling_max_segregated(size_t n,
                                              size_t red_count,
                                              size_t *min_bichromatic_edges,
                                              size_t *argmin_count);

#endif  /* SCHELLING_H */
