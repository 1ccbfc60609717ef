#ifndef SRBP_H
#define SRBP_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define SRBP_OK 0

#define SRBP_ERR_NULL -1

#define SRBP_ERR_INVALID -2

#define SRBP_ERR_NUMERICAL -3

#define SRBP_ERR_INTEGRITY -4

#define SRBP_ERR_IO -5

#define SRBP_ERR_PANIC -6

#define SRBP_RHO2_LITERAL 0

#define SRBP_RHO2_DERIVATION 1

// Opaque stationary field sampler.
typedef struct SrbpSampler SrbpSampler;

// Opaque single-trajectory simulation.
typedef struct SrbpSimulation SrbpSimulation;

// Gaussian potential and periodic grid shared by the constructors.
typedef struct SrbpModel {
  uint32_t dim;
  // Grid points per axis.
  uint32_t n;
  // Grid spacing.
  double h;
  double amplitude;
  double width;
} SrbpModel;

// Parameters of one trajectory.
typedef struct SrbpRunConfig {
  struct SrbpModel model;
  double dt;
  uint64_t seed;
  // Trajectory index within the ensemble; selects the random streams.
  uint64_t index;
  // Nonzero for a stationary initial field, zero for an empty one.
  int32_t stationary;
} SrbpRunConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message describing the most recent failure on this thread.
//
// The pointer stays valid until the next failing call on the same thread.
// Returns an empty string when nothing has failed yet.
const char *srbp_last_error(void);

// # Safety
// Pointer arguments must be null or valid for the stated lengths; handles must come from the matching `*_new`.
int32_t srbp_sampler_new(const struct SrbpModel *model,
                         struct SrbpSampler **out);

// Number of grid values written by `srbp_sampler_sample`; 0 for a null handle.
//
// # Safety
// Pointer arguments must be null or valid for the stated lengths; handles must come from the matching `*_new`.
size_t srbp_sampler_len(const struct SrbpSampler *sampler);

// Draws one field for `seed` into `out` (row-major, last axis fastest).
//
// # Safety
// Pointer arguments must be null or valid for the stated lengths; handles must come from the matching `*_new`.
int32_t srbp_sampler_sample(const struct SrbpSampler *sampler,
                            uint64_t seed,
                            double *out,
                            size_t len);

// # Safety
// Pointer arguments must be null or valid for the stated lengths; handles must come from the matching `*_new`.
void srbp_sampler_free(struct SrbpSampler *sampler);

// # Safety
// Pointer arguments must be null or valid for the stated lengths; handles must come from the matching `*_new`.
int32_t srbp_simulation_new(const struct SrbpRunConfig *config,
                            struct SrbpSimulation **out);

// Advances the trajectory by `steps` Euler-Maruyama steps.
//
// # Safety
// Pointer arguments must be null or valid for the stated lengths; handles must come from the matching `*_new`.
int32_t srbp_simulation_step(struct SrbpSimulation *sim,
                             uint64_t steps);

// # Safety
// Pointer arguments must be null or valid for the stated lengths; handles must come from the matching `*_new`.
int32_t srbp_simulation_time(const struct SrbpSimulation *sim,
                             double *out);

// Writes the unwrapped position, the Brownian part and the compensator,
// `dim` values each. Any of the three pointers may be null to skip it.
//
// # Safety
// Pointer arguments must be null or valid for the stated lengths; handles must come from the matching `*_new`.
int32_t srbp_simulation_state(const struct SrbpSimulation *sim,
                              double *position,
                              double *brownian,
                              double *compensator,
                              size_t len);

// # Safety
// Pointer arguments must be null or valid for the stated lengths; handles must come from the matching `*_new`.
void srbp_simulation_free(struct SrbpSimulation *sim);

// ρ² of the Gaussian potential by adaptive quadrature.
//
// # Safety
// Pointer arguments must be null or valid for the stated lengths; handles must come from the matching `*_new`.
int32_t srbp_rho2(uint32_t dim,
                  double amplitude,
                  double width,
                  int32_t convention,
                  double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SRBP_H */
