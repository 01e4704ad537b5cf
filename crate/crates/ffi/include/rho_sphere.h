#ifndef RHO_SPHERE_H
#define RHO_SPHERE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RhoStatus {
  RHO_STATUS_OK = 0,
  RHO_STATUS_NULL_POINTER = 1,
  RHO_STATUS_INVALID_ARGUMENT = 2,
  RHO_STATUS_INVALID_CONFIG = 3,
  RHO_STATUS_STEP_FAILURE = 4,
  RHO_STATUS_BUFFER_TOO_SMALL = 5,
  RHO_STATUS_PANIC = 6,
} RhoStatus;

/**
 * Opaque solver handle.
 */
typedef struct RhoSolver RhoSolver;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Creates a solver from configuration text in the CLI's `key = value`
 * format. Only the initial data, grid and integrator keys are used.
 *
 * # Safety
 * `config` must be a NUL-terminated string and `out` a valid pointer.
 */
enum RhoStatus rho_solver_new_from_config(const char *config, struct RhoSolver **out);

/**
 * Creates a solver for `u0 = amplitude sin(2 pi wavenumber x)` on `n`
 * nodes. A non-positive `dt` selects the default step.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum RhoStatus rho_solver_new_sine(size_t n,
                                   double amplitude,
                                   uint32_t wavenumber,
                                   double dt,
                                   struct RhoSolver **out);

/**
 * # Safety
 * `solver` must come from a constructor and not be used afterwards.
 * Null is accepted and ignored.
 */
void rho_solver_free(struct RhoSolver *solver);

/**
 * Advances `steps` RK4 steps. On failure the handle keeps the last good
 * state.
 *
 * # Safety
 * `solver` must be a live handle.
 */
enum RhoStatus rho_solver_step(struct RhoSolver *solver, size_t steps);

/**
 * # Safety
 * `solver` must be a live handle or null (which yields 0).
 */
size_t rho_solver_n(const struct RhoSolver *solver);

/**
 * # Safety
 * `solver` must be a live handle or null (which yields NaN).
 */
double rho_solver_time(const struct RhoSolver *solver);

/**
 * # Safety
 * `solver` must be a live handle or null (which yields NaN).
 */
double rho_solver_dt(const struct RhoSolver *solver);

/**
 * # Safety
 * `solver` must be a live handle or null (which yields NaN).
 */
double rho_solver_mu(const struct RhoSolver *solver);

/**
 * `quad(rho^2 G^2 + 4 rho_t^2)` of the current state.
 *
 * # Safety
 * `solver` and `out` must be valid pointers.
 */
enum RhoStatus rho_solver_energy(const struct RhoSolver *solver, double *out);

/**
 * Copies `rho` into `buf`, which must hold `rho_solver_n` values.
 *
 * # Safety
 * `buf` must point to `len` writable doubles.
 */
enum RhoStatus rho_solver_copy_rho(const struct RhoSolver *solver, double *buf, size_t len);

/**
 * Copies `rho_t` into `buf`, which must hold `rho_solver_n` values.
 *
 * # Safety
 * `buf` must point to `len` writable doubles.
 */
enum RhoStatus rho_solver_copy_rho_t(const struct RhoSolver *solver, double *buf, size_t len);

/**
 * Eulerian `u` and `u_x` on `m` equispaced nodes (`m` a power of two,
 * at least 16). `u_x` is clamped to `+-1/flat_eps` where the flow map is
 * flat.
 *
 * # Safety
 * `u` and `ux` must each point to `m` writable doubles.
 */
enum RhoStatus rho_solver_eulerian(const struct RhoSolver *solver,
                                   size_t m,
                                   double flat_eps,
                                   double *u,
                                   double *ux);

/**
 * Copies the calling thread's last error message into `buf` (truncated,
 * always NUL-terminated when `cap > 0`) and returns its full length.
 *
 * # Safety
 * `buf` must point to `cap` writable bytes, or be null with `cap = 0`.
 */
size_t rho_last_error(char *buf, size_t cap);

/**
 * Static version string.
 */
const char *rho_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RHO_SPHERE_H */
