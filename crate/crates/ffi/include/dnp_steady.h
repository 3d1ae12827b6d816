#ifndef DNP_STEADY_H
#define DNP_STEADY_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes. Zero is success.
 */
typedef enum DnpStatus {
  DNP_STATUS_OK = 0,
  DNP_STATUS_NULL_POINTER = 1,
  DNP_STATUS_INVALID_UTF8 = 2,
  DNP_STATUS_CONFIG = 3,
  DNP_STATUS_CONSTRUCTION = 4,
  DNP_STATUS_DOMAIN = 5,
  DNP_STATUS_SHAPE = 6,
  DNP_STATUS_NUMERIC = 7,
  DNP_STATUS_STRUCTURAL = 8,
  DNP_STATUS_PANIC = 9,
} DnpStatus;

/**
 * An experiment: mesh, flux operator and source built from a configuration.
 */
typedef struct DnpProblem DnpProblem;

/**
 * Residuals of a candidate steady state.
 */
typedef struct DnpResidual {
  /**
   * Largest nodal weak-form residual, normalized by the nodal mass.
   */
  double weak_residual;
  /**
   * `|∫ f(x, U)|`.
   */
  double mean_zero_defect;
  /**
   * `|Ω| · max |f|`.
   */
  double mean_zero_scale;
  /**
   * Distance of the field from the source's band.
   */
  double band_violation;
} DnpResidual;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *dnp_last_error_message(void);

/**
 * Builds a problem from a NUL-terminated TOML configuration.
 *
 * # Safety
 * `config` must be a valid C string and `out` a valid pointer.
 */
enum DnpStatus dnp_problem_from_toml(const char *config, struct DnpProblem **out);

/**
 * Releases a problem. Null is ignored.
 *
 * # Safety
 * `p` must come from `dnp_problem_from_toml` and not be used afterwards.
 */
void dnp_problem_free(struct DnpProblem *p);

/**
 * Number of mesh nodes, the length of every field.
 *
 * # Safety
 * `p` must be a live problem and `out` a valid pointer.
 */
enum DnpStatus dnp_problem_node_count(const struct DnpProblem *p, size_t *out);

/**
 * Node coordinates as `x0, y0, x1, y1, …`; `len` must be twice the node count.
 *
 * # Safety
 * `xy` must point to `len` writable doubles.
 */
enum DnpStatus dnp_problem_nodes(const struct DnpProblem *p, double *xy, size_t len);

/**
 * λ₀ and δ₀ of the problem's source.
 *
 * # Safety
 * `lambda0` and `delta0` must be valid pointers.
 */
enum DnpStatus dnp_problem_constants(const struct DnpProblem *p, double *lambda0, double *delta0);

/**
 * Minimal and maximal steady states by monotone iteration, using the
 * iteration and solver settings of the configuration.
 *
 * # Safety
 * `lower` and `upper` must each point to `len` writable doubles.
 */
enum DnpStatus dnp_extremal_solutions(const struct DnpProblem *p,
                                      double *lower,
                                      double *upper,
                                      size_t len);

/**
 * `out = 𝒦_λ(u)`.
 *
 * # Safety
 * `u` must point to `len` readable and `out` to `len` writable doubles.
 */
enum DnpStatus dnp_apply_k(const struct DnpProblem *p,
                           double lambda,
                           const double *u,
                           double *out,
                           size_t len);

/**
 * One implicit time step of length `tau` from `u`.
 *
 * # Safety
 * `u` must point to `len` readable and `out` to `len` writable doubles.
 */
enum DnpStatus dnp_rothe_step(const struct DnpProblem *p,
                              double tau,
                              const double *u,
                              double *out,
                              size_t len);

/**
 * Residuals of `u` as a steady state.
 *
 * # Safety
 * `u` must point to `len` readable doubles and `out` be a valid pointer.
 */
enum DnpStatus dnp_verify(const struct DnpProblem *p,
                          const double *u,
                          size_t len,
                          struct DnpResidual *out);

/**
 * Runs the configured experiment and returns its JSON report, to be
 * released with `dnp_string_free`. `passed` receives 1 when every check held.
 *
 * # Safety
 * `json` and `passed` must be valid pointers.
 */
enum DnpStatus dnp_run(const struct DnpProblem *p, char **json, int32_t *passed);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not be used afterwards.
 */
void dnp_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DNP_STEADY_H */
