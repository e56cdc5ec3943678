#ifndef RATBEK_H
#define RATBEK_H

/* Generated by cbindgen from crates/ffi/src. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RatbekStatus {
  RATBEK_STATUS_OK = 0,
  RATBEK_STATUS_NULL_POINTER = 1,
  RATBEK_STATUS_INVALID_ARGUMENT = 2,
  RATBEK_STATUS_BUFFER_TOO_SMALL = 3,
  RATBEK_STATUS_PARSE = 4,
  RATBEK_STATUS_DIMENSION = 5,
  RATBEK_STATUS_VALIDATION = 6,
  RATBEK_STATUS_IO = 7,
  RATBEK_STATUS_POLE = 8,
  RATBEK_STATUS_SINGULAR_R = 9,
  RATBEK_STATUS_SHIFT_SINGULAR = 10,
  RATBEK_STATUS_DEGREE = 11,
  RATBEK_STATUS_NO_CONVERGENCE = 12,
  RATBEK_STATUS_NUMERIC = 13,
  /**
   * The check ran but λ is not an eigenvalue of the perturbed realization.
   */
  RATBEK_STATUS_VERIFICATION_FAILED = 14,
  RATBEK_STATUS_PANIC = 15,
} RatbekStatus;

typedef enum RatbekRegime {
  /**
   * Polynomial coefficients and `C` move.
   */
  RATBEK_REGIME_POLY_AND_C = 0,
  /**
   * Polynomial coefficients and `B` move.
   */
  RATBEK_REGIME_POLY_AND_B = 1,
} RatbekRegime;

/**
 * Opaque perturbation handle.
 */
typedef struct RatbekPerturbation RatbekPerturbation;

/**
 * Opaque realization handle.
 */
typedef struct RatbekRealization RatbekRealization;

typedef struct RatbekComplex {
  double re;
  double im;
} RatbekComplex;

/**
 * Backward errors at one λ. `eta_companion` is NaN when the polynomial
 * degree is 0. When `singular` is set the structured errors are 0.
 */
typedef struct RatbekBackwardError {
  double eta_c;
  double eta_b_variational;
  double eta_b_sigma_min;
  double eta_poly_bound;
  double eta_poly_exact;
  double eta_companion;
  double sigma_min_r;
  bool singular;
} RatbekBackwardError;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread; empty after a success.
 * The pointer stays valid until the next call on this thread.
 */
const char *ratbek_last_error(void);

/**
 * # Safety
 * `s` must be null or a string returned by this library.
 */
void ratbek_string_free(char *s);

/**
 * Parses a realization from JSON text.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum RatbekStatus ratbek_realization_from_json(const char *json,
                                               struct RatbekRealization **out_handle);

/**
 * Loads a realization file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum RatbekStatus ratbek_realization_load(const char *path, struct RatbekRealization **out_handle);

/**
 * # Safety
 * `rep` must be a live handle and `path` a NUL-terminated string.
 */
enum RatbekStatus ratbek_realization_save(const struct RatbekRealization *rep, const char *path);

/**
 * Serializes a realization; free the result with [`ratbek_string_free`].
 *
 * # Safety
 * `rep` must be a live handle and `out` a valid pointer.
 */
enum RatbekStatus ratbek_realization_to_json(const struct RatbekRealization *rep, char **out_json);

/**
 * # Safety
 * `rep` must be null or a handle not yet freed.
 */
void ratbek_realization_free(struct RatbekRealization *rep);

/**
 * # Safety
 * `rep` must be a live handle; each output pointer may be null.
 */
enum RatbekStatus ratbek_realization_dims(const struct RatbekRealization *rep,
                                          size_t *n,
                                          size_t *m,
                                          size_t *r);

/**
 * Writes `R(λ)` row-major into `values`, which must hold `n * n` entries.
 *
 * # Safety
 * `rep` must be a live handle and `values` must point to `len` writable entries.
 */
enum RatbekStatus ratbek_eval(const struct RatbekRealization *rep,
                              struct RatbekComplex lambda,
                              struct RatbekComplex *values,
                              size_t len);

/**
 * # Safety
 * `rep` must be a live handle and `out` a valid pointer.
 */
enum RatbekStatus ratbek_backward_error(const struct RatbekRealization *rep,
                                        struct RatbekComplex lambda,
                                        struct RatbekBackwardError *out_report);

/**
 * Finite eigenvalues via the companion linearization. `count` receives the
 * number found; if it exceeds `capacity` nothing is written to `values` and
 * `RATBEK_STATUS_BUFFER_TOO_SMALL` is returned.
 *
 * # Safety
 * `rep` must be a live handle, `count` valid, and `values` must point to
 * `capacity` writable entries (it may be null when `capacity` is 0).
 */
enum RatbekStatus ratbek_eigenvalues(const struct RatbekRealization *rep,
                                     uint64_t seed,
                                     struct RatbekComplex *values,
                                     size_t capacity,
                                     size_t *count);

/**
 * Builds the minimal perturbation that makes λ an exact eigenvalue.
 *
 * # Safety
 * `rep` must be a live handle and `out` a valid pointer.
 */
enum RatbekStatus ratbek_perturb(const struct RatbekRealization *rep,
                                 struct RatbekComplex lambda,
                                 enum RatbekRegime regime,
                                 struct RatbekPerturbation **out_handle);

/**
 * # Safety
 * `delta` must be a live handle and `norm` a valid pointer.
 */
enum RatbekStatus ratbek_perturbation_norm(const struct RatbekPerturbation *delta, double *norm);

/**
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum RatbekStatus ratbek_perturbation_from_json(const char *json,
                                                struct RatbekPerturbation **out_handle);

/**
 * Serializes a perturbation; free the result with [`ratbek_string_free`].
 *
 * # Safety
 * `delta` must be a live handle and `out` a valid pointer.
 */
enum RatbekStatus ratbek_perturbation_to_json(const struct RatbekPerturbation *delta,
                                              char **out_json);

/**
 * # Safety
 * `delta` must be null or a handle not yet freed.
 */
void ratbek_perturbation_free(struct RatbekPerturbation *delta);

/**
 * Returns a new realization with the perturbation added.
 *
 * # Safety
 * `rep` and `delta` must be live handles and `out` a valid pointer.
 */
enum RatbekStatus ratbek_apply(const struct RatbekRealization *rep,
                               const struct RatbekPerturbation *delta,
                               struct RatbekRealization **out_handle);

/**
 * Checks that λ is an eigenvalue of the perturbed realization. Returns
 * `RATBEK_STATUS_VERIFICATION_FAILED` when it is not; `sigma_min` (may be
 * null) receives `σ_min` of the perturbed `R(λ)` in both cases.
 *
 * # Safety
 * `rep` and `delta` must be live handles.
 */
enum RatbekStatus ratbek_verify(const struct RatbekRealization *rep,
                                const struct RatbekPerturbation *delta,
                                struct RatbekComplex lambda,
                                double *sigma_min);

/**
 * The λ a perturbation was built for.
 *
 * # Safety
 * `delta` must be a live handle and `lambda` a valid pointer.
 */
enum RatbekStatus ratbek_perturbation_target(const struct RatbekPerturbation *delta,
                                             struct RatbekComplex *lambda);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RATBEK_H */
