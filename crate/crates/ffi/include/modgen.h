#ifndef MODGEN_H
#define MODGEN_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ModgenAmbient {
  /**
   * `size` is the cutoff `b` of `[-b, b]`.
   */
  MODGEN_AMBIENT_MINKOWSKI = 0,
  /**
   * `size` is the period `l`.
   */
  MODGEN_AMBIENT_CYLINDER = 1,
} ModgenAmbient;

typedef enum ModgenMatrixKind {
  MODGEN_MATRIX_KIND_S = 0,
  MODGEN_MATRIX_KIND_B = 1,
  MODGEN_MATRIX_KIND_M_MINUS = 2,
  MODGEN_MATRIX_KIND_M_PLUS = 3,
} ModgenMatrixKind;

/**
 * Status codes; the nonzero values other than `NULL_ARGUMENT` and `PANIC`
 * equal the CLI exit codes.
 */
typedef enum ModgenStatus {
  MODGEN_STATUS_OK = 0,
  MODGEN_STATUS_NULL_ARGUMENT = 1,
  MODGEN_STATUS_CONFIG = 2,
  MODGEN_STATUS_SPECTRUM_OUT_OF_RANGE = 3,
  MODGEN_STATUS_NUMERICAL = 4,
  MODGEN_STATUS_MISSING_ARTIFACT = 5,
  MODGEN_STATUS_IO = 6,
  MODGEN_STATUS_PANIC = 7,
} ModgenStatus;

/**
 * A computed modular generator with the grid it lives on.
 */
typedef struct ModgenResult ModgenResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; valid until the next call.
 */
const char *modgen_last_error(void);

/**
 * Working digits for `n` cells: `ceil(1.5 n)` on the cylinder, `ceil(1.75 n)` on Minkowski.
 */
uint32_t modgen_required_digits(size_t n, enum ModgenAmbient ambient);

/**
 * Computes `M_-` and `M_+` for the region given as `n_intervals` pairs
 * `(a, b)` in `intervals`. `digits = 0` selects `modgen_required_digits`.
 *
 * # Safety
 * `intervals` must point to `2 * n_intervals` doubles and `out` to writable storage.
 */
enum ModgenStatus modgen_compute(enum ModgenAmbient ambient,
                                 double size,
                                 const double *intervals,
                                 size_t n_intervals,
                                 double mass,
                                 uint8_t xi,
                                 size_t n,
                                 uint32_t digits,
                                 struct ModgenResult **out);

/**
 * # Safety
 * `result` must come from `modgen_compute` and not be used afterwards.
 */
void modgen_result_free(struct ModgenResult *result);

/**
 * Number of grid cells, or 0 for a null handle.
 *
 * # Safety
 * `result` must be null or a live handle.
 */
size_t modgen_result_dim(const struct ModgenResult *result);

/**
 * Copies a matrix row-major into `out` as doubles; `len` must be `dim * dim`.
 *
 * # Safety
 * `result` must be a live handle and `out` must hold `len` doubles.
 */
enum ModgenStatus modgen_result_matrix(const struct ModgenResult *result,
                                       enum ModgenMatrixKind kind,
                                       double *out,
                                       size_t len);

/**
 * Full-precision decimal string of entry `(i, j)`, released with `modgen_string_free`.
 *
 * # Safety
 * `result` must be a live handle and `out` writable.
 */
enum ModgenStatus modgen_result_entry_decimal(const struct ModgenResult *result,
                                              enum ModgenMatrixKind kind,
                                              size_t i,
                                              size_t j,
                                              char **out);

/**
 * # Safety
 * `s` must come from this library and not be used afterwards.
 */
void modgen_string_free(char *s);

/**
 * `min(1 - |lambda|)` over the spectrum of `B`, and whether every pipeline invariant holds.
 *
 * # Safety
 * `result` must be a live handle; `margin` and `invariants_hold` writable or null.
 */
enum ModgenStatus modgen_result_diagnostics(const struct ModgenResult *result,
                                            double *margin,
                                            bool *invariants_hold);

/**
 * Smeared `M_-` for Gaussians (Minkowski) or theta-Gaussians (cylinder) of
 * width `sigma` at the ascending `peaks`; writes `n_peaks^2` doubles row-major.
 *
 * # Safety
 * `result` must be a live handle, `peaks` hold `n_peaks` doubles, `out` `n_peaks^2`.
 */
enum ModgenStatus modgen_result_smeared(const struct ModgenResult *result,
                                        const double *peaks,
                                        size_t n_peaks,
                                        double sigma,
                                        double *out);

/**
 * Runs a config file as the `run` command does. `out_dir` and `cache_dir`
 * override the config when non-null.
 *
 * # Safety
 * String arguments must be null or nul-terminated.
 */
enum ModgenStatus modgen_run_config(const char *config_path,
                                    const char *out_dir,
                                    const char *cache_dir,
                                    bool force);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MODGEN_H */
