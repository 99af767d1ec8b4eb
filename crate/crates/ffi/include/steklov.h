#ifndef STEKLOV_H
#define STEKLOV_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes.
enum SteklovStatus
#if defined(__cplusplus) || __STDC_VERSION__ >= 202311L
  : int32_t
#endif // defined(__cplusplus) || __STDC_VERSION__ >= 202311L
 {
  STEKLOV_STATUS_OK = 0,
  STEKLOV_STATUS_NULL_POINTER = 1,
  STEKLOV_STATUS_INVALID_UTF8 = 2,
  STEKLOV_STATUS_PARAMETER = 3,
  STEKLOV_STATUS_PARSE = 4,
  STEKLOV_STATUS_RESOURCE_LIMIT = 5,
  STEKLOV_STATUS_VALIDATION = 6,
  STEKLOV_STATUS_DIMENSION_MISMATCH = 7,
  STEKLOV_STATUS_DEFINITENESS = 8,
  STEKLOV_STATUS_GEOMETRY = 9,
  STEKLOV_STATUS_INVARIANT = 10,
  STEKLOV_STATUS_IO = 11,
  STEKLOV_STATUS_DIVISION_GUARD = 12,
  STEKLOV_STATUS_BUFFER_TOO_SMALL = 13,
  STEKLOV_STATUS_PANIC = 14,
};
#ifndef __cplusplus
#if __STDC_VERSION__ >= 202311L
typedef enum SteklovStatus SteklovStatus;
#else
typedef int32_t SteklovStatus;
#endif // __STDC_VERSION__ >= 202311L
#endif // __cplusplus

// Domain shapes accepted by [`steklov_context_new`].
enum SteklovShape
#if defined(__cplusplus) || __STDC_VERSION__ >= 202311L
  : int32_t
#endif // defined(__cplusplus) || __STDC_VERSION__ >= 202311L
 {
  STEKLOV_SHAPE_DISK = 0,
  STEKLOV_SHAPE_SQUARE = 1,
};
#ifndef __cplusplus
#if __STDC_VERSION__ >= 202311L
typedef enum SteklovShape SteklovShape;
#else
typedef int32_t SteklovShape;
#endif // __STDC_VERSION__ >= 202311L
#endif // __cplusplus

// Finders accepted by [`steklov_minimize`].
enum SteklovFinder
#if defined(__cplusplus) || __STDC_VERSION__ >= 202311L
  : int32_t
#endif // defined(__cplusplus) || __STDC_VERSION__ >= 202311L
 {
  STEKLOV_FINDER_GLOBAL = 0,
  STEKLOV_FINDER_HALF_SPACE_PLUS = 1,
  STEKLOV_FINDER_HALF_SPACE_MINUS = 2,
};
#ifndef __cplusplus
#if __STDC_VERSION__ >= 202311L
typedef enum SteklovFinder SteklovFinder;
#else
typedef int32_t SteklovFinder;
#endif // __STDC_VERSION__ >= 202311L
#endif // __cplusplus

// Mesh, operators, spectrum and energy functional for one problem.
typedef struct SteklovContext SteklovContext;

// Scalar summary of a critical point.
typedef struct SteklovSolution {
  double j_value;
  double grad_norm;
  double cerami_metric;
  uint64_t iterations;
  bool converged;
  bool constraint_active;
  uint64_t morse_negatives;
  uint64_t morse_near_zeros;
} SteklovSolution;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. Valid until the
// next call on the same thread.
const char *steklov_last_error_message(void);

// Library version as a static string.
const char *steklov_version(void);

// Builds a context on a generated mesh with `c ≡ coefficient`, the named
// library nonlinearity and `n_eigs` Steklov pairs.
//
// # Safety
// `nonlinearity` must be a NUL-terminated string, `params` null or
// NUL-terminated, and `out` a valid pointer.
SteklovStatus steklov_context_new(SteklovShape shape,
                                  double size,
                                  double h,
                                  double coefficient,
                                  const char *nonlinearity,
                                  const char *params,
                                  uintptr_t n_eigs,
                                  struct SteklovContext **out);

// Releases a context. Null is ignored.
//
// # Safety
// `ctx` must come from [`steklov_context_new`] and not be used afterwards.
void steklov_context_free(struct SteklovContext *ctx);

// Number of mesh nodes, the length of every coefficient vector; 0 for null.
//
// # Safety
// `ctx` must be null or a live context.
uintptr_t steklov_context_dim(const struct SteklovContext *ctx);

// Number of computed Steklov pairs; 0 for null.
//
// # Safety
// `ctx` must be null or a live context.
uintptr_t steklov_eigen_count(const struct SteklovContext *ctx);

// Copies the eigenvalues `μ₁ ≤ … ≤ μ_k` into `out`.
//
// # Safety
// `out` must hold `len` doubles.
SteklovStatus steklov_eigenvalues(const struct SteklovContext *ctx, double *out, uintptr_t len);

// Copies the nodal values of eigenfunction `i` (1-based) into `out`.
//
// # Safety
// `out` must hold `len` doubles.
SteklovStatus steklov_eigenfunction(const struct SteklovContext *ctx,
                                    uintptr_t i,
                                    double *out,
                                    uintptr_t len);

// Energy `J(u)`.
//
// # Safety
// `u` must hold `len` doubles and `out` be valid.
SteklovStatus steklov_energy(const struct SteklovContext *ctx,
                             const double *u,
                             uintptr_t len,
                             double *out);

// Gradient `J′(u)` in the Euclidean dual basis.
//
// # Safety
// `u` must hold `len` doubles and `out` `out_len` doubles.
SteklovStatus steklov_gradient(const struct SteklovContext *ctx,
                               const double *u,
                               uintptr_t len,
                               double *out,
                               uintptr_t out_len);

// Descent from `u0`; the critical point goes to `out_u` and its summary to
// `out`. A non-converged run still returns `Ok` with `converged = false`.
//
// # Safety
// `u0` must hold `len` doubles, `out_u` `len` doubles, `out` be valid.
SteklovStatus steklov_minimize(const struct SteklovContext *ctx,
                               SteklovFinder finder,
                               const double *u0,
                               uintptr_t len,
                               double tol,
                               uintptr_t max_iters,
                               struct SteklovSolution *out,
                               double *out_u);

// Mountain pass between `0` and `e` with `n_path` path points.
//
// # Safety
// `e` must hold `len` doubles, `out_u` `len` doubles, `out` be valid.
SteklovStatus steklov_mountain_pass(const struct SteklovContext *ctx,
                                    const double *e,
                                    uintptr_t len,
                                    uintptr_t n_path,
                                    double tol,
                                    uintptr_t max_iters,
                                    struct SteklovSolution *out,
                                    double *out_u);

// Runs a config file like the `steklov run` command. `out_dir` may be null
// to keep the config's directory. `exit_code` receives 0 or 2 as the
// command would return.
//
// # Safety
// `config_path` must be NUL-terminated, `out_dir` null or NUL-terminated,
// `exit_code` valid.
SteklovStatus steklov_run_config(const char *config_path, const char *out_dir, int32_t *exit_code);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* STEKLOV_H */
