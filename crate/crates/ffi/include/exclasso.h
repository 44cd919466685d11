#ifndef EXCLASSO_H
#define EXCLASSO_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ExclStatus {
  EXCL_STATUS_OK = 0,
  EXCL_STATUS_NULL_POINTER = 1,
  EXCL_STATUS_DIMENSION_MISMATCH = 2,
  EXCL_STATUS_INVALID_ARGUMENT = 3,
  EXCL_STATUS_SOLVER_FAILURE = 4,
  EXCL_STATUS_PANIC = 5,
} ExclStatus;

/**
 * Opaque partition handle.
 */
typedef struct ExclPartition ExclPartition;

/**
 * Opaque regression problem handle.
 */
typedef struct ExclProblem ExclProblem;

/**
 * Summary of a solve.
 */
typedef struct ExclSolveInfo {
  double objective;
  size_t iterations;
  /**
   * Negative when no gap is available.
   */
  double duality_gap;
  bool converged;
} ExclSolveInfo;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Static description of a status code.
 */
const char *excl_status_message(enum ExclStatus status);

/**
 * Partition from 0-based group labels, one per coordinate. Labels must
 * cover `0..k` without gaps.
 *
 * # Safety
 * `labels` must point to `p` readable values; `out` must be writable.
 */
enum ExclStatus excl_partition_new(size_t p, const size_t *labels, struct ExclPartition **out);

/**
 * Partition into the residue classes `{i : i mod k = r}`.
 *
 * # Safety
 * `out` must be writable.
 */
enum ExclStatus excl_partition_modulo(size_t p, size_t k, struct ExclPartition **out);

/**
 * # Safety
 * `part` must come from a partition constructor and not be freed twice.
 */
void excl_partition_free(struct ExclPartition *part);

/**
 * Number of coordinates, or 0 for a null handle.
 *
 * # Safety
 * `part` must be null or a live handle.
 */
size_t excl_partition_dim(const struct ExclPartition *part);

/**
 * # Safety
 * `x` must point to `len` readable values; `out` must be writable.
 */
enum ExclStatus excl_omega(const struct ExclPartition *part,
                           const double *x,
                           size_t len,
                           double *out);

/**
 * # Safety
 * As [`excl_omega`].
 */
enum ExclStatus excl_omega_dual(const struct ExclPartition *part,
                                const double *u,
                                size_t len,
                                double *out);

/**
 * Prox of `scale · Ω`. Writes the prox into `z` and `x − z` into
 * `projection` (may be null).
 *
 * # Safety
 * `x`, `z` and a non-null `projection` must each hold `len` values.
 */
enum ExclStatus excl_prox(const struct ExclPartition *part,
                          const double *x,
                          size_t len,
                          double scale,
                          double *z,
                          double *projection);

/**
 * Least-squares problem `(1/2n)‖y − Ax‖²` with `A` given row-major.
 *
 * # Safety
 * `a` must hold `n·p` values and `y` must hold `n` values; `out` must be writable.
 */
enum ExclStatus excl_problem_new(size_t n,
                                 size_t p,
                                 const double *a,
                                 const double *y,
                                 struct ExclProblem **out);

/**
 * # Safety
 * `problem` must come from [`excl_problem_new`] and not be freed twice.
 */
void excl_problem_free(struct ExclProblem *problem);

/**
 * Proximal gradient solve of `L(x) + λ Ω(x)` from zero.
 *
 * # Safety
 * `x_out` must hold `len` values; `info` may be null.
 */
enum ExclStatus excl_fista_solve(const struct ExclProblem *problem,
                                 const struct ExclPartition *part,
                                 double lambda,
                                 size_t max_iter,
                                 double gap_tol,
                                 double *x_out,
                                 size_t len,
                                 struct ExclSolveInfo *info);

/**
 * Forward active-set solve of `L(x) + (μ/2) Ω(x)²`. `max_strings = 0`
 * selects the unrestricted evolution path.
 *
 * # Safety
 * As [`excl_fista_solve`].
 */
enum ExclStatus excl_active_set_solve(const struct ExclProblem *problem,
                                      const struct ExclPartition *part,
                                      double mu,
                                      size_t s_max,
                                      double epsilon,
                                      size_t max_strings,
                                      double *x_out,
                                      size_t len,
                                      struct ExclSolveInfo *info);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EXCLASSO_H */
