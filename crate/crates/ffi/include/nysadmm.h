#ifndef NYSADMM_H
#define NYSADMM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum NysadmmStatus {
  NYSADMM_STATUS_OK = 0,
  NYSADMM_STATUS_NULL_POINTER = 1,
  NYSADMM_STATUS_INVALID_ARGUMENT = 2,
  NYSADMM_STATUS_DIMENSION_MISMATCH = 3,
  NYSADMM_STATUS_NUMERICAL = 4,
  NYSADMM_STATUS_IO = 5,
  NYSADMM_STATUS_PANIC = 6,
} NysadmmStatus;

/**
 * Values for [`NysadmmConfig::schedule`].
 */
typedef enum NysadmmSchedule {
  NYSADMM_SCHEDULE_GEOMETRIC_MEAN = 0,
  NYSADMM_SCHEDULE_POWER_DECAY = 1,
} NysadmmSchedule;

typedef struct NysadmmPreconditioner NysadmmPreconditioner;

typedef struct NysadmmProblem NysadmmProblem;

typedef struct NysadmmResult NysadmmResult;

/**
 * Solver settings. Start from [`nysadmm_config_default`].
 */
typedef struct NysadmmConfig {
  double rho;
  double eps_abs;
  double eps_rel;
  size_t max_admm_iters;
  size_t sketch_size;
  bool adaptive;
  double adaptive_tol;
  uint64_t seed;
  /**
   * A [`NysadmmSchedule`] value.
   */
  uint32_t schedule;
  /**
   * Exponent of the power-decay schedule.
   */
  double beta;
  /**
   * Rebuild the preconditioner every this many iterations; negative defers
   * to the problem (logistic rebuilds every iteration, others never).
   */
  int64_t refresh_interval;
  size_t pcg_max_iters;
  /**
   * When positive, stop on `max|Δz| / max|z|` below this instead of residuals.
   */
  double relative_change_tol;
} NysadmmConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static nul-terminated string.
 */
const char *nysadmm_version(void);

/**
 * Message for the most recent failure on this thread, or null if none.
 * The pointer stays valid until the next failure on the same thread.
 */
const char *nysadmm_last_error_message(void);

struct NysadmmConfig nysadmm_config_default(void);

/**
 * Elastic net `½‖Ax−b‖² + ½·ridge‖x‖² + l1‖x‖₁`; `ridge = 0` gives the lasso.
 *
 * # Safety
 * `a` must hold `rows*cols` doubles, `b` must hold `rows`, and `out` must be writable.
 */
enum NysadmmStatus nysadmm_problem_elastic_net(const double *a,
                                               size_t rows,
                                               size_t cols,
                                               const double *b,
                                               double l1,
                                               double ridge,
                                               struct NysadmmProblem **out);

/**
 * ℓ1-regularized logistic regression with labels in {0, 1}.
 *
 * # Safety
 * `a` must hold `rows*cols` doubles, `b` must hold `rows`, and `out` must be writable.
 */
enum NysadmmStatus nysadmm_problem_logistic(const double *a,
                                            size_t rows,
                                            size_t cols,
                                            const double *b,
                                            double gamma,
                                            struct NysadmmProblem **out);

/**
 * Dual SVM over an `n×n` psd kernel matrix with labels in {-1, +1}.
 *
 * # Safety
 * `kernel` must hold `n*n` doubles, `labels` must hold `n`, and `out` must be writable.
 */
enum NysadmmStatus nysadmm_problem_svm(const double *kernel,
                                       size_t n,
                                       const double *labels,
                                       double c,
                                       struct NysadmmProblem **out);

/**
 * Number of unknowns, or 0 for a null handle.
 *
 * # Safety
 * `problem` must be null or a live handle.
 */
size_t nysadmm_problem_dim(const struct NysadmmProblem *problem);

/**
 * # Safety
 * `problem` must be null or a live handle; it is invalid afterwards.
 */
void nysadmm_problem_free(struct NysadmmProblem *problem);

/**
 * Runs the solver. Reaching the iteration limit is not an error; check
 * [`nysadmm_result_converged`].
 *
 * # Safety
 * `problem` must be a live handle, `config` readable (or null for defaults),
 * and `out` writable.
 */
enum NysadmmStatus nysadmm_solve(const struct NysadmmProblem *problem,
                                 const struct NysadmmConfig *config,
                                 struct NysadmmResult **out);

/**
 * Length of the solution vector, or 0 for a null handle.
 *
 * # Safety
 * `result` must be null or a live handle.
 */
size_t nysadmm_result_dim(const struct NysadmmResult *result);

/**
 * Copies the solution into `out`, which must have exactly `len` entries.
 *
 * # Safety
 * `result` must be a live handle and `out` must hold `len` writable doubles.
 */
enum NysadmmStatus nysadmm_result_solution(const struct NysadmmResult *result,
                                           double *out,
                                           size_t len);

/**
 * # Safety
 * `result` must be null or a live handle.
 */
size_t nysadmm_result_iterations(const struct NysadmmResult *result);

/**
 * # Safety
 * `result` must be null or a live handle.
 */
bool nysadmm_result_converged(const struct NysadmmResult *result);

/**
 * Objective at the solution; NaN for a null handle.
 *
 * # Safety
 * `result` must be null or a live handle.
 */
double nysadmm_result_objective(const struct NysadmmResult *result);

/**
 * # Safety
 * `result` must be null or a live handle.
 */
double nysadmm_result_primal_residual(const struct NysadmmResult *result);

/**
 * # Safety
 * `result` must be null or a live handle.
 */
double nysadmm_result_dual_residual(const struct NysadmmResult *result);

/**
 * # Safety
 * `result` must be null or a live handle; it is invalid afterwards.
 */
void nysadmm_result_free(struct NysadmmResult *result);

/**
 * Builds a rank-`sketch_size` Nyström preconditioner for `H + ρI` from a
 * symmetric psd `d×d` matrix.
 *
 * # Safety
 * `h` must hold `d*d` doubles and `out` must be writable.
 */
enum NysadmmStatus nysadmm_preconditioner_build(const double *h,
                                                size_t d,
                                                size_t sketch_size,
                                                double rho,
                                                uint64_t seed,
                                                struct NysadmmPreconditioner **out);

/**
 * Writes `P⁻¹v` into `out`; both buffers have `len` entries and may not overlap.
 *
 * # Safety
 * `precond` must be a live handle, `v` readable and `out` writable for `len` doubles.
 */
enum NysadmmStatus nysadmm_preconditioner_apply_inverse(const struct NysadmmPreconditioner *precond,
                                                        const double *v,
                                                        double *out,
                                                        size_t len);

/**
 * `(λ̂ₛ + ρ)/ρ`; NaN for a null handle.
 *
 * # Safety
 * `precond` must be null or a live handle.
 */
double nysadmm_preconditioner_condition_number(const struct NysadmmPreconditioner *precond);

/**
 * # Safety
 * `precond` must be null or a live handle.
 */
size_t nysadmm_preconditioner_rank(const struct NysadmmPreconditioner *precond);

/**
 * # Safety
 * `precond` must be null or a live handle; it is invalid afterwards.
 */
void nysadmm_preconditioner_free(struct NysadmmPreconditioner *precond);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NYSADMM_H */
