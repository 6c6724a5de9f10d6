#ifndef PBQN_H
#define PBQN_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PbqnStatus {
  PBQN_STATUS_OK = 0,
  PBQN_STATUS_NULL_POINTER = 1,
  PBQN_STATUS_INVALID_ARGUMENT = 2,
  PBQN_STATUS_PARSE = 3,
  PBQN_STATUS_NUMERICAL = 4,
  PBQN_STATUS_NOT_CONVERGED = 5,
  PBQN_STATUS_IO = 6,
  PBQN_STATUS_PANIC = 7,
} PbqnStatus;

typedef enum PbqnCurvatureMode {
  /**
   * Curvature pairs from the overlap of consecutive batches.
   */
  PBQN_CURVATURE_MODE_MULTI_BATCH = 0,
  /**
   * Curvature pairs from two gradient passes over the same batch.
   */
  PBQN_CURVATURE_MODE_FULL_OVERLAP = 1,
} PbqnCurvatureMode;

typedef enum PbqnStopReason {
  PBQN_STOP_REASON_BUDGET = 0,
  PBQN_STOP_REASON_GRADIENT_TOLERANCE = 1,
  PBQN_STOP_REASON_CONVERGED = 2,
  PBQN_STOP_REASON_MAX_ITERATIONS = 3,
  PBQN_STOP_REASON_DIVERGED = 4,
} PbqnStopReason;

/**
 * Opaque finite-sum objective.
 */
typedef struct PbqnProblem PbqnProblem;

/**
 * Opaque optimizer trajectory.
 */
typedef struct PbqnResult PbqnResult;

/**
 * Optimizer settings. Start from [`pbqn_options_default`].
 */
typedef struct PbqnOptions {
  double theta;
  size_t initial_batch;
  double c1;
  size_t memory_size;
  double curvature_eps;
  enum PbqnCurvatureMode mode;
  double overlap_fraction;
  /**
   * Budget in full-gradient equivalents.
   */
  double max_fge;
  /**
   * `‖∇F‖∞` stopping tolerance; zero or negative disables it.
   */
  double gradient_tolerance;
  uint64_t seed;
} PbqnOptions;

/**
 * One optimizer iteration; record 0 is the starting point.
 */
typedef struct PbqnRecord {
  size_t k;
  size_t batch_size;
  double alpha;
  uint32_t halvings;
  bool pair_admitted;
  double fge;
  double train_loss;
  uint64_t gradient_evals;
  uint64_t value_evals;
} PbqnRecord;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. Valid until the
 * next failing call on the same thread.
 */
const char *pbqn_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *pbqn_version(void);

/**
 * ℓ2-regularized logistic regression (`λ = 1/N`) over a LIBSVM file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum PbqnStatus pbqn_problem_from_libsvm(const char *path, struct PbqnProblem **out);

/**
 * Logistic regression over `n` dense rows of `d` features (row-major) with
 * labels in {−1, +1}. `lambda < 0` selects `1/n`.
 *
 * # Safety
 * `features` must hold `n·d` values, `labels` `n` values, `out` must be valid.
 */
enum PbqnStatus pbqn_problem_logistic_dense(const double *features,
                                            const double *labels,
                                            size_t n,
                                            size_t d,
                                            double lambda,
                                            struct PbqnProblem **out);

/**
 * Synthetic problem from `quad:<d>:<mu>:<L>:<N>` or `logistic:<n>:<d>`.
 * Logistic sets are used whole, without a held-out split.
 *
 * # Safety
 * `spec` must be a NUL-terminated string and `out` a valid pointer.
 */
enum PbqnStatus pbqn_problem_synthetic(const char *spec, uint64_t seed, struct PbqnProblem **out);

/**
 * # Safety
 * `problem` must come from a `pbqn_problem_*` constructor and not be used afterwards. NULL is ignored.
 */
void pbqn_problem_free(struct PbqnProblem *problem);

/**
 * Number of components `N` and dimension `d`.
 *
 * # Safety
 * `problem` must be a live handle; the out pointers must be valid.
 */
enum PbqnStatus pbqn_problem_shape(const struct PbqnProblem *problem,
                                   size_t *num_components,
                                   size_t *dim);

/**
 * Full objective and, if `grad` is non-NULL, its gradient at `x`.
 *
 * # Safety
 * `x` and `grad` (when non-NULL) must hold `len` values, which must equal the dimension.
 */
enum PbqnStatus pbqn_problem_evaluate(const struct PbqnProblem *problem,
                                      const double *x,
                                      size_t len,
                                      double *value,
                                      double *grad);

/**
 * Reference optimum: full-batch L-BFGS to `‖∇F‖∞ ≤ 1e-8`.
 *
 * # Safety
 * `problem` must be a live handle and `value` a valid pointer.
 */
enum PbqnStatus pbqn_problem_rstar(const struct PbqnProblem *problem, double *value);

/**
 * Library defaults: θ = 0.9, |S₀| = 512, c1 = 1e-4, m = 10, ε = 1e-2,
 * multi-batch with 25% overlap, 100 full-gradient equivalents.
 */
struct PbqnOptions pbqn_options_default(void);

/**
 * Runs PBQN from `x0` (zeros when NULL). `options` NULL means defaults.
 *
 * # Safety
 * `problem` must be a live handle, `x0` (when non-NULL) must hold `x0_len`
 * values, and `out` must be valid.
 */
enum PbqnStatus pbqn_run(const struct PbqnProblem *problem,
                         const struct PbqnOptions *options,
                         const double *x0,
                         size_t x0_len,
                         struct PbqnResult **out);

/**
 * # Safety
 * `result` must come from [`pbqn_run`] and not be used afterwards. NULL is ignored.
 */
void pbqn_result_free(struct PbqnResult *result);

/**
 * Number of records, including the starting point. Zero for NULL.
 *
 * # Safety
 * `result` must be a live handle or NULL.
 */
size_t pbqn_result_len(const struct PbqnResult *result);

/**
 * # Safety
 * `result` must be a live handle and `record` a valid pointer.
 */
enum PbqnStatus pbqn_result_record(const struct PbqnResult *result,
                                   size_t index,
                                   struct PbqnRecord *record);

/**
 * Copies the final iterate into `x`, which must hold exactly the dimension.
 *
 * # Safety
 * `result` must be a live handle and `x` must hold `len` writable values.
 */
enum PbqnStatus pbqn_result_solution(const struct PbqnResult *result, double *x, size_t len);

/**
 * # Safety
 * `result` must be a live handle and `reason` a valid pointer.
 */
enum PbqnStatus pbqn_result_stop_reason(const struct PbqnResult *result,
                                        enum PbqnStopReason *reason);

/**
 * Iteration-ratio threshold `(C_S/C_L)·(B_S/B_L)/P_e` below which PBQN is
 * predicted to train faster than SG.
 *
 * # Safety
 * `threshold` must be a valid pointer.
 */
enum PbqnStatus pbqn_perf_model_threshold(double cost_large,
                                          double cost_small,
                                          double batch_small,
                                          double batch_large,
                                          double parallel_efficiency,
                                          double *threshold);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PBQN_H */
