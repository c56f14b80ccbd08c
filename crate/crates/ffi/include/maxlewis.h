#ifndef MAXLEWIS_H
#define MAXLEWIS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

/*
 Status codes returned by every fallible function.
 */
typedef enum MlStatus {
  ML_STATUS_OK = 0,
  ML_STATUS_NULL_POINTER = 1,
  ML_STATUS_INVALID_ARGUMENT = 2,
  ML_STATUS_NOT_CONVERGED = 3,
  ML_STATUS_RANK_DEFICIENT = 4,
  ML_STATUS_BUDGET_INFEASIBLE = 5,
  ML_STATUS_BUFFER_TOO_SMALL = 6,
  ML_STATUS_PANIC = 7,
} MlStatus;

/*
 Dense real matrix.
 */
typedef struct MlMatrix MlMatrix;

/*
 Query plan together with the distribution it was drawn from.
 */
typedef struct MlPlan MlPlan;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message for the last failure on this thread, or NULL. The pointer stays
 valid until the next failing call on the same thread.
 */
const char *ml_last_error(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *ml_version(void);

/*
 Copies a row-major `rows x cols` array into a new matrix handle.

 # Safety
 `data` must point to `rows * cols` doubles and `out` to writable storage
 for one pointer.
 */
enum MlStatus ml_matrix_new(size_t rows, size_t cols, const double *data, struct MlMatrix **out);

/*
 # Safety
 `m` must be NULL or a handle from [`ml_matrix_new`] not yet freed.
 */
void ml_matrix_free(struct MlMatrix *m);

/*
 # Safety
 `m` must be NULL or a live matrix handle.
 */
size_t ml_matrix_rows(const struct MlMatrix *m);

/*
 # Safety
 `m` must be NULL or a live matrix handle.
 */
size_t ml_matrix_cols(const struct MlMatrix *m);

/*
 Leverage scores, one per row, into `out[0..len]`.

 # Safety
 `m` must be a live handle and `out` must hold `len` doubles.
 */
enum MlStatus ml_leverage_scores(const struct MlMatrix *m, double *out, size_t len);

/*
 ℓp Lewis weights with the default iteration settings. When `residual` is
 non-NULL it receives the certified fixed-point residual.

 # Safety
 `m` must be a live handle, `out` must hold `len` doubles and `residual`
 must be NULL or writable.
 */
enum MlStatus ml_lewis_weights(const struct MlMatrix *m,
                               double p,
                               double *out,
                               size_t len,
                               double *residual);

/*
 Relative fixed-point residual of `weights[0..len]` for `m`.

 # Safety
 `m` must be a live handle, `weights` must hold `len` doubles and
 `residual` must be writable.
 */
enum MlStatus ml_verify_fixed_point(const struct MlMatrix *m,
                                    const double *weights,
                                    size_t len,
                                    double p,
                                    double *residual);

/*
 Draws i.i.d. from the max-weight distribution of `k` weight vectors of
 length `n` (row-major in `weights`) until `tau` distinct rows are seen.

 # Safety
 `weights` must hold `k * n` doubles and `out` must be writable.
 */
enum MlStatus ml_plan_draw(const double *weights,
                           size_t k,
                           size_t n,
                           double p,
                           size_t tau,
                           uint64_t seed,
                           struct MlPlan **out);

/*
 # Safety
 `plan` must be NULL or a handle from [`ml_plan_draw`] not yet freed.
 */
void ml_plan_free(struct MlPlan *plan);

/*
 Number of draws made, or 0 for NULL.

 # Safety
 `plan` must be NULL or a live plan handle.
 */
size_t ml_plan_draw_count(const struct MlPlan *plan);

/*
 Number of distinct rows selected, or 0 for NULL.

 # Safety
 `plan` must be NULL or a live plan handle.
 */
size_t ml_plan_distinct_count(const struct MlPlan *plan);

/*
 Sum of the elementwise-max weights the plan was drawn from, or NaN for NULL.

 # Safety
 `plan` must be NULL or a live plan handle.
 */
double ml_plan_total_mass(const struct MlPlan *plan);

/*
 Draw sequence, in draw order.

 # Safety
 `plan` must be a live handle and `out` must hold `len` elements.
 */
enum MlStatus ml_plan_draws(const struct MlPlan *plan, size_t *out, size_t len);

/*
 Distinct selected rows, in order of first appearance.

 # Safety
 `plan` must be a live handle and `out` must hold `len` elements.
 */
enum MlStatus ml_plan_distinct(const struct MlPlan *plan, size_t *out, size_t len);

/*
 Rows of the sampling matrix for a pool preceded by `n_labeled` labeled
 rows: source row indices and scales, `n_labeled + draw_count` each.
 Repeated draws of a row appear as separate rows.

 # Safety
 `plan` must be a live handle; `sources` and `scales` must each hold
 `len` elements.
 */
enum MlStatus ml_plan_sampling_rows(const struct MlPlan *plan,
                                    size_t n_labeled,
                                    size_t *sources,
                                    double *scales,
                                    size_t len);

/*
 `argmin_θ ‖Aθ − y‖_p` into `theta[0..d]`.

 # Safety
 `m` must be a live handle, `y` must hold `n` doubles and `theta` `d`.
 */
enum MlStatus ml_lp_regression(const struct MlMatrix *m,
                               const double *y,
                               size_t n,
                               double p,
                               double tol,
                               double *theta,
                               size_t d);

/*
 Query budget from the sample-size bound.

 # Safety
 `out` must be writable.
 */
enum MlStatus ml_sample_size_bound(size_t d,
                                   double p,
                                   double epsilon,
                                   double total_mass,
                                   double c,
                                   uint64_t *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MAXLEWIS_H */
