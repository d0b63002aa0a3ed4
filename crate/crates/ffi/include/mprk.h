/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#ifndef MPRK_H
#define MPRK_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum MprkStatus {
  MPRK_STATUS_OK = 0,
  MPRK_STATUS_NULL_POINTER = 1,
  MPRK_STATUS_USAGE = 2,
  MPRK_STATUS_DOMAIN = 3,
  MPRK_STATUS_MODEL = 4,
  MPRK_STATUS_SOLVER = 5,
  MPRK_STATUS_INTEGRATION = 6,
  MPRK_STATUS_ORACLE = 7,
  MPRK_STATUS_IO = 8,
  MPRK_STATUS_PANIC = 9,
} MprkStatus;

// A production-destruction system.
typedef struct MprkProblem MprkProblem;

// A configured time-stepping scheme.
typedef struct MprkScheme MprkScheme;

// One completed step, usable for dense output.
typedef struct MprkStepRecord MprkStepRecord;

// The records of a full integration.
typedef struct MprkTrajectory MprkTrajectory;

// Fills `p_out` (row-major `n * n`) with production rates at state `y`.
// `p_out[k * n + nu]` is the rate from species `nu` into species `k`.
typedef void (*MprkRateFn)(void *user, size_t n, const double *y, double *p_out);

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread; empty after a success.
// The pointer stays valid until the next call on this thread.
const char *mprk_last_error(void);

// Built-in problem by name: "linear-test" or "nonlinear-test".
enum MprkStatus mprk_problem_builtin(const char *name, struct MprkProblem **out);

// Linear system `y' = A y`; `A` must be Metzler with zero column sums.
enum MprkStatus mprk_problem_from_matrix(size_t n,
                                         const double *a,
                                         const double *y0,
                                         struct MprkProblem **out);

// Problem backed by a C rate callback. `user` is passed through untouched
// and must outlive the problem.
enum MprkStatus mprk_problem_from_callback(const char *name,
                                           size_t n,
                                           const double *y0,
                                           MprkRateFn rates,
                                           void *user,
                                           struct MprkProblem **out);

// Number of species, or 0 for a null handle.
size_t mprk_problem_dim(const struct MprkProblem *problem);

// Copies the initial state into `out` (length `n`).
enum MprkStatus mprk_problem_initial_state(const struct MprkProblem *problem, double *out);

// Right-hand side `f(y)` into `out`.
enum MprkStatus mprk_problem_rhs(const struct MprkProblem *problem, const double *y, double *out);

void mprk_problem_free(struct MprkProblem *problem);

// Scheme from a selector: "mpe", "mprk22:<alpha>", "mprk43:<alpha>,<beta>", "mprk4".
enum MprkStatus mprk_scheme_parse(const char *selector, struct MprkScheme **out);

// Classical order of the scheme, or 0 for a null handle.
uint32_t mprk_scheme_order(const struct MprkScheme *scheme);

void mprk_scheme_free(struct MprkScheme *scheme);

// One step of size `dt` from the positive state `y_n`.
enum MprkStatus mprk_step(const struct MprkProblem *problem,
                          const struct MprkScheme *scheme,
                          const double *y_n,
                          double dt,
                          struct MprkStepRecord **out);

// Copies the end-of-step state into `out`.
enum MprkStatus mprk_step_record_y_next(const struct MprkStepRecord *record, double *out);

// Linear solves the step performed, or 0 for a null handle.
size_t mprk_step_record_solves(const struct MprkStepRecord *record);

void mprk_step_record_free(struct MprkStepRecord *record);

// Dense output at `t_n + theta * dt`. `formula` is "do1", "do2",
// "do2-explicit" or "do3"; `t_out` may be null.
enum MprkStatus mprk_dense_eval(const struct MprkStepRecord *record,
                                const char *formula,
                                double theta,
                                double *t_out,
                                double *y_out);

// Integrates from the problem's initial state over `[0, t_end]`.
enum MprkStatus mprk_integrate(const struct MprkProblem *problem,
                               const struct MprkScheme *scheme,
                               double t_end,
                               double dt,
                               struct MprkTrajectory **out);

// Number of steps, or 0 for a null handle. States are indexed `0..=steps`.
size_t mprk_trajectory_steps(const struct MprkTrajectory *traj);

// Time and state after `index` steps; `t_out` may be null.
enum MprkStatus mprk_trajectory_state(const struct MprkTrajectory *traj,
                                      size_t index,
                                      double *t_out,
                                      double *y_out);

// Dense output inside step `step` (0-based) of a trajectory.
enum MprkStatus mprk_trajectory_dense(const struct MprkTrajectory *traj,
                                      size_t step,
                                      const char *formula,
                                      double theta,
                                      double *t_out,
                                      double *y_out);

void mprk_trajectory_free(struct MprkTrajectory *traj);

// Step-halving study with `dt0 / 2^k`, `k < levels`. `dense` may be null
// for the nodal error at `t_end`; otherwise the error is maximised over
// `thetas` in every step. `dts` and `errors` receive `levels` values,
// `mean_eoc` (nullable) the mean of the last three observed orders.
enum MprkStatus mprk_convergence_study(const struct MprkProblem *problem,
                                       const struct MprkScheme *scheme,
                                       const char *dense,
                                       const double *thetas,
                                       size_t n_thetas,
                                       double t_end,
                                       double dt0,
                                       size_t levels,
                                       double *dts,
                                       double *errors,
                                       double *mean_eoc);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MPRK_H */
