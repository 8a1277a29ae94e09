#ifndef PEARCEY_GAP_H
#define PEARCEY_GAP_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Outcome of a call.
 */
typedef enum PgStatus {
  PG_STATUS_OK = 0,
  PG_STATUS_NULL_POINTER = 1,
  PG_STATUS_DOMAIN = 2,
  PG_STATUS_NUMERIC = 3,
  PG_STATUS_ACCURACY = 4,
  PG_STATUS_RANGE = 5,
  PG_STATUS_CONSISTENCY = 6,
  PG_STATUS_GEOMETRY = 7,
  PG_STATUS_INTEGRATION = 8,
  PG_STATUS_USAGE = 9,
  PG_STATUS_PANIC = 10,
} PgStatus;

/*
 Kernel model for one (α, ρ).
 */
typedef struct PgModel PgModel;

/*
 Integrated Hamiltonian trajectory.
 */
typedef struct PgTrajectory PgTrajectory;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Library version as a static NUL-terminated string.
 */
const char *pg_version(void);

/*
 Copy the last error message of this thread into `buf` (NUL-terminated, truncated to
 `len`). Returns the full message length in bytes, excluding the terminator.

 # Safety
 `buf` must be null or point to `len` writable bytes.
 */
size_t pg_last_error(char *buf, size_t len);

/*
 Create a model for α > −1 and real ρ.

 # Safety
 `out` must be a valid pointer; on success it receives a handle for [`pg_model_free`].
 */
enum PgStatus pg_model_new(double alpha, double rho, struct PgModel **out);

/*
 # Safety
 `model` must be null or a handle from [`pg_model_new`] not yet freed.
 */
void pg_model_free(struct PgModel *model);

/*
 γK(x, y) for x, y > 0 and γ ∈ (0, 1].

 # Safety
 `model` must be a live handle and `out` a valid pointer.
 */
enum PgStatus pg_kernel(const struct PgModel *model, double x, double y, double gamma, double *out);

/*
 F(s) = ln det(I − γK) on (0, s) with an m-node rule, and the change against m/2 nodes.

 # Safety
 `model` must be a live handle; `out_f` must be valid; `out_convergence` may be null.
 */
enum PgStatus pg_log_det(const struct PgModel *model,
                         double s,
                         double gamma,
                         size_t m,
                         double *out_f,
                         double *out_convergence);

/*
 R(s, s), so that dF/ds = −R(s, s).

 # Safety
 `model` must be a live handle and `out` a valid pointer.
 */
enum PgStatus pg_resolvent(const struct PgModel *model,
                           double s,
                           double gamma,
                           size_t m,
                           double *out);

/*
 Mean and variance of the number of points in (0, s) at γ = 1.

 # Safety
 `model` must be a live handle; both out-pointers must be valid.
 */
enum PgStatus pg_counting(const struct PgModel *model,
                          double s,
                          size_t m,
                          double *out_mean,
                          double *out_var);

/*
 Large-s expansion of F.

 # Safety
 `model` must be a live handle and `out` a valid pointer.
 */
enum PgStatus pg_f_asy(const struct PgModel *model, double s, double gamma, double *out);

/*
 Large-s expansion of H = dF/ds, oscillating term included.

 # Safety
 `model` must be a live handle and `out` a valid pointer.
 */
enum PgStatus pg_h_asy(const struct PgModel *model, double s, double gamma, double *out);

/*
 Seed at `s0` and integrate backward to `s1`, recording the `n` abscissae in `samples`.

 # Safety
 `model` must be a live handle, `samples` null (with `n == 0`) or `n` readable doubles,
 and `out` a valid pointer; on success it receives a handle for [`pg_trajectory_free`].
 */
enum PgStatus pg_trajectory_new(const struct PgModel *model,
                                double gamma,
                                double s0,
                                double s1,
                                const double *samples,
                                size_t n,
                                double tolerance,
                                struct PgTrajectory **out);

/*
 # Safety
 `traj` must be null or a handle from [`pg_trajectory_new`] not yet freed.
 */
void pg_trajectory_free(struct PgTrajectory *traj);

/*
 Number of samples, seed included; 0 for a null handle.

 # Safety
 `traj` must be null or a live handle.
 */
size_t pg_trajectory_len(const struct PgTrajectory *traj);

/*
 Sample `i` in decreasing s: abscissa, H, and ∫_s^{s0} H.

 # Safety
 `traj` must be a live handle; the out-pointers must be valid.
 */
enum PgStatus pg_trajectory_sample(const struct PgTrajectory *traj,
                                   size_t i,
                                   double *out_s,
                                   double *out_h,
                                   double *out_integral);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PEARCEY_GAP_H */
