#ifndef SOCP_ALM_H
#define SOCP_ALM_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

#define SOCP_ALM_OK 0

#define SOCP_ALM_ERR_NULL 1

#define SOCP_ALM_ERR_INVALID 2

#define SOCP_ALM_ERR_DIMENSION 3

#define SOCP_ALM_ERR_PARSE 4

#define SOCP_ALM_ERR_NO_SOLUTION 5

#define SOCP_ALM_ERR_NOT_KKT 6

#define SOCP_ALM_ERR_NUMERIC 7

#define SOCP_ALM_ERR_PANIC 8

#define SOCP_ALM_STATUS_CONVERGED 0

#define SOCP_ALM_STATUS_MAX_ITERATIONS 1

#define SOCP_ALM_STATUS_INNER_FAILURE 2

/**
 * Opaque problem handle.
 */
typedef struct SocpAlmProblem SocpAlmProblem;

/**
 * Opaque result of [`socp_alm_solve`].
 */
typedef struct SocpAlmResult SocpAlmResult;

/**
 * Outer-loop settings. `eps_eta <= 0` selects exact subproblem solves.
 */
typedef struct SocpAlmOptions {
  double rho0;
  double rho_bar;
  double rho_growth;
  double rho_max;
  double eps_eta;
  double outer_tol;
  uint32_t max_outer;
} SocpAlmOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message (NUL-terminated, possibly
 * truncated) into `buf` and returns the full message length in bytes.
 * Passing `buf = NULL` only queries the length.
 */
size_t socp_alm_last_error(char *buf, size_t len);

/**
 * Parses a problem description in the JSON format accepted by the CLI.
 */
int32_t socp_alm_problem_from_json(const char *json, struct SocpAlmProblem **out);

/**
 * Built-in problem by name; `params_json` may be NULL.
 */
int32_t socp_alm_problem_builtin(const char *name,
                                 const char *params_json,
                                 struct SocpAlmProblem **out);

/**
 * Quadratic problem `½xᵀPx + qᵀx + c` subject to `Ax + b ∈ Q`, with `P`
 * (`n×n`) and `A` (`(m+1)×n`) row-major.
 */
int32_t socp_alm_problem_quadratic(size_t n,
                                   size_t m,
                                   const double *p,
                                   const double *q,
                                   double c,
                                   const double *a,
                                   const double *b,
                                   struct SocpAlmProblem **out);

void socp_alm_problem_free(struct SocpAlmProblem *p);

/**
 * Writes `n` (primal dimension) and `m` (the cone lives in `R^{m+1}`).
 */
int32_t socp_alm_problem_dims(const struct SocpAlmProblem *p, size_t *n, size_t *m);

/**
 * Projection of `y ∈ R^len` onto the second-order cone (`len ≥ 2`).
 */
int32_t socp_alm_project_q(const double *y, size_t len, double *out);

/**
 * Projection of `y` onto the polar cone `−Q`.
 */
int32_t socp_alm_project_polar(const double *y, size_t len, double *out);

/**
 * KKT residual at `(x, λ)`; `x` has length `n`, `lambda` length `m+1`.
 */
int32_t socp_alm_residual(const struct SocpAlmProblem *p,
                          const double *x,
                          const double *lambda,
                          double *out);

/**
 * Augmented Lagrangian value and, when `grad_x` is non-NULL, its
 * `x`-gradient (length `n`).
 */
int32_t socp_alm_aug_lagrangian(const struct SocpAlmProblem *p,
                                const double *x,
                                const double *lambda,
                                double rho,
                                double *value,
                                double *grad_x);

struct SocpAlmOptions socp_alm_options_default(void);

/**
 * Runs the method from `(x0, lambda0)`; `options` may be NULL for defaults.
 * A run that stops without converging still yields a result; inspect it
 * with [`socp_alm_result_status`].
 */
int32_t socp_alm_solve(const struct SocpAlmProblem *p,
                       const double *x0,
                       const double *lambda0,
                       const struct SocpAlmOptions *options,
                       struct SocpAlmResult **out);

/**
 * One of the `SOCP_ALM_STATUS_*` values, or `-1` for a NULL handle.
 */
int socp_alm_result_status(const struct SocpAlmResult *r);

/**
 * Number of completed outer iterations (0 for a NULL handle).
 */
size_t socp_alm_result_iterations(const struct SocpAlmResult *r);

/**
 * Final KKT residual (NaN for a NULL handle).
 */
double socp_alm_result_sigma(const struct SocpAlmResult *r);

int32_t socp_alm_result_x(const struct SocpAlmResult *r, double *out, size_t len);

int32_t socp_alm_result_lambda(const struct SocpAlmResult *r, double *out, size_t len);

void socp_alm_result_free(struct SocpAlmResult *r);

/**
 * Second-order sufficient condition at `(x, λ)`; pass both pointers NULL to
 * use the problem's known solution. `modulus` may be NULL.
 */
int32_t socp_alm_check_sosc(const struct SocpAlmProblem *p,
                            const double *x,
                            const double *lambda,
                            int *holds,
                            double *modulus);

/**
 * Dual qualification condition at `(x, λ)` (NULL pointers as in
 * [`socp_alm_check_sosc`]). When it fails and `witness` is non-NULL, a unit
 * witness of length `m+1` is written there.
 */
int32_t socp_alm_check_dual_qualification(const struct SocpAlmProblem *p,
                                          const double *x,
                                          const double *lambda,
                                          int *holds,
                                          double *witness);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SOCP_ALM_H */
