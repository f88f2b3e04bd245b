#ifndef SERRIN_H
#define SERRIN_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SerrinStatus {
  SERRIN_STATUS_OK = 0,
  SERRIN_STATUS_NULL_POINTER = 1,
  SERRIN_STATUS_INVALID_ARGUMENT = 2,
  SERRIN_STATUS_GEOMETRY = 3,
  SERRIN_STATUS_RESOLUTION_TOO_LOW = 4,
  SERRIN_STATUS_NOT_CRITICAL = 5,
  SERRIN_STATUS_DEGENERATE = 6,
  SERRIN_STATUS_SINGULAR_SYSTEM = 7,
  SERRIN_STATUS_NO_CONVERGENCE = 8,
  SERRIN_STATUS_BUFFER_TOO_SMALL = 9,
  SERRIN_STATUS_PANIC = 10,
} SerrinStatus;

/**
 * Boundary and inclusion description.
 */
typedef struct SerrinGeometry SerrinGeometry;

/**
 * Dense linearized operator on Fourier coefficients.
 */
typedef struct SerrinOperator SerrinOperator;

/**
 * Solved state `u` on a geometry with a given conductivity and resolution.
 */
typedef struct SerrinSolution SerrinSolution;

/**
 * Perturbation parameters for [`serrin_branch_solve`].
 */
typedef struct SerrinParameters {
  const double *phi;
  size_t phi_len;
  const double *f;
  size_t f_len;
  double s;
  double eta[2];
} SerrinParameters;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *serrin_version(void);

/**
 * Copies the calling thread's last error message into `buf` (NUL
 * terminated, truncated to `cap`). Returns the full message length, or 0
 * if the last call succeeded.
 *
 * # Safety
 * `buf` must be null or valid for `cap` bytes.
 */
size_t serrin_last_error_message(char *buf, size_t cap);

/**
 * Creates a geometry: outer radius `1 + xi(θ)`, inclusion radius
 * `rho + phi(θ)`.
 *
 * # Safety
 * `xi`/`phi` must be valid for their lengths (or null with length 0) and
 * `out` must be a valid pointer.
 */
enum SerrinStatus serrin_geometry_new(double rho,
                                      const double *xi,
                                      size_t xi_len,
                                      const double *phi,
                                      size_t phi_len,
                                      struct SerrinGeometry **out);

/**
 * # Safety
 * `geom` must be null or a handle from [`serrin_geometry_new`] not yet freed.
 */
void serrin_geometry_free(struct SerrinGeometry *geom);

/**
 * Area of the domain.
 *
 * # Safety
 * `geom` must be a live handle and `area` a valid pointer.
 */
enum SerrinStatus serrin_geometry_area(const struct SerrinGeometry *geom, double *area);

/**
 * Solves the state equation with inclusion conductivity `sigma_c + s` at
 * Fourier cutoff `modes`.
 *
 * # Safety
 * `geom` must be a live handle and `out` a valid pointer.
 */
enum SerrinStatus serrin_solve(const struct SerrinGeometry *geom,
                               double sigma_c,
                               double s,
                               size_t modes,
                               struct SerrinSolution **out);

/**
 * # Safety
 * `sol` must be null or a handle from [`serrin_solve`] not yet freed.
 */
void serrin_solution_free(struct SerrinSolution *sol);

/**
 * Mean `|∂ₙu|` on the outer boundary and its largest relative deviation.
 *
 * # Safety
 * `sol` must be a live handle; the outputs must be valid pointers.
 */
enum SerrinStatus serrin_solution_criticality(const struct SerrinSolution *sol,
                                              double *c,
                                              double *relative_defect);

/**
 * Assembles `Γ` at a solved state.
 *
 * # Safety
 * `sol` must be a live handle and `out` a valid pointer.
 */
enum SerrinStatus serrin_assemble_gamma(const struct SerrinSolution *sol,
                                        struct SerrinOperator **out);

/**
 * Assembles `Q = -2cΓ`; fails with `NOT_CRITICAL` off critical states.
 *
 * # Safety
 * `sol` must be a live handle and `out` a valid pointer.
 */
enum SerrinStatus serrin_assemble_q(const struct SerrinSolution *sol, struct SerrinOperator **out);

/**
 * # Safety
 * `op` must be null or an operator handle not yet freed.
 */
void serrin_operator_free(struct SerrinOperator *op);

/**
 * Side length of the operator matrix, or 0 for a null handle.
 *
 * # Safety
 * `op` must be null or a live handle.
 */
size_t serrin_operator_dim(const struct SerrinOperator *op);

/**
 * Copies the matrix in row-major order. `len` receives the required size
 * even when the buffer is too small.
 *
 * # Safety
 * `op` must be a live handle, `out` valid for `cap` doubles and `len`
 * null or valid.
 */
enum SerrinStatus serrin_operator_matrix(const struct SerrinOperator *op,
                                         double *out,
                                         size_t cap,
                                         size_t *len);

/**
 * Copies the singular values in descending order.
 *
 * # Safety
 * As for [`serrin_operator_matrix`].
 */
enum SerrinStatus serrin_operator_singular_values(const struct SerrinOperator *op,
                                                  double *out,
                                                  size_t cap,
                                                  size_t *len);

/**
 * Solves `x = op⁻¹ rhs` for a coefficient vector of length `dim`.
 *
 * # Safety
 * `op` must be a live handle, `rhs` and `out` valid for `dim` doubles.
 */
enum SerrinStatus serrin_operator_solve(const struct SerrinOperator *op,
                                        const double *rhs,
                                        double *out,
                                        size_t dim);

/**
 * Solves for the outer-boundary correction `ξ` at parameters `params`
 * from the critical base `(geom, sigma_c)`. With `projected` nonzero the
 * base must be the one-phase disk and `ξ` is sought without translation
 * modes. `xi_out` receives `2 * modes + 1` coefficients and `residual`
 * (if non-null) the final residual norm.
 *
 * # Safety
 * `geom` must be a live handle, `params` valid with arrays valid for their
 * lengths, `xi_out` valid for `cap` doubles; `residual` may be null.
 */
enum SerrinStatus serrin_branch_solve(const struct SerrinGeometry *geom,
                                      double sigma_c,
                                      size_t modes,
                                      const struct SerrinParameters *params,
                                      int32_t projected,
                                      double *xi_out,
                                      size_t cap,
                                      double *residual);

/**
 * Closed-form diagonal entry of `Γ` on mode `k` at the concentric base.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum SerrinStatus serrin_gamma_mode(size_t k, double rho, double sigma_c, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SERRIN_H */
