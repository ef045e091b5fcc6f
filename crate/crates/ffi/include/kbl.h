#ifndef KBL_H
#define KBL_H

/* Generated with cbindgen:0.26.0 */

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/**
 * Result code of every fallible call.
 */
typedef enum KblStatus {
  KBL_STATUS_OK = 0,
  KBL_STATUS_NULL_POINTER = 1,
  KBL_STATUS_CONFIG = 2,
  KBL_STATUS_DOMAIN = 3,
  KBL_STATUS_GRID_MISMATCH = 4,
  KBL_STATUS_RANGE = 5,
  KBL_STATUS_RESOLUTION = 6,
  KBL_STATUS_NUMERICAL = 7,
  KBL_STATUS_CERT_FAIL = 8,
  KBL_STATUS_SIZE_GUARD = 9,
  KBL_STATUS_IO = 10,
  /**
   * Caller buffer shorter than the required length.
   */
  KBL_STATUS_BUFFER_TOO_SMALL = 11,
  /**
   * Internal panic caught at the boundary.
   */
  KBL_STATUS_PANIC = 12,
} KblStatus;

/**
 * Spectral basis of `-d²/dx² + V` with Neumann conditions.
 */
typedef struct KblBasis KblBasis;

/**
 * Validity data of one series evaluation.
 */
typedef struct KblCertificate {
  double t;
  bool valid;
  /**
   * True when the series is certified for every `t >= 0`; `threshold` is
   * then `-INFINITY`.
   */
  bool always_valid;
  double threshold;
  bool in_omega;
  double k_tilde;
  double k_bound;
  double eps;
  bool absolutely_convergent;
  double tail_bound;
  uint64_t terms;
  bool unsafe_override;
} KblCertificate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL after a success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *kbl_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *kbl_version(void);

/**
 * Solves for the lowest `modes` eigenpairs of the potential sampled at
 * `n_points` uniform nodes of [0,1] (`n_points` odd, `modes <= n_points/4`).
 *
 * # Safety
 * `potential` must point to `n_points` readable doubles; `out` must be a
 * valid pointer to a handle slot.
 */
enum KblStatus kbl_basis_new(const double *potential,
                             size_t n_points,
                             size_t modes,
                             struct KblBasis **out);

/**
 * Releases a basis. NULL is ignored.
 *
 * # Safety
 * `basis` must come from [`kbl_basis_new`] and not have been freed.
 */
void kbl_basis_free(struct KblBasis *basis);

/**
 * Number of grid nodes, 0 for NULL.
 *
 * # Safety
 * `basis` must be NULL or a live handle.
 */
size_t kbl_basis_n_points(const struct KblBasis *basis);

/**
 * Number of retained modes, 0 for NULL.
 *
 * # Safety
 * `basis` must be NULL or a live handle.
 */
size_t kbl_basis_count(const struct KblBasis *basis);

/**
 * Copies the eigenvalues `mu_0 < mu_1 < ...` into `out[0..len)`.
 *
 * # Safety
 * `out` must point to `len` writable doubles.
 */
enum KblStatus kbl_basis_eigenvalues(const struct KblBasis *basis, double *out, size_t len);

/**
 * Copies the L²-normalized mode `e_n` (n_points samples).
 *
 * # Safety
 * `out` must point to `n_points` writable doubles.
 */
enum KblStatus kbl_basis_mode(const struct KblBasis *basis, size_t n, double *out);

/**
 * Spectral gap `mu_1 - mu_0`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum KblStatus kbl_basis_gap(const struct KblBasis *basis, double *out);

/**
 * Hopf transform: Burgers state `u` to the positive unit-mass heat state.
 *
 * # Safety
 * `u` and `out` must each hold `n_points` doubles.
 */
enum KblStatus kbl_hopf(size_t n_points, const double *u, double *out);

/**
 * Cole transform `-2 v'/v` of a strictly positive state.
 *
 * # Safety
 * `v` and `out` must each hold `n_points` doubles.
 */
enum KblStatus kbl_cole(size_t n_points, const double *v, double *out);

/**
 * Linear heat flow `e^{-tA} v0`.
 *
 * # Safety
 * `v0` and `out` must each hold `n_points` doubles of the basis grid.
 */
enum KblStatus kbl_heat_flow(const struct KblBasis *basis, const double *v0, double t, double *out);

/**
 * Nonlinear heat flow of a positive unit-mass state.
 *
 * # Safety
 * `v0` and `out` must each hold `n_points` doubles of the basis grid.
 */
enum KblStatus kbl_nonlinear_heat_flow(const struct KblBasis *basis,
                                       const double *v0,
                                       double t,
                                       double *out);

/**
 * Burgers flow through the Cole-Hopf conjugacy.
 *
 * # Safety
 * `u0` and `out` must each hold `n_points` doubles of the basis grid.
 */
enum KblStatus kbl_burgers_flow(const struct KblBasis *basis,
                                const double *u0,
                                double t,
                                double *out);

/**
 * Blow-up time of the nonlinear heat flow for a positive state of mass
 * greater than one. `*blew_up` is false, and `*t_star` the horizon, when
 * no blow-up happens before `horizon`.
 *
 * # Safety
 * `v0` must hold `n_points` doubles; the out pointers must be valid.
 */
enum KblStatus kbl_blowup_time(const struct KblBasis *basis,
                               const double *v0,
                               double horizon,
                               double *t_star,
                               bool *blew_up);

/**
 * Truncated Koopman decomposition of the nonlinear heat flow at time `t`
 * (modes `0..=max_mode`, products up to order `max_order`). Returns
 * `CertFail` when `t` is not certified, unless `allow_uncertified`.
 * `cert` may be NULL.
 *
 * # Safety
 * `v0` and `out` must each hold `n_points` doubles of the basis grid.
 */
enum KblStatus kbl_heat_series(const struct KblBasis *basis,
                               const double *v0,
                               double t,
                               size_t max_mode,
                               size_t max_order,
                               bool allow_uncertified,
                               double *out,
                               struct KblCertificate *cert);

/**
 * Truncated Koopman decomposition of the Burgers flow at time `t`; see
 * [`kbl_heat_series`].
 *
 * # Safety
 * `u0` and `out` must each hold `n_points` doubles of the basis grid.
 */
enum KblStatus kbl_burgers_series(const struct KblBasis *basis,
                                  const double *u0,
                                  double t,
                                  size_t max_mode,
                                  size_t max_order,
                                  bool allow_uncertified,
                                  double *out,
                                  struct KblCertificate *cert);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* KBL_H */
