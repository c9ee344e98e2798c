#ifndef NETFAULT_H
#define NETFAULT_H

/* Generated by cbindgen from the netfault-ffi crate; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code returned by every fallible entry point; `NF_STATUS_OK` is 0.
 */
typedef enum NfStatus {
  /**
   * The call succeeded.
   */
  NF_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  NF_STATUS_NULL_ARGUMENT = 1,
  /**
   * An argument was out of range or inconsistent (see the error message).
   */
  NF_STATUS_INVALID_ARGUMENT = 2,
  /**
   * A buffer length did not match the expected dimension.
   */
  NF_STATUS_DIMENSION_MISMATCH = 3,
  /**
   * The numeric routine failed (infeasible constraint, solver error, ...).
   */
  NF_STATUS_NUMERIC_FAILURE = 4,
  /**
   * An internal invariant was violated; the handle state is unspecified.
   */
  NF_STATUS_INTERNAL = 5,
} NfStatus;

/**
 * Opaque recursive estimator bound to one plant model.
 */
typedef struct NfEstimator NfEstimator;

/**
 * Opaque network model: agent dynamics on a sensing graph.
 */
typedef struct NfPlant NfPlant;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on the calling thread.
 *
 * The pointer stays valid until the next failing call on the same thread.
 * Returns an empty string when no failure has been recorded.
 */
const char *nf_last_error_message(void);

/**
 * Library version as a static `major.minor.patch` string.
 */
const char *nf_version(void);

/**
 * Creates a plant whose agents hold `per_node_dim` integrator states each.
 *
 * Edges are directed sensing links: entry `i` of the tail/head arrays is an
 * edge whose head node measures `x_tail - x_head`. Node ids are 1-based.
 *
 * # Safety
 * `edge_tails` and `edge_heads` must point to `edge_count` readable
 * elements (or be null when `edge_count` is 0); `out` must be writable.
 */
enum NfStatus nf_plant_new_integrator(size_t node_count,
                                      const size_t *edge_tails,
                                      const size_t *edge_heads,
                                      size_t edge_count,
                                      size_t per_node_dim,
                                      struct NfPlant **out);

/**
 * Creates a plant of planar double integrators discretized with step `dt`
 * (four states per node: two positions, then two velocities).
 *
 * # Safety
 * Same pointer contract as [`nf_plant_new_integrator`].
 */
enum NfStatus nf_plant_new_double_integrator(size_t node_count,
                                             const size_t *edge_tails,
                                             const size_t *edge_heads,
                                             size_t edge_count,
                                             double dt,
                                             struct NfPlant **out);

/**
 * Releases a plant handle; null is a no-op.
 *
 * # Safety
 * `plant` must be null or a handle from a `nf_plant_new_*` constructor that
 * has not been freed yet.
 */
void nf_plant_free(struct NfPlant *plant);

/**
 * Number of agents, or 0 for a null handle.
 *
 * # Safety
 * `plant` must be null or a live plant handle.
 */
size_t nf_plant_node_count(const struct NfPlant *plant);

/**
 * Total stacked state dimension, or 0 for a null handle.
 *
 * # Safety
 * `plant` must be null or a live plant handle.
 */
size_t nf_plant_state_dim(const struct NfPlant *plant);

/**
 * Total stacked input dimension, or 0 for a null handle.
 *
 * # Safety
 * `plant` must be null or a live plant handle.
 */
size_t nf_plant_input_dim(const struct NfPlant *plant);

/**
 * Measurement vector length under the given leader mode, or 0 for null.
 *
 * # Safety
 * `plant` must be null or a live plant handle.
 */
size_t nf_plant_measurement_dim(const struct NfPlant *plant, int leader_active);

/**
 * Evaluates the stacked measurement `y = C x` for the given mode.
 *
 * # Safety
 * `x` must hold `nf_plant_state_dim` readable elements and `y_out` must
 * have room for `nf_plant_measurement_dim(plant, leader_active)` elements.
 */
enum NfStatus nf_plant_measure(const struct NfPlant *plant,
                               const double *x,
                               size_t x_len,
                               int leader_active,
                               double *y_out);

/**
 * Creates the sparse (l1) estimator. The carried estimate starts at zero.
 *
 * # Safety
 * `plant` must be a live plant handle and `out` writable. The estimator
 * copies the model, so the plant may be freed independently.
 */
enum NfStatus nf_estimator_new_l1(const struct NfPlant *plant, struct NfEstimator **out);

/**
 * Creates the sparse estimator variant for measurements carrying bounded
 * entrywise noise of size `w_max` (`w_max = 0` behaves like the exact one).
 *
 * # Safety
 * Same contract as [`nf_estimator_new_l1`].
 */
enum NfStatus nf_estimator_new_l1_denoise(const struct NfPlant *plant,
                                          double w_max,
                                          struct NfEstimator **out);

/**
 * Creates the fixed-gain Kalman baseline with the given diagonal state and
 * measurement covariance scales (both must be positive).
 *
 * # Safety
 * Same contract as [`nf_estimator_new_l1`].
 */
enum NfStatus nf_estimator_new_kalman(const struct NfPlant *plant,
                                      double p_scale,
                                      double v_scale,
                                      struct NfEstimator **out);

/**
 * Releases an estimator handle; null is a no-op.
 *
 * # Safety
 * `est` must be null or a live estimator handle not freed yet.
 */
void nf_estimator_free(struct NfEstimator *est);

/**
 * Overwrites the carried state estimate (length must equal the state dim).
 *
 * # Safety
 * `est` must be a live estimator handle; `x` must hold `x_len` elements.
 */
enum NfStatus nf_estimator_set_state(struct NfEstimator *est, const double *x, size_t x_len);

/**
 * Copies the carried state estimate into `x_out`.
 *
 * # Safety
 * `est` must be a live estimator handle; `x_out` must have room for
 * `x_len == nf_plant_state_dim` elements.
 */
enum NfStatus nf_estimator_state(const struct NfEstimator *est, double *x_out, size_t x_len);

/**
 * Advances one step on measurement `y` taken under the given leader mode,
 * with previous input `u_prev` (pass null for zero input). Writes the new
 * state estimate and, optionally, the fault estimate `x_hat - prior`.
 *
 * # Safety
 * `est` must be a live estimator handle. `y` must hold `y_len` elements
 * matching the mode's measurement dimension; `u_prev` must be null or hold
 * `u_len` elements matching the input dimension; `x_hat_out` must have room
 * for the state dimension, and `f_hat_out` must be null or the same size.
 */
enum NfStatus nf_estimator_step(struct NfEstimator *est,
                                const double *y,
                                size_t y_len,
                                const double *u_prev,
                                size_t u_len,
                                int leader_active,
                                double *x_hat_out,
                                double *f_hat_out);

/**
 * Decides whether faults supported on the given node set are exactly
 * recoverable from one measurement under the given leader mode; writes 1
 * (recoverable) or 0. `faulty` lists 1-based node ids.
 *
 * # Safety
 * `faulty` must hold `faulty_len` elements (or be null when empty);
 * `recoverable_out` must be writable.
 */
enum NfStatus nf_recovery_check(size_t node_count,
                                size_t per_node_dim,
                                const size_t *faulty,
                                size_t faulty_len,
                                int leader_active,
                                int *recoverable_out);

/**
 * Worst-case l1 fault-estimate error bound for one step with `fault_count`
 * of `node_count` nodes faulty, dynamics gain `eta` (the sum of the
 * absolute entries of the stacked state matrix) and carried-estimate error
 * at most `d_max`. Also writes the factor by which the worst-case state
 * error can grow across the step. Fails when `2 * fault_count >=
 * node_count`, where no bound exists.
 *
 * # Safety
 * `fault_bound_out` and `growth_factor_out` must be writable or null
 * (null skips that output).
 */
enum NfStatus nf_fault_error_bound(size_t node_count,
                                   size_t fault_count,
                                   double eta,
                                   double d_max,
                                   double *fault_bound_out,
                                   double *growth_factor_out);

/**
 * Solves `min ||z - shift||_1` subject to `A z = b` (when `ball_radius <
 * 0`) or `||A z - b||_2 <= ball_radius` (when nonnegative). `a` is dense
 * row-major with `rows * cols` entries; `shift` may be null for zero.
 * Writes the minimizer into `z_out` (`cols` entries) and, when non-null,
 * the objective value into `objective_out`.
 *
 * # Safety
 * `a`, `b`, `shift` (if non-null) and `z_out` must match the documented
 * lengths; `objective_out` must be writable or null.
 */
enum NfStatus nf_solve_bp(size_t rows,
                          size_t cols,
                          const double *a,
                          const double *b,
                          const double *shift,
                          double ball_radius,
                          double *z_out,
                          double *objective_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NETFAULT_H */
