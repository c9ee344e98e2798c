//! C ABI for the netfault estimation library.
//!
//! The surface follows common C conventions:
//!
//! - every fallible call returns an [`NfStatus`] code and writes results
//!   through out-pointers;
//! - `NF_STATUS_OK` is zero, so `if (nf_...(...))` reads as "if it failed";
//! - on failure, [`nf_last_error_message`] returns a human-readable message
//!   for the most recent error on the calling thread;
//! - handles ([`NfPlant`], [`NfEstimator`]) are opaque, created by `*_new`
//!   constructors and released by the matching `*_free` (which accepts null);
//! - matrices cross the boundary as dense row-major `double` buffers, and
//!   node ids are 1-based, matching the library's conventions;
//! - the leader mode crosses as an `int` flag: nonzero means the leader's
//!   absolute measurement is present ("active"), zero means followers only
//!   see relative differences.
//!
//! Every entry point catches panics and converts them into
//! `NF_STATUS_INTERNAL`, so no unwinding ever crosses the ABI.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::slice;

use nalgebra::{DMatrix, DVector};
use netfault::analysis::{fault_error_bound, nsp_check_structured};
use netfault::estimator::{Estimator, EstimatorKind};
use netfault::graph::Graph;
use netfault::plant::{AgentDynamics, LeaderMode, NetworkPlant};
use netfault::solver::{solve_bp, BpConstraint, BpProblem, SolverConfig};

/// Status code returned by every fallible entry point; `NF_STATUS_OK` is 0.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NfStatus {
    /// The call succeeded.
    NfStatusOk = 0,
    /// A required pointer argument was null.
    NfStatusNullArgument = 1,
    /// An argument was out of range or inconsistent (see the error message).
    NfStatusInvalidArgument = 2,
    /// A buffer length did not match the expected dimension.
    NfStatusDimensionMismatch = 3,
    /// The numeric routine failed (infeasible constraint, solver error, ...).
    NfStatusNumericFailure = 4,
    /// An internal invariant was violated; the handle state is unspecified.
    NfStatusInternal = 5,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn fail(status: NfStatus, message: impl AsRef<str>) -> NfStatus {
    let sanitized: String = message
        .as_ref()
        .chars()
        .map(|c| if c == '\0' { ' ' } else { c })
        .collect();
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
    status
}

/// Message for the most recent failure on the calling thread.
///
/// The pointer stays valid until the next failing call on the same thread.
/// Returns an empty string when no failure has been recorded.
#[no_mangle]
pub extern "C" fn nf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Library version as a static `major.minor.patch` string.
#[no_mangle]
pub extern "C" fn nf_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr().cast()
}

/// Runs `body` with panics converted to `NF_STATUS_INTERNAL`.
fn guarded(body: impl FnOnce() -> NfStatus) -> NfStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => fail(NfStatus::NfStatusInternal, "internal panic"),
    }
}

/// Reads a C array; null is accepted only for empty arrays.
unsafe fn read_f64<'a>(ptr: *const f64, len: usize) -> Result<&'a [f64], NfStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(fail(NfStatus::NfStatusNullArgument, "null array argument"));
    }
    Ok(slice::from_raw_parts(ptr, len))
}

unsafe fn read_usize<'a>(ptr: *const usize, len: usize) -> Result<&'a [usize], NfStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(fail(NfStatus::NfStatusNullArgument, "null array argument"));
    }
    Ok(slice::from_raw_parts(ptr, len))
}

unsafe fn write_vector(out: *mut f64, v: &DVector<f64>) -> Result<(), NfStatus> {
    if out.is_null() {
        return Err(fail(NfStatus::NfStatusNullArgument, "null output buffer"));
    }
    slice::from_raw_parts_mut(out, v.len()).copy_from_slice(v.as_slice());
    Ok(())
}

fn mode_from_flag(leader_active: c_int) -> LeaderMode {
    if leader_active != 0 {
        LeaderMode::Active
    } else {
        LeaderMode::NonActive
    }
}

// ---------------------------------------------------------------------------
// Plant handles
// ---------------------------------------------------------------------------

/// Opaque network model: agent dynamics on a sensing graph.
pub struct NfPlant {
    inner: NetworkPlant,
}

unsafe fn build_plant(
    node_count: usize,
    edge_tails: *const usize,
    edge_heads: *const usize,
    edge_count: usize,
    agent: AgentDynamics,
    out: *mut *mut NfPlant,
) -> NfStatus {
    if out.is_null() {
        return fail(NfStatus::NfStatusNullArgument, "null output handle");
    }
    let tails = match read_usize(edge_tails, edge_count) {
        Ok(s) => s,
        Err(e) => return e,
    };
    let heads = match read_usize(edge_heads, edge_count) {
        Ok(s) => s,
        Err(e) => return e,
    };
    let edges: Vec<(usize, usize)> = tails.iter().copied().zip(heads.iter().copied()).collect();
    let graph = match Graph::new(node_count, &edges) {
        Ok(g) => g,
        Err(e) => return fail(NfStatus::NfStatusInvalidArgument, e.to_string()),
    };
    match NetworkPlant::homogeneous(graph, agent) {
        Ok(plant) => {
            *out = Box::into_raw(Box::new(NfPlant { inner: plant }));
            NfStatus::NfStatusOk
        }
        Err(e) => fail(NfStatus::NfStatusInvalidArgument, e.to_string()),
    }
}

/// Creates a plant whose agents hold `per_node_dim` integrator states each.
///
/// Edges are directed sensing links: entry `i` of the tail/head arrays is an
/// edge whose head node measures `x_tail - x_head`. Node ids are 1-based.
///
/// # Safety
/// `edge_tails` and `edge_heads` must point to `edge_count` readable
/// elements (or be null when `edge_count` is 0); `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nf_plant_new_integrator(
    node_count: usize,
    edge_tails: *const usize,
    edge_heads: *const usize,
    edge_count: usize,
    per_node_dim: usize,
    out: *mut *mut NfPlant,
) -> NfStatus {
    guarded(|| {
        if per_node_dim == 0 {
            return fail(
                NfStatus::NfStatusInvalidArgument,
                "per_node_dim must be at least 1",
            );
        }
        build_plant(
            node_count,
            edge_tails,
            edge_heads,
            edge_count,
            AgentDynamics::integrator(per_node_dim),
            out,
        )
    })
}

/// Creates a plant of planar double integrators discretized with step `dt`
/// (four states per node: two positions, then two velocities).
///
/// # Safety
/// Same pointer contract as [`nf_plant_new_integrator`].
#[no_mangle]
pub unsafe extern "C" fn nf_plant_new_double_integrator(
    node_count: usize,
    edge_tails: *const usize,
    edge_heads: *const usize,
    edge_count: usize,
    dt: f64,
    out: *mut *mut NfPlant,
) -> NfStatus {
    guarded(|| {
        if !(dt > 0.0) {
            return fail(NfStatus::NfStatusInvalidArgument, "dt must be positive");
        }
        build_plant(
            node_count,
            edge_tails,
            edge_heads,
            edge_count,
            AgentDynamics::double_integrator_zoh(dt),
            out,
        )
    })
}

/// Releases a plant handle; null is a no-op.
///
/// # Safety
/// `plant` must be null or a handle from a `nf_plant_new_*` constructor that
/// has not been freed yet.
#[no_mangle]
pub unsafe extern "C" fn nf_plant_free(plant: *mut NfPlant) {
    if !plant.is_null() {
        drop(Box::from_raw(plant));
    }
}

/// Number of agents, or 0 for a null handle.
///
/// # Safety
/// `plant` must be null or a live plant handle.
#[no_mangle]
pub unsafe extern "C" fn nf_plant_node_count(plant: *const NfPlant) -> usize {
    plant.as_ref().map_or(0, |p| p.inner.node_count())
}

/// Total stacked state dimension, or 0 for a null handle.
///
/// # Safety
/// `plant` must be null or a live plant handle.
#[no_mangle]
pub unsafe extern "C" fn nf_plant_state_dim(plant: *const NfPlant) -> usize {
    plant.as_ref().map_or(0, |p| p.inner.state_dim())
}

/// Total stacked input dimension, or 0 for a null handle.
///
/// # Safety
/// `plant` must be null or a live plant handle.
#[no_mangle]
pub unsafe extern "C" fn nf_plant_input_dim(plant: *const NfPlant) -> usize {
    plant.as_ref().map_or(0, |p| p.inner.input_dim())
}

/// Measurement vector length under the given leader mode, or 0 for null.
///
/// # Safety
/// `plant` must be null or a live plant handle.
#[no_mangle]
pub unsafe extern "C" fn nf_plant_measurement_dim(
    plant: *const NfPlant,
    leader_active: c_int,
) -> usize {
    plant
        .as_ref()
        .map_or(0, |p| p.inner.measurement_dim(mode_from_flag(leader_active)))
}

/// Evaluates the stacked measurement `y = C x` for the given mode.
///
/// # Safety
/// `x` must hold `nf_plant_state_dim` readable elements and `y_out` must
/// have room for `nf_plant_measurement_dim(plant, leader_active)` elements.
#[no_mangle]
pub unsafe extern "C" fn nf_plant_measure(
    plant: *const NfPlant,
    x: *const f64,
    x_len: usize,
    leader_active: c_int,
    y_out: *mut f64,
) -> NfStatus {
    guarded(|| {
        let Some(p) = plant.as_ref() else {
            return fail(NfStatus::NfStatusNullArgument, "null plant handle");
        };
        if x_len != p.inner.state_dim() {
            return fail(
                NfStatus::NfStatusDimensionMismatch,
                format!("x has {} entries, expected {}", x_len, p.inner.state_dim()),
            );
        }
        let xs = match read_f64(x, x_len) {
            Ok(s) => s,
            Err(e) => return e,
        };
        let xv = DVector::from_column_slice(xs);
        match p.inner.measure(&xv, mode_from_flag(leader_active)) {
            Ok(y) => match write_vector(y_out, &y) {
                Ok(()) => NfStatus::NfStatusOk,
                Err(e) => e,
            },
            Err(e) => fail(NfStatus::NfStatusNumericFailure, e.to_string()),
        }
    })
}

// ---------------------------------------------------------------------------
// Estimator handles
// ---------------------------------------------------------------------------

/// Opaque recursive estimator bound to one plant model.
pub struct NfEstimator {
    plant: NetworkPlant,
    inner: Estimator,
}

unsafe fn build_estimator(
    plant: *const NfPlant,
    kind: EstimatorKind,
    out: *mut *mut NfEstimator,
) -> NfStatus {
    if out.is_null() {
        return fail(NfStatus::NfStatusNullArgument, "null output handle");
    }
    let Some(p) = plant.as_ref() else {
        return fail(NfStatus::NfStatusNullArgument, "null plant handle");
    };
    let model = p.inner.clone();
    let estimator = Estimator::new(kind, SolverConfig::default(), model.state_dim());
    *out = Box::into_raw(Box::new(NfEstimator {
        plant: model,
        inner: estimator,
    }));
    NfStatus::NfStatusOk
}

/// Creates the sparse (l1) estimator. The carried estimate starts at zero.
///
/// # Safety
/// `plant` must be a live plant handle and `out` writable. The estimator
/// copies the model, so the plant may be freed independently.
#[no_mangle]
pub unsafe extern "C" fn nf_estimator_new_l1(
    plant: *const NfPlant,
    out: *mut *mut NfEstimator,
) -> NfStatus {
    guarded(|| build_estimator(plant, EstimatorKind::L1, out))
}

/// Creates the sparse estimator variant for measurements carrying bounded
/// entrywise noise of size `w_max` (`w_max = 0` behaves like the exact one).
///
/// # Safety
/// Same contract as [`nf_estimator_new_l1`].
#[no_mangle]
pub unsafe extern "C" fn nf_estimator_new_l1_denoise(
    plant: *const NfPlant,
    w_max: f64,
    out: *mut *mut NfEstimator,
) -> NfStatus {
    guarded(|| {
        if !(w_max >= 0.0) {
            return fail(
                NfStatus::NfStatusInvalidArgument,
                "w_max must be nonnegative",
            );
        }
        build_estimator(plant, EstimatorKind::L1Denoise { w_max }, out)
    })
}

/// Creates the fixed-gain Kalman baseline with the given diagonal state and
/// measurement covariance scales (both must be positive).
///
/// # Safety
/// Same contract as [`nf_estimator_new_l1`].
#[no_mangle]
pub unsafe extern "C" fn nf_estimator_new_kalman(
    plant: *const NfPlant,
    p_scale: f64,
    v_scale: f64,
    out: *mut *mut NfEstimator,
) -> NfStatus {
    guarded(|| {
        if !(p_scale > 0.0) || !(v_scale > 0.0) {
            return fail(
                NfStatus::NfStatusInvalidArgument,
                "covariance scales must be positive",
            );
        }
        build_estimator(plant, EstimatorKind::Kalman { p_scale, v_scale }, out)
    })
}

/// Releases an estimator handle; null is a no-op.
///
/// # Safety
/// `est` must be null or a live estimator handle not freed yet.
#[no_mangle]
pub unsafe extern "C" fn nf_estimator_free(est: *mut NfEstimator) {
    if !est.is_null() {
        drop(Box::from_raw(est));
    }
}

/// Overwrites the carried state estimate (length must equal the state dim).
///
/// # Safety
/// `est` must be a live estimator handle; `x` must hold `x_len` elements.
#[no_mangle]
pub unsafe extern "C" fn nf_estimator_set_state(
    est: *mut NfEstimator,
    x: *const f64,
    x_len: usize,
) -> NfStatus {
    guarded(|| {
        let Some(e) = est.as_mut() else {
            return fail(NfStatus::NfStatusNullArgument, "null estimator handle");
        };
        if x_len != e.plant.state_dim() {
            return fail(
                NfStatus::NfStatusDimensionMismatch,
                format!(
                    "x has {} entries, expected {}",
                    x_len,
                    e.plant.state_dim()
                ),
            );
        }
        let xs = match read_f64(x, x_len) {
            Ok(s) => s,
            Err(err) => return err,
        };
        e.inner.set_state_estimate(DVector::from_column_slice(xs));
        NfStatus::NfStatusOk
    })
}

/// Copies the carried state estimate into `x_out`.
///
/// # Safety
/// `est` must be a live estimator handle; `x_out` must have room for
/// `x_len == nf_plant_state_dim` elements.
#[no_mangle]
pub unsafe extern "C" fn nf_estimator_state(
    est: *const NfEstimator,
    x_out: *mut f64,
    x_len: usize,
) -> NfStatus {
    guarded(|| {
        let Some(e) = est.as_ref() else {
            return fail(NfStatus::NfStatusNullArgument, "null estimator handle");
        };
        if x_len != e.plant.state_dim() {
            return fail(
                NfStatus::NfStatusDimensionMismatch,
                format!(
                    "buffer has {} entries, expected {}",
                    x_len,
                    e.plant.state_dim()
                ),
            );
        }
        match write_vector(x_out, e.inner.state_estimate()) {
            Ok(()) => NfStatus::NfStatusOk,
            Err(err) => err,
        }
    })
}

/// Advances one step on measurement `y` taken under the given leader mode,
/// with previous input `u_prev` (pass null for zero input). Writes the new
/// state estimate and, optionally, the fault estimate `x_hat - prior`.
///
/// # Safety
/// `est` must be a live estimator handle. `y` must hold `y_len` elements
/// matching the mode's measurement dimension; `u_prev` must be null or hold
/// `u_len` elements matching the input dimension; `x_hat_out` must have room
/// for the state dimension, and `f_hat_out` must be null or the same size.
#[no_mangle]
pub unsafe extern "C" fn nf_estimator_step(
    est: *mut NfEstimator,
    y: *const f64,
    y_len: usize,
    u_prev: *const f64,
    u_len: usize,
    leader_active: c_int,
    x_hat_out: *mut f64,
    f_hat_out: *mut f64,
) -> NfStatus {
    guarded(|| {
        let Some(e) = est.as_mut() else {
            return fail(NfStatus::NfStatusNullArgument, "null estimator handle");
        };
        let mode = mode_from_flag(leader_active);
        let expected_y = e.plant.measurement_dim(mode);
        if y_len != expected_y {
            return fail(
                NfStatus::NfStatusDimensionMismatch,
                format!("y has {y_len} entries, expected {expected_y}"),
            );
        }
        let ys = match read_f64(y, y_len) {
            Ok(s) => s,
            Err(err) => return err,
        };
        let u = if u_prev.is_null() {
            DVector::zeros(e.plant.input_dim())
        } else {
            if u_len != e.plant.input_dim() {
                return fail(
                    NfStatus::NfStatusDimensionMismatch,
                    format!(
                        "u_prev has {} entries, expected {}",
                        u_len,
                        e.plant.input_dim()
                    ),
                );
            }
            let us = match read_f64(u_prev, u_len) {
                Ok(s) => s,
                Err(err) => return err,
            };
            DVector::from_column_slice(us)
        };
        let yv = DVector::from_column_slice(ys);
        match e.inner.step(&e.plant, &yv, &u, mode) {
            Ok(step) => {
                if let Err(err) = write_vector(x_hat_out, &step.x_hat) {
                    return err;
                }
                if !f_hat_out.is_null() {
                    if let Err(err) = write_vector(f_hat_out, &step.f_hat) {
                        return err;
                    }
                }
                NfStatus::NfStatusOk
            }
            Err(err) => fail(NfStatus::NfStatusNumericFailure, err.to_string()),
        }
    })
}

// ---------------------------------------------------------------------------
// Analysis
// ---------------------------------------------------------------------------

/// Decides whether faults supported on the given node set are exactly
/// recoverable from one measurement under the given leader mode; writes 1
/// (recoverable) or 0. `faulty` lists 1-based node ids.
///
/// # Safety
/// `faulty` must hold `faulty_len` elements (or be null when empty);
/// `recoverable_out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nf_recovery_check(
    node_count: usize,
    per_node_dim: usize,
    faulty: *const usize,
    faulty_len: usize,
    leader_active: c_int,
    recoverable_out: *mut c_int,
) -> NfStatus {
    guarded(|| {
        if recoverable_out.is_null() {
            return fail(NfStatus::NfStatusNullArgument, "null output pointer");
        }
        let nodes = match read_usize(faulty, faulty_len) {
            Ok(s) => s,
            Err(e) => return e,
        };
        let set: std::collections::BTreeSet<usize> = nodes.iter().copied().collect();
        match nsp_check_structured(
            node_count,
            per_node_dim,
            &set,
            mode_from_flag(leader_active),
        ) {
            Ok(verdict) => {
                *recoverable_out = verdict.satisfies as c_int;
                NfStatus::NfStatusOk
            }
            Err(e) => fail(NfStatus::NfStatusInvalidArgument, e.to_string()),
        }
    })
}

/// Worst-case l1 fault-estimate error bound for one step with `fault_count`
/// of `node_count` nodes faulty, dynamics gain `eta` (the sum of the
/// absolute entries of the stacked state matrix) and carried-estimate error
/// at most `d_max`. Also writes the factor by which the worst-case state
/// error can grow across the step. Fails when `2 * fault_count >=
/// node_count`, where no bound exists.
///
/// # Safety
/// `fault_bound_out` and `growth_factor_out` must be writable or null
/// (null skips that output).
#[no_mangle]
pub unsafe extern "C" fn nf_fault_error_bound(
    node_count: usize,
    fault_count: usize,
    eta: f64,
    d_max: f64,
    fault_bound_out: *mut f64,
    growth_factor_out: *mut f64,
) -> NfStatus {
    guarded(|| {
        match fault_error_bound(node_count, fault_count, eta, d_max) {
            Ok(report) => {
                if !fault_bound_out.is_null() {
                    *fault_bound_out = report.fault_bound;
                }
                if !growth_factor_out.is_null() {
                    *growth_factor_out = report.state_growth_factor;
                }
                NfStatus::NfStatusOk
            }
            Err(e) => fail(NfStatus::NfStatusInvalidArgument, e.to_string()),
        }
    })
}

// ---------------------------------------------------------------------------
// Standalone solver
// ---------------------------------------------------------------------------

/// Solves `min ||z - shift||_1` subject to `A z = b` (when `ball_radius <
/// 0`) or `||A z - b||_2 <= ball_radius` (when nonnegative). `a` is dense
/// row-major with `rows * cols` entries; `shift` may be null for zero.
/// Writes the minimizer into `z_out` (`cols` entries) and, when non-null,
/// the objective value into `objective_out`.
///
/// # Safety
/// `a`, `b`, `shift` (if non-null) and `z_out` must match the documented
/// lengths; `objective_out` must be writable or null.
#[no_mangle]
pub unsafe extern "C" fn nf_solve_bp(
    rows: usize,
    cols: usize,
    a: *const f64,
    b: *const f64,
    shift: *const f64,
    ball_radius: f64,
    z_out: *mut f64,
    objective_out: *mut f64,
) -> NfStatus {
    guarded(|| {
        if cols == 0 {
            return fail(NfStatus::NfStatusInvalidArgument, "cols must be positive");
        }
        let a_entries = match read_f64(a, rows * cols) {
            Ok(s) => s,
            Err(e) => return e,
        };
        let b_entries = match read_f64(b, rows) {
            Ok(s) => s,
            Err(e) => return e,
        };
        let shift_vec = if shift.is_null() {
            DVector::zeros(cols)
        } else {
            DVector::from_column_slice(slice::from_raw_parts(shift, cols))
        };
        let a_mat = DMatrix::from_row_slice(rows, cols, a_entries);
        let b_vec = DVector::from_column_slice(b_entries);
        let constraint = if ball_radius < 0.0 {
            BpConstraint::Equality
        } else {
            BpConstraint::Ball {
                radius: ball_radius,
            }
        };
        let problem = BpProblem {
            a: a_mat,
            b: b_vec,
            shift: shift_vec,
            constraint,
        };
        match solve_bp(&problem, &SolverConfig::default()) {
            Ok(sol) => {
                if let Err(e) = write_vector(z_out, &sol.z) {
                    return e;
                }
                if !objective_out.is_null() {
                    *objective_out = sol.objective;
                }
                NfStatus::NfStatusOk
            }
            Err(e) => fail(NfStatus::NfStatusNumericFailure, e.to_string()),
        }
    })
}
