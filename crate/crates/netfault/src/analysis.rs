//! Recovery-limit and error-bound analysis.
//!
//! The central question: when does l1 recovery of the stacked fault succeed
//! regardless of fault values? The answer is a null-space property of the
//! output matrix relative to the fault's sparsity pattern. For the structured
//! matrices of this crate the property collapses to counting: with the leader
//! non-active, every kernel vector is a per-coordinate consensus vector, so
//! recovery of faults on a node set `I` succeeds for all values exactly when
//! `|I| < M/2`; with the leader active the kernel is trivial and recovery is
//! always exact. Past the limit, an explicit fault pair witnesses the failure.
//!
//! The quantitative side bounds the fault estimation error by
//! `2 (M - |I|) / (M - 2 |I|) * eta * d_max` for prior error `d_max`, where
//! `eta` is the entrywise l1 norm of the stacked state matrix, and propagates
//! the state error bound step by step.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

use crate::graph::NodeId;
use crate::linalg::{kernel_basis, KERNEL_REL_TOL};
use crate::permute::PermutationPlan;
use crate::plant::{FaultSchedule, LeaderMode};

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("node and coordinate counts must be at least 1 (got M={m}, n={n})")]
    EmptyLayout { m: usize, n: usize },
    #[error("node {node} outside 1..={m}")]
    NodeOutOfRange { node: NodeId, m: usize },
    #[error("column index {index} outside the matrix width {cols}")]
    ColumnOutOfRange { index: usize, cols: usize },
    #[error("bound undefined: {fault_count} faulty nodes reach the recovery limit for M={m}")]
    BoundUndefined { m: usize, fault_count: usize },
    #[error("bound undefined at step {k}: {fault_count} faulty nodes reach the recovery limit for M={m}")]
    BoundUndefinedAtStep {
        k: usize,
        m: usize,
        fault_count: usize,
    },
    #[error("no counterexample below the recovery limit ({fault_count} faulty nodes, M={m})")]
    BelowRecoveryLimit { m: usize, fault_count: usize },
    #[error("eta and error levels must be nonnegative")]
    NegativeQuantity,
}

/// Entrywise l1 norm of a matrix: the fault-to-state amplification factor of
/// one prediction step.
pub fn eta(a: &DMatrix<f64>) -> f64 {
    a.iter().map(|v| v.abs()).sum()
}

/// How a null-space verdict was reached.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NspMethod {
    /// Closed-form argument on the structured consensus kernel.
    AnalyticStructured,
    /// Kernel of dimension 0 or 1: decided exactly on the basis vector.
    KernelExact,
    /// Higher-dimensional kernel probed with deterministic and sampled
    /// candidates; `satisfies = true` is evidence, not proof.
    SampledFalsifier,
}

/// Outcome of a null-space property check for a support set `T`.
///
/// `satisfies` means every nonzero kernel vector `v` obeys
/// `||v_T||_1 < ||v_{T^c}||_1`. When false, `witness` carries a kernel vector
/// violating the inequality.
#[derive(Debug, Clone)]
pub struct NspVerdict {
    pub satisfies: bool,
    pub method: NspMethod,
    pub witness: Option<DVector<f64>>,
}

/// Null-space property of the structured output matrix for faults on the
/// node set `faulty`, decided by the consensus-kernel counting argument.
///
/// The support set is the coordinate-major fault pattern of `faulty`; the
/// witness (when the property fails) is the all-ones consensus vector.
pub fn nsp_check_structured(
    m: usize,
    n: usize,
    faulty: &BTreeSet<NodeId>,
    mode: LeaderMode,
) -> Result<NspVerdict, AnalysisError> {
    if m == 0 || n == 0 {
        return Err(AnalysisError::EmptyLayout { m, n });
    }
    for &node in faulty {
        if node == 0 || node > m {
            return Err(AnalysisError::NodeOutOfRange { node, m });
        }
    }
    // Active leader: the output matrix has full column rank, so the kernel is
    // trivial and the property holds vacuously for every support.
    if mode == LeaderMode::Active {
        return Ok(NspVerdict {
            satisfies: true,
            method: NspMethod::AnalyticStructured,
            witness: None,
        });
    }
    // Non-active: kernel vectors put one constant per coordinate across all
    // nodes, so the support captures |I| of every M entries per coordinate.
    let satisfies = 2 * faulty.len() < m;
    let witness = if satisfies {
        None
    } else {
        Some(DVector::from_element(m * n, 1.0))
    };
    Ok(NspVerdict {
        satisfies,
        method: NspMethod::AnalyticStructured,
        witness,
    })
}

/// Margin by which `v` satisfies the support inequality: positive is good.
fn nsp_margin(v: &DVector<f64>, t: &BTreeSet<usize>) -> f64 {
    let mut on = 0.0;
    let mut off = 0.0;
    for (i, &value) in v.iter().enumerate() {
        if t.contains(&i) {
            on += value.abs();
        } else {
            off += value.abs();
        }
    }
    off - on
}

/// Numerical null-space property check for an arbitrary matrix and 0-based
/// column support set `t`.
///
/// Kernels of dimension 0 or 1 are decided exactly. Larger kernels are probed
/// with basis vectors, pairwise combinations and `samples` seeded random
/// kernel directions: a found violation is definitive, absence of one is only
/// sampled evidence. Near-ties count as violations (the inequality must be
/// strict).
pub fn nsp_check_generic(
    a: &DMatrix<f64>,
    t: &BTreeSet<usize>,
    samples: usize,
) -> Result<NspVerdict, AnalysisError> {
    for &index in t {
        if index >= a.ncols() {
            return Err(AnalysisError::ColumnOutOfRange {
                index,
                cols: a.ncols(),
            });
        }
    }
    let basis = kernel_basis(a, KERNEL_REL_TOL);
    let dim = basis.ncols();
    if dim == 0 {
        return Ok(NspVerdict {
            satisfies: true,
            method: NspMethod::KernelExact,
            witness: None,
        });
    }
    let tie_tol = |v: &DVector<f64>| 1e-9 * (1.0 + v.abs().sum());
    let verdict_on = |v: DVector<f64>, method: NspMethod| -> Option<NspVerdict> {
        if nsp_margin(&v, t) <= tie_tol(&v) {
            Some(NspVerdict {
                satisfies: false,
                method,
                witness: Some(v),
            })
        } else {
            None
        }
    };
    if dim == 1 {
        let v = basis.column(0).clone_owned();
        return Ok(verdict_on(v, NspMethod::KernelExact).unwrap_or(NspVerdict {
            satisfies: true,
            method: NspMethod::KernelExact,
            witness: None,
        }));
    }

    let mut candidates: Vec<DVector<f64>> = Vec::new();
    for j in 0..dim {
        candidates.push(basis.column(j).clone_owned());
    }
    for i in 0..dim {
        for j in (i + 1)..dim {
            let bi = basis.column(i);
            let bj = basis.column(j);
            candidates.push((bi + bj).normalize());
            candidates.push((bi - bj).normalize());
        }
    }
    let mut rng = ChaCha12Rng::seed_from_u64(0x6e73_7063);
    for _ in 0..samples {
        let coeffs = DVector::from_fn(dim, |_, _| standard_normal(&mut rng));
        let v = &basis * coeffs;
        let norm = v.norm();
        if norm > 1e-12 {
            candidates.push(v / norm);
        }
    }
    for v in candidates {
        if let Some(verdict) = verdict_on(v, NspMethod::SampledFalsifier) {
            return Ok(verdict);
        }
    }
    Ok(NspVerdict {
        satisfies: true,
        method: NspMethod::SampledFalsifier,
        witness: None,
    })
}

fn standard_normal(rng: &mut ChaCha12Rng) -> f64 {
    // Box-Muller on open-interval uniforms.
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    (-2.0 * u1.ln()).sqrt() * u2.cos()
}

/// Per-step recovery-limit verdicts for a fault schedule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecoveryLimitReport {
    /// `(k, |I_k|, 2 |I_k| < M)` for each step in `0..horizon`.
    pub per_step: Vec<(usize, usize, bool)>,
    pub all_hold: bool,
}

/// Checks `|I_k| < M / 2` for every step of the horizon.
pub fn recovery_limit_holds(
    schedule: &FaultSchedule,
    m: usize,
    horizon: usize,
) -> RecoveryLimitReport {
    let mut per_step = Vec::with_capacity(horizon);
    let mut all_hold = true;
    for k in 0..horizon {
        let count = schedule.support(k).len();
        let holds = 2 * count < m;
        all_hold &= holds;
        per_step.push((k, count, holds));
    }
    RecoveryLimitReport { per_step, all_hold }
}

/// Worst-case error amplification for one step with `fault_count` faulty
/// nodes out of `m` and prior state error at most `d_max` (l1 norm).
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorBoundReport {
    pub node_count: usize,
    pub fault_count: usize,
    pub eta: f64,
    pub d_max: f64,
    /// Bound on `||f - f_hat||_1`.
    pub fault_bound: f64,
    /// Multiplier taking the prior state error bound to the posterior one.
    pub state_growth_factor: f64,
}

/// Evaluates the fault error bound `2 (M - |I|) / (M - 2 |I|) * eta * d_max`
/// and the matching state-error growth factor `(3M - 4 |I|) / (M - 2 |I|) * eta`.
pub fn fault_error_bound(
    m: usize,
    fault_count: usize,
    eta: f64,
    d_max: f64,
) -> Result<ErrorBoundReport, AnalysisError> {
    if eta < 0.0 || d_max < 0.0 {
        return Err(AnalysisError::NegativeQuantity);
    }
    if 2 * fault_count >= m {
        return Err(AnalysisError::BoundUndefined { m, fault_count });
    }
    let mf = m as f64;
    let cf = fault_count as f64;
    let denom = mf - 2.0 * cf;
    Ok(ErrorBoundReport {
        node_count: m,
        fault_count,
        eta,
        d_max,
        fault_bound: 2.0 * (mf - cf) / denom * eta * d_max,
        state_growth_factor: (3.0 * mf - 4.0 * cf) / denom * eta,
    })
}

/// Propagates the state-error bound over a mode/support schedule.
///
/// Active steps reset the bound to `d_exact` (the solver-accuracy floor);
/// non-active steps multiply by the growth factor and, when system noise is
/// modeled, add `v_max`. Returns `d(0..=len)` with `d(0) = d0`. Fails on a
/// non-active step whose support reaches the recovery limit.
pub fn error_recursion(
    m: usize,
    steps: &[(LeaderMode, usize)],
    eta: f64,
    d0: f64,
    d_exact: f64,
    v_max: f64,
) -> Result<Vec<f64>, AnalysisError> {
    if eta < 0.0 || d0 < 0.0 || d_exact < 0.0 || v_max < 0.0 {
        return Err(AnalysisError::NegativeQuantity);
    }
    let mut d = Vec::with_capacity(steps.len() + 1);
    d.push(d0);
    for (idx, &(mode, fault_count)) in steps.iter().enumerate() {
        let k = idx + 1;
        let next = match mode {
            LeaderMode::Active => d_exact,
            LeaderMode::NonActive => {
                if 2 * fault_count >= m {
                    return Err(AnalysisError::BoundUndefinedAtStep { k, m, fault_count });
                }
                let report = fault_error_bound(m, fault_count, eta, 0.0)?;
                report.state_growth_factor * d[idx] + v_max
            }
        };
        d.push(next);
    }
    Ok(d)
}

/// Explicit failure pair past the recovery limit: a fault on `faulty` and a
/// strictly-off-support competitor with no larger l1 norm and identical
/// non-active measurements.
#[derive(Debug, Clone)]
pub struct CounterexampleFault {
    /// Node-major stacked fault: `-1` on every faulty coordinate.
    pub fault: DVector<f64>,
    /// `fault + kernel`: supported exactly off the faulty set.
    pub competing: DVector<f64>,
    /// The consensus kernel vector connecting the two (all ones).
    pub kernel: DVector<f64>,
    pub faulty: BTreeSet<NodeId>,
}

/// Constructs the counterexample for `2 |I| >= M` in the non-active mode.
pub fn counterexample_fault(
    m: usize,
    n: usize,
    faulty: &BTreeSet<NodeId>,
) -> Result<CounterexampleFault, AnalysisError> {
    if m == 0 || n == 0 {
        return Err(AnalysisError::EmptyLayout { m, n });
    }
    for &node in faulty {
        if node == 0 || node > m {
            return Err(AnalysisError::NodeOutOfRange { node, m });
        }
    }
    if 2 * faulty.len() < m {
        return Err(AnalysisError::BelowRecoveryLimit {
            m,
            fault_count: faulty.len(),
        });
    }
    let kernel = DVector::from_element(m * n, 1.0);
    let mut fault = DVector::zeros(m * n);
    for &node in faulty {
        for coord in 0..n {
            fault[(node - 1) * n + coord] = -1.0;
        }
    }
    let competing = &fault + &kernel;
    Ok(CounterexampleFault {
        fault,
        competing,
        kernel,
        faulty: faulty.clone(),
    })
}

/// Coordinate-major support on which [`counterexample_fault`]'s pair lives,
/// as used by the structured null-space checks.
pub fn fault_support_indices(
    m: usize,
    n: usize,
    faulty: &BTreeSet<NodeId>,
) -> Result<BTreeSet<usize>, AnalysisError> {
    let plan = PermutationPlan::new(m, n).map_err(|_| AnalysisError::EmptyLayout { m, n })?;
    plan.fault_support_sets(faulty)
        .map_err(|_| AnalysisError::NodeOutOfRange {
            node: *faulty.iter().max().unwrap_or(&0),
            m,
        })
}
