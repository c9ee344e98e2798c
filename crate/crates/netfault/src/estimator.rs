//! Centralized step estimators: sparse l1 recovery (exact and denoising
//! variants) and a linear Kalman-style baseline.
//!
//! All three share the prediction `prior = A x_hat(k-1) + B u(k-1)` and
//! differ in how they correct it against the measurement `y(k) = C x(k)`:
//!
//! - `L1` solves `min ||x - prior||_1 s.t. y = C x` by substituting
//!   `z = x - prior`, which is plain basis pursuit on the innovation,
//! - `L1Denoise` relaxes the constraint to `||y - C x||_2 <= w_max * sqrt(rows)`
//!   for measurement noise bounded entrywise by `w_max`,
//! - `Kalman` applies the fixed-covariance gain `P C^T (V + C P C^T)^{-1}`.
//!
//! The fault estimate is always `f_hat = x_hat - prior`, evaluated literally
//! on the returned state estimate so the identity holds bit-for-bit.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::plant::{LeaderMode, NetworkPlant, PlantError};
use crate::solver::{
    optimality_certificate, solve_bp, BpConstraint, BpProblem, SolverConfig, SolverError,
};

#[derive(Debug, Error)]
pub enum EstimatorError {
    #[error(transparent)]
    Plant(#[from] PlantError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("measurement has length {got}, expected {expected} for the current leader mode")]
    MeasurementLength { expected: usize, got: usize },
    #[error("kalman scales must be positive (p_scale={p_scale}, v_scale={v_scale})")]
    KalmanScales { p_scale: f64, v_scale: f64 },
}

/// Estimator family and its parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EstimatorKind {
    L1,
    L1Denoise { w_max: f64 },
    Kalman { p_scale: f64, v_scale: f64 },
}

impl EstimatorKind {
    pub fn name(&self) -> &'static str {
        match self {
            EstimatorKind::L1 => "l1",
            EstimatorKind::L1Denoise { .. } => "l1_denoise",
            EstimatorKind::Kalman { .. } => "kalman",
        }
    }
}

/// One estimation step: state and fault estimates plus solver diagnostics.
#[derive(Debug, Clone)]
pub struct StepEstimate {
    pub x_hat: DVector<f64>,
    /// `x_hat - prior`, bit-identical to that difference by construction.
    pub f_hat: DVector<f64>,
    pub prior: DVector<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Dual-certificate hint that the l1 minimizer may not be unique;
    /// always false for the Kalman baseline and the ball-constrained solve.
    pub may_be_nonunique: bool,
}

/// Recursive estimator carrying `x_hat(k-1)` between steps.
#[derive(Debug, Clone)]
pub struct Estimator {
    kind: EstimatorKind,
    solver: SolverConfig,
    x_prev: DVector<f64>,
}

impl Estimator {
    /// Starts from the all-zero estimate `x_hat(-1) = 0`.
    pub fn new(kind: EstimatorKind, solver: SolverConfig, state_dim: usize) -> Self {
        Self {
            kind,
            solver,
            x_prev: DVector::zeros(state_dim),
        }
    }

    pub fn kind(&self) -> EstimatorKind {
        self.kind
    }

    /// Last state estimate (the prior source for the next step).
    pub fn state_estimate(&self) -> &DVector<f64> {
        &self.x_prev
    }

    /// Overrides the carried estimate, e.g. to study a step in isolation.
    pub fn set_state_estimate(&mut self, x: DVector<f64>) {
        self.x_prev = x;
    }

    /// Advances one step on measurement `y(k)` taken under `mode`, with
    /// `u_prev = u(k-1)` (zeros at `k = 0`).
    pub fn step(
        &mut self,
        plant: &NetworkPlant,
        y: &DVector<f64>,
        u_prev: &DVector<f64>,
        mode: LeaderMode,
    ) -> Result<StepEstimate, EstimatorError> {
        let c = plant.output_matrix(mode);
        if y.len() != c.nrows() {
            return Err(EstimatorError::MeasurementLength {
                expected: c.nrows(),
                got: y.len(),
            });
        }
        let prior = plant.a() * &self.x_prev + plant.b() * u_prev;
        let estimate = match self.kind {
            EstimatorKind::L1 => l1_correct(c, y, &prior, BpConstraint::Equality, &self.solver)?,
            EstimatorKind::L1Denoise { w_max } => {
                let constraint = if w_max == 0.0 {
                    BpConstraint::Equality
                } else {
                    // Entrywise bound to a worst-case l2 radius.
                    BpConstraint::Ball {
                        radius: w_max * (c.nrows() as f64).sqrt(),
                    }
                };
                l1_correct(c, y, &prior, constraint, &self.solver)?
            }
            EstimatorKind::Kalman { p_scale, v_scale } => {
                kalman_correct(c, y, &prior, p_scale, v_scale)?
            }
        };
        self.x_prev = estimate.x_hat.clone();
        Ok(estimate)
    }
}

fn l1_correct(
    c: &DMatrix<f64>,
    y: &DVector<f64>,
    prior: &DVector<f64>,
    constraint: BpConstraint,
    cfg: &SolverConfig,
) -> Result<StepEstimate, EstimatorError> {
    let innovation = y - c * prior;
    let problem = BpProblem {
        a: c.clone(),
        b: innovation,
        shift: DVector::zeros(c.ncols()),
        constraint,
    };
    let sol = solve_bp(&problem, cfg)?;
    let may_be_nonunique = match constraint {
        BpConstraint::Equality => {
            optimality_certificate(&problem.a, &problem.shift, &sol.z, 1e-6).potentially_degenerate
        }
        BpConstraint::Ball { .. } => false,
    };
    let x_hat = prior + &sol.z;
    let f_hat = &x_hat - prior;
    Ok(StepEstimate {
        x_hat,
        f_hat,
        prior: prior.clone(),
        iterations: sol.iterations,
        converged: sol.converged,
        may_be_nonunique,
    })
}

fn kalman_correct(
    c: &DMatrix<f64>,
    y: &DVector<f64>,
    prior: &DVector<f64>,
    p_scale: f64,
    v_scale: f64,
) -> Result<StepEstimate, EstimatorError> {
    if !(p_scale > 0.0) || !(v_scale > 0.0) {
        return Err(EstimatorError::KalmanScales { p_scale, v_scale });
    }
    let rows = c.nrows();
    let x_hat = if rows == 0 {
        prior.clone()
    } else {
        // K = P C^T (V + C P C^T)^{-1} with P = p_scale I, V = v_scale I.
        let innovation_cov =
            DMatrix::identity(rows, rows) * v_scale + c * c.transpose() * p_scale;
        let chol = nalgebra::Cholesky::new(innovation_cov)
            .expect("innovation covariance is positive definite");
        let innovation = y - c * prior;
        let gain_applied = c.transpose() * chol.solve(&innovation) * p_scale;
        prior + gain_applied
    };
    let f_hat = &x_hat - prior;
    Ok(StepEstimate {
        x_hat,
        f_hat,
        prior: prior.clone(),
        iterations: 1,
        converged: true,
        may_be_nonunique: false,
    })
}
