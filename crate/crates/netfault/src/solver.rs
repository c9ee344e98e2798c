//! Shifted basis-pursuit solver built on operator splitting.
//!
//! The core problem is `min ||z - c||_1  s.t.  A z = b` (equality form) or
//! `||A z - b||_2 <= radius` (denoising form). Both are solved by the same
//! alternating scheme: project onto the constraint set, over-relax, apply the
//! shrinkage prox of the shifted l1 term, update the scaled dual. The
//! constraint projection is exact in both cases: affine projection through a
//! cached SVD pseudoinverse (which also absorbs dependent rows), and a
//! norm-ball projection solved per call by a scalar Newton iteration on the
//! regularization path of the same SVD.
//!
//! The distributed runtime needs the strongly convex variant
//! `min w1 ||x - c||_1 + v^T x + (q/2) ||x||^2  s.t.  C x = y`, solved here by
//! the identical splitting with a closed-form scalar prox.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::linalg::{self, RANK_REL_TOL};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("constraints are inconsistent: no point comes within {residual:.3e} of satisfying them")]
    Infeasible { residual: f64 },
    #[error("A is {rows}x{cols} but b has length {b_len} and the variable has length {z_len}")]
    DimensionMismatch {
        rows: usize,
        cols: usize,
        b_len: usize,
        z_len: usize,
    },
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
}

/// Tolerances and penalty parameters for the splitting iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Constraint-consistency tolerance; also scales the splitting gap that
    /// declares convergence.
    pub feas_tol: f64,
    /// Successive-iterate change below which the iteration is stationary.
    pub step_tol: f64,
    pub max_iterations: usize,
    /// Augmented-Lagrangian penalty `rho`.
    pub penalty: f64,
    /// Relaxation factor in `(0, 2)`; values above 1 over-relax.
    pub over_relaxation: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            feas_tol: 1e-8,
            step_tol: 1e-9,
            max_iterations: 20_000,
            penalty: 1.0,
            over_relaxation: 1.6,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.feas_tol > 0.0) || !(self.step_tol > 0.0) {
            return Err(SolverError::InvalidConfig(
                "tolerances must be positive".into(),
            ));
        }
        if !(self.penalty > 0.0) {
            return Err(SolverError::InvalidConfig("penalty must be positive".into()));
        }
        if !(self.over_relaxation > 0.0 && self.over_relaxation < 2.0) {
            return Err(SolverError::InvalidConfig(
                "over_relaxation must lie in (0, 2)".into(),
            ));
        }
        if self.max_iterations == 0 {
            return Err(SolverError::InvalidConfig(
                "max_iterations must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// Copy with tolerances tightened by `factor` (used for inner solves).
    pub fn tightened(&self, factor: f64) -> Self {
        Self {
            feas_tol: self.feas_tol / factor,
            step_tol: self.step_tol / factor,
            ..*self
        }
    }
}

/// Constraint attached to a [`BpProblem`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BpConstraint {
    Equality,
    /// `||A z - b||_2 <= radius`; radius 0 collapses to `Equality`.
    Ball { radius: f64 },
}

/// `min ||z - shift||_1` subject to the constraint on `A z - b`.
#[derive(Debug, Clone)]
pub struct BpProblem {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub shift: DVector<f64>,
    pub constraint: BpConstraint,
}

impl BpProblem {
    pub fn equality(a: DMatrix<f64>, b: DVector<f64>) -> Self {
        let cols = a.ncols();
        Self {
            a,
            b,
            shift: DVector::zeros(cols),
            constraint: BpConstraint::Equality,
        }
    }

    pub fn with_shift(mut self, shift: DVector<f64>) -> Self {
        self.shift = shift;
        self
    }

    pub fn ball(a: DMatrix<f64>, b: DVector<f64>, radius: f64) -> Self {
        let constraint = if radius == 0.0 {
            BpConstraint::Equality
        } else {
            BpConstraint::Ball { radius }
        };
        let cols = a.ncols();
        Self {
            a,
            b,
            shift: DVector::zeros(cols),
            constraint,
        }
    }
}

/// Solver output; `z` always satisfies the constraint to projection accuracy.
#[derive(Debug, Clone)]
pub struct BpSolution {
    pub z: DVector<f64>,
    pub objective: f64,
    /// `||A z - b||` for equality constraints, the ball excess for ball
    /// constraints (0 when inside).
    pub constraint_residual: f64,
    pub iterations: usize,
    /// False when the iteration budget ran out first; never an error.
    pub converged: bool,
}

pub fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

enum Projector {
    Identity,
    Affine {
        a: DMatrix<f64>,
        b: DVector<f64>,
        pinv: DMatrix<f64>,
    },
    Ball(BallProjector),
}

impl Projector {
    fn project(&self, v: &DVector<f64>) -> DVector<f64> {
        match self {
            Projector::Identity => v.clone(),
            Projector::Affine { a, b, pinv } => {
                let residual = a * v - b;
                v - pinv * residual
            }
            Projector::Ball(ball) => ball.project(v),
        }
    }
}

/// Projection onto `{x : ||A x - b|| <= radius}` through the SVD of `A`.
struct BallProjector {
    radius: f64,
    /// Rows are the right singular vectors with significant singular values.
    vt: DMatrix<f64>,
    sigma: Vec<f64>,
    /// `b` expressed in the corresponding left singular directions.
    b_tilde: Vec<f64>,
    /// Squared distance from `b` to the range of `A`; unavoidable residual.
    perp_sq: f64,
}

impl BallProjector {
    fn new(a: &DMatrix<f64>, b: &DVector<f64>, radius: f64) -> Self {
        let svd = a.clone().svd(true, true);
        let u = svd.u.expect("SVD requested U");
        let vt_full = svd.v_t.expect("SVD requested V^T");
        let max = svd.singular_values.max();
        let mut keep = Vec::new();
        for i in 0..svd.singular_values.len() {
            let s = svd.singular_values[i];
            if max > 0.0 && s > RANK_REL_TOL * max {
                keep.push(i);
            }
        }
        let mut vt = DMatrix::zeros(keep.len(), a.ncols());
        let mut sigma = Vec::with_capacity(keep.len());
        let mut b_tilde = Vec::with_capacity(keep.len());
        let mut captured = 0.0;
        for (r, &i) in keep.iter().enumerate() {
            vt.row_mut(r).copy_from(&vt_full.row(i));
            sigma.push(svd.singular_values[i]);
            let bi = u.column(i).dot(b);
            captured += bi * bi;
            b_tilde.push(bi);
        }
        let perp_sq = (b.norm_squared() - captured).max(0.0);
        Self {
            radius,
            vt,
            sigma,
            b_tilde,
            perp_sq,
        }
    }

    /// Smallest achievable residual `min_x ||A x - b||`.
    fn floor(&self) -> f64 {
        self.perp_sq.sqrt()
    }

    fn residual_sq_at(&self, coeffs: &[f64], lambda: f64) -> f64 {
        let mut total = self.perp_sq;
        for (i, &c) in coeffs.iter().enumerate() {
            let den = 1.0 + lambda * self.sigma[i] * self.sigma[i];
            let term = c / den;
            total += term * term;
        }
        total
    }

    fn project(&self, v: &DVector<f64>) -> DVector<f64> {
        // coeffs_i = sigma_i <V_i, v> - b~_i drive the residual; lambda > 0
        // shrinks each toward the constraint boundary.
        let vt_v = &self.vt * v;
        let coeffs: Vec<f64> = (0..self.sigma.len())
            .map(|i| self.sigma[i] * vt_v[i] - self.b_tilde[i])
            .collect();
        let target = self.radius * self.radius;
        if self.residual_sq_at(&coeffs, 0.0) <= target {
            return v.clone();
        }
        // Newton from the left on the convex decreasing residual curve.
        let mut lambda = 0.0;
        for _ in 0..200 {
            let mut value = self.perp_sq - target;
            let mut slope = 0.0;
            for (i, &c) in coeffs.iter().enumerate() {
                let s2 = self.sigma[i] * self.sigma[i];
                let den = 1.0 + lambda * s2;
                let term = c * c / (den * den);
                value += term;
                slope -= 2.0 * s2 * term / den;
            }
            if value <= target * 1e-14 + 1e-300 || slope == 0.0 {
                break;
            }
            let next = lambda - value / slope;
            if !(next > lambda) || !next.is_finite() {
                break;
            }
            lambda = next;
        }
        let mut delta = DVector::zeros(vt_v.len());
        for i in 0..self.sigma.len() {
            let s = self.sigma[i];
            let den = 1.0 + lambda * s * s;
            // x~_i - v~_i, the move along the i-th right singular direction
            delta[i] = -lambda * s * coeffs[i] / den;
        }
        v + self.vt.transpose() * delta
    }
}

fn check_dims(a: &DMatrix<f64>, b: &DVector<f64>, z_len: usize) -> Result<(), SolverError> {
    if a.nrows() != b.len() || a.ncols() != z_len {
        return Err(SolverError::DimensionMismatch {
            rows: a.nrows(),
            cols: a.ncols(),
            b_len: b.len(),
            z_len,
        });
    }
    Ok(())
}

fn build_projector(problem: &BpProblem, cfg: &SolverConfig) -> Result<Projector, SolverError> {
    let (a, b) = (&problem.a, &problem.b);
    if a.nrows() == 0 {
        return Ok(Projector::Identity);
    }
    let scale = 1.0 + b.norm();
    match problem.constraint {
        BpConstraint::Equality => {
            let pinv = linalg::pseudoinverse(a, RANK_REL_TOL);
            let residual = (a * (&pinv * b) - b).norm();
            if residual > cfg.feas_tol * scale {
                return Err(SolverError::Infeasible { residual });
            }
            Ok(Projector::Affine {
                a: a.clone(),
                b: b.clone(),
                pinv,
            })
        }
        BpConstraint::Ball { radius } => {
            if radius < 0.0 {
                return Err(SolverError::InvalidConfig(
                    "ball radius must be nonnegative".into(),
                ));
            }
            let ball = BallProjector::new(a, b, radius);
            let floor = ball.floor();
            if floor > radius + cfg.feas_tol * scale {
                return Err(SolverError::Infeasible { residual: floor });
            }
            Ok(Projector::Ball(ball))
        }
    }
}

fn constraint_residual(problem: &BpProblem, z: &DVector<f64>) -> f64 {
    if problem.a.nrows() == 0 {
        return 0.0;
    }
    let r = (&problem.a * z - &problem.b).norm();
    match problem.constraint {
        BpConstraint::Equality => r,
        BpConstraint::Ball { radius } => (r - radius).max(0.0),
    }
}

/// Solves a [`BpProblem`] by operator splitting.
///
/// Convergence means the splitting gap fell below `feas_tol` and the iterate
/// step below `step_tol` (both relative to the iterate scale); hitting the
/// iteration budget reports `converged = false` instead of an error.
pub fn solve_bp(problem: &BpProblem, cfg: &SolverConfig) -> Result<BpSolution, SolverError> {
    cfg.validate()?;
    check_dims(&problem.a, &problem.b, problem.shift.len())?;
    let projector = build_projector(problem, cfg)?;
    let q = problem.a.ncols();
    let rho_inv = 1.0 / cfg.penalty;
    let alpha = cfg.over_relaxation;

    let mut z = problem.shift.clone();
    let mut u = DVector::zeros(q);
    let mut x = DVector::zeros(q);
    let mut x_prev: Option<DVector<f64>> = None;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < cfg.max_iterations {
        iterations += 1;
        x = projector.project(&(&z - &u));
        let xh = &x * alpha + &z * (1.0 - alpha);
        let z_old = z;
        let w = &xh + &u - &problem.shift;
        z = DVector::from_fn(q, |i, _| {
            problem.shift[i] + soft_threshold(w[i], rho_inv)
        });
        u += &xh - &z;

        let scale = 1.0 + x.norm();
        let gap = (&x - &z).norm();
        let step = match &x_prev {
            Some(prev) => (&x - prev).norm(),
            None => f64::INFINITY,
        };
        let zstep = (&z - &z_old).norm();
        x_prev = Some(x.clone());
        if gap <= cfg.feas_tol * scale
            && step <= cfg.step_tol * scale
            && zstep <= cfg.step_tol * scale
        {
            converged = true;
            break;
        }
    }

    let objective = (&x - &problem.shift).abs().sum();
    Ok(BpSolution {
        constraint_residual: constraint_residual(problem, &x),
        z: x,
        objective,
        iterations,
        converged,
    })
}

/// Denoising variant: `min ||z - shift||_1  s.t.  ||A z - b|| <= w_max`.
///
/// `w_max = 0` delegates to the equality-constrained solver.
pub fn solve_bp_denoise(
    a: DMatrix<f64>,
    b: DVector<f64>,
    w_max: f64,
    shift: DVector<f64>,
    cfg: &SolverConfig,
) -> Result<BpSolution, SolverError> {
    let problem = BpProblem::ball(a, b, w_max).with_shift(shift);
    solve_bp(&problem, cfg)
}

/// Local objective solved by each node of the distributed runtime:
/// `min w1 ||x - shift||_1 + linear^T x + (quad / 2) ||x||^2  s.t.  c_rows x = y`.
#[derive(Debug, Clone)]
pub struct NodeSubproblem<'a> {
    pub c_rows: &'a DMatrix<f64>,
    pub y: &'a DVector<f64>,
    pub shift: &'a DVector<f64>,
    pub linear: &'a DVector<f64>,
    /// Quadratic coefficient; nonnegative (0 only for isolated nodes).
    pub quad: f64,
    pub l1_weight: f64,
}

/// Prefactored equality constraint `c_rows x = y`, reusable across many
/// [`NodeSubproblem`] solves over the same rows and data. Building one runs
/// the feasibility check and the SVD once.
pub struct NodeConstraint {
    projector: Projector,
}

impl NodeConstraint {
    pub fn new(
        c_rows: &DMatrix<f64>,
        y: &DVector<f64>,
        cfg: &SolverConfig,
    ) -> Result<Self, SolverError> {
        cfg.validate()?;
        check_dims(c_rows, y, c_rows.ncols())?;
        let equality = BpProblem {
            a: c_rows.clone(),
            b: y.clone(),
            shift: DVector::zeros(c_rows.ncols()),
            constraint: BpConstraint::Equality,
        };
        Ok(Self {
            projector: build_projector(&equality, cfg)?,
        })
    }
}

/// Solves a [`NodeSubproblem`] by the same splitting; the prox of the scalar
/// l1-plus-quadratic term is evaluated in closed form per coordinate.
pub fn solve_node_subproblem(
    p: &NodeSubproblem,
    warm: Option<&DVector<f64>>,
    cfg: &SolverConfig,
) -> Result<BpSolution, SolverError> {
    let constraint = NodeConstraint::new(p.c_rows, p.y, cfg)?;
    solve_node_subproblem_cached(&constraint, p, warm, cfg)
}

/// [`solve_node_subproblem`] against a prebuilt [`NodeConstraint`]; the
/// constraint must have been built from the same `c_rows` and `y`.
pub fn solve_node_subproblem_cached(
    constraint: &NodeConstraint,
    p: &NodeSubproblem,
    warm: Option<&DVector<f64>>,
    cfg: &SolverConfig,
) -> Result<BpSolution, SolverError> {
    cfg.validate()?;
    let q = p.shift.len();
    check_dims(p.c_rows, p.y, q)?;
    if p.linear.len() != q {
        return Err(SolverError::DimensionMismatch {
            rows: p.c_rows.nrows(),
            cols: p.c_rows.ncols(),
            b_len: p.y.len(),
            z_len: p.linear.len(),
        });
    }
    if p.quad < 0.0 || p.l1_weight < 0.0 {
        return Err(SolverError::InvalidConfig(
            "quad and l1_weight must be nonnegative".into(),
        ));
    }
    let projector = &constraint.projector;

    let t = 1.0 / cfg.penalty;
    let a_coef = 1.0 + t * p.quad;
    let thresh = t * p.l1_weight / a_coef;
    let alpha = cfg.over_relaxation;

    let mut z = warm.cloned().unwrap_or_else(|| p.shift.clone());
    let mut u = DVector::zeros(q);
    let mut x = DVector::zeros(q);
    let mut x_prev: Option<DVector<f64>> = None;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < cfg.max_iterations {
        iterations += 1;
        x = projector.project(&(&z - &u));
        let xh = &x * alpha + &z * (1.0 - alpha);
        let z_old = z;
        z = DVector::from_fn(q, |i, _| {
            let s = xh[i] + u[i];
            let base = (s - t * p.linear[i]) / a_coef;
            p.shift[i] + soft_threshold(base - p.shift[i], thresh)
        });
        u += &xh - &z;

        let scale = 1.0 + x.norm();
        let gap = (&x - &z).norm();
        let step = match &x_prev {
            Some(prev) => (&x - prev).norm(),
            None => f64::INFINITY,
        };
        let zstep = (&z - &z_old).norm();
        x_prev = Some(x.clone());
        if gap <= cfg.feas_tol * scale
            && step <= cfg.step_tol * scale
            && zstep <= cfg.step_tol * scale
        {
            converged = true;
            break;
        }
    }

    let objective = p.l1_weight * (&x - p.shift).abs().sum()
        + p.linear.dot(&x)
        + 0.5 * p.quad * x.norm_squared();
    let residual = if p.c_rows.nrows() == 0 {
        0.0
    } else {
        (p.c_rows * &x - p.y).norm()
    };
    Ok(BpSolution {
        z: x,
        objective,
        constraint_residual: residual,
        iterations,
        converged,
    })
}

/// Least-squares dual certificate for an equality-constrained solve.
#[derive(Debug, Clone)]
pub struct CertificateReport {
    pub lambda: DVector<f64>,
    /// How far `A^T lambda` is from a valid subgradient of `||. - shift||_1`
    /// at `z` (0 certifies optimality).
    pub max_violation: f64,
    /// True when some clearly-nonzero coordinate of `z - shift` sees
    /// `|A^T lambda|` strictly inside the unit interval: the solution set may
    /// not be a single point.
    pub potentially_degenerate: bool,
}

/// Fits `lambda` by least squares on the active-sign system and reports how
/// well `A^T lambda` matches a subgradient of the shifted l1 norm at `z`.
pub fn optimality_certificate(
    a: &DMatrix<f64>,
    shift: &DVector<f64>,
    z: &DVector<f64>,
    active_tol: f64,
) -> CertificateReport {
    let q = a.ncols();
    let p = a.nrows();
    let mut active: Vec<(usize, f64)> = Vec::new();
    for i in 0..q {
        let d = z[i] - shift[i];
        if d.abs() > active_tol {
            active.push((i, d.signum()));
        }
    }
    let lambda = if active.is_empty() || p == 0 {
        DVector::zeros(p)
    } else {
        let mut g = DMatrix::zeros(active.len(), p);
        let mut s = DVector::zeros(active.len());
        for (r, &(i, sign)) in active.iter().enumerate() {
            for j in 0..p {
                g[(r, j)] = a[(j, i)];
            }
            s[r] = sign;
        }
        linalg::pseudoinverse(&g, RANK_REL_TOL) * s
    };
    let full = a.transpose() * &lambda;
    let mut max_violation: f64 = 0.0;
    let mut potentially_degenerate = false;
    let mut idx = 0;
    for i in 0..q {
        if idx < active.len() && active[idx].0 == i {
            max_violation = max_violation.max((full[i] - active[idx].1).abs());
            if full[i].abs() < 1.0 - active_tol {
                potentially_degenerate = true;
            }
            idx += 1;
        } else {
            max_violation = max_violation.max((full[i].abs() - 1.0).max(0.0));
        }
    }
    CertificateReport {
        lambda,
        max_violation,
        potentially_degenerate,
    }
}
