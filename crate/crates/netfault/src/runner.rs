//! Scenario execution: simulate the network truth, drive the requested
//! estimators over it, and write traces to CSV plus a JSON summary.
//!
//! All randomness (fault values at load time, disturbances at run time) is
//! drawn from seeded generators, and floats are written in Rust's shortest
//! round-trip form, so every output file is byte-stable for a given scenario.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

use crate::analysis::{eta, fault_error_bound};
use crate::distributed::{DistributedError, DistributedEstimator, DistributedStepRecord};
use crate::estimator::{Estimator, EstimatorError, EstimatorKind};
use crate::plant::{LeaderMode, PlantError};
use crate::scenario::{EstimatorChoice, Scenario};

/// State-error bound assumed to survive an exactly-solved step; seeds the
/// error-recursion column of the trace.
pub const D_BAR_DEFAULT: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error(transparent)]
    Plant(#[from] PlantError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error(transparent)]
    Distributed(#[from] DistributedError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("invalid run request: {0}")]
    Invalid(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunnerError + '_ {
    move |source| RunnerError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Disturbance generator, domain-separated from fault materialization.
fn noise_rng(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed ^ 0x517c_c1b7_2722_0a95)
}

fn uniform_vec(rng: &mut ChaCha12Rng, len: usize, amplitude: f64) -> DVector<f64> {
    DVector::from_fn(len, |_, _| rng.gen_range(-amplitude..=amplitude))
}

/// One step of the simulated network.
#[derive(Debug, Clone)]
pub struct TruthStep {
    pub k: usize,
    pub mode: LeaderMode,
    /// True stacked state `x(k)`.
    pub x: DVector<f64>,
    /// Input `u(k)` the controller applied at this step.
    pub u: DVector<f64>,
    /// Stacked fault `f(k)` that entered this state.
    pub fault: DVector<f64>,
    /// Measurement taken at this step, noise included.
    pub y: DVector<f64>,
}

#[derive(Debug, Clone)]
pub struct Truth {
    pub steps: Vec<TruthStep>,
}

/// Simulates the truth with exact state feedback:
/// `x(k) = A x(k-1) + B u(k-1) + f(k) + v(k)`, `u(k)` from the control law on
/// the true state, `y(k) = C x(k) + w(k)`.
pub fn simulate_truth(sc: &Scenario) -> Result<Truth, RunnerError> {
    let plant = &sc.plant;
    let mut rng = noise_rng(sc.seed);
    let mut steps = Vec::with_capacity(sc.horizon);
    let mut x = sc.initial_state.clone();
    let mut u_prev = DVector::zeros(plant.input_dim());
    for k in 0..sc.horizon {
        let fault = sc
            .faults
            .stacked(k, plant.node_count(), plant.node_state_dim());
        if k > 0 {
            x = plant.a() * &x + plant.b() * &u_prev + &fault;
            if sc.noise.v_max > 0.0 {
                x += uniform_vec(&mut rng, x.len(), sc.noise.v_max);
            }
        }
        let mode = sc.mode_at(k);
        let mut y = plant.measure(&x, mode)?;
        if sc.noise.w_max > 0.0 {
            y += uniform_vec(&mut rng, y.len(), sc.noise.w_max);
        }
        let u = sc.control.eval(plant, &x)?;
        steps.push(TruthStep {
            k,
            mode,
            x: x.clone(),
            u: u.clone(),
            fault,
            y,
        });
        u_prev = u;
    }
    Ok(Truth { steps })
}

/// One trace row of a centralized estimator.
#[derive(Debug, Clone)]
pub struct EstimatorTraceRow {
    pub k: usize,
    pub mode: LeaderMode,
    pub fault_count: usize,
    pub x: DVector<f64>,
    pub x_hat: DVector<f64>,
    pub fault: DVector<f64>,
    pub f_hat: DVector<f64>,
    pub err_x_l2: f64,
    pub err_x_l1: f64,
    pub err_f_l1: f64,
    /// Worst-case state-error level `d(k)` from the error recursion; `None`
    /// once the recovery limit is exceeded in non-active mode.
    pub d_bound: Option<f64>,
    /// A-priori bound on `||f - f_hat||_1` for this step (non-active mode
    /// within the recovery limit only).
    pub fault_bound: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub ambiguous: bool,
}

#[derive(Debug, Clone)]
pub struct EstimatorRun {
    pub choice: EstimatorChoice,
    pub rows: Vec<EstimatorTraceRow>,
}

fn build_estimator(sc: &Scenario, choice: EstimatorChoice) -> Result<Estimator, RunnerError> {
    let kind = match choice {
        EstimatorChoice::L1 => EstimatorKind::L1,
        EstimatorChoice::L1Denoise => EstimatorKind::L1Denoise {
            w_max: sc.noise.w_max,
        },
        EstimatorChoice::Kalman => EstimatorKind::Kalman {
            p_scale: sc.kalman_p_scale,
            v_scale: sc.kalman_v_scale,
        },
        EstimatorChoice::Distributed => {
            return Err(RunnerError::Invalid(
                "the distributed estimator does not run through the centralized loop".into(),
            ))
        }
    };
    Ok(Estimator::new(kind, sc.solver, sc.plant.state_dim()))
}

/// Tracks the worst-case error recursion alongside a run.
struct BoundTracker {
    eta: f64,
    m: usize,
    v_l1: f64,
    d_prev: Option<f64>,
}

impl BoundTracker {
    fn new(sc: &Scenario) -> Self {
        Self {
            eta: eta(sc.plant.a()),
            m: sc.plant.node_count(),
            v_l1: sc.noise.v_max * sc.plant.state_dim() as f64,
            d_prev: Some(D_BAR_DEFAULT),
        }
    }

    /// Advances past step `k`; returns `(d(k), fault_bound(k))`.
    fn advance(&mut self, mode: LeaderMode, fault_count: usize) -> (Option<f64>, Option<f64>) {
        match mode {
            LeaderMode::Active => {
                self.d_prev = Some(D_BAR_DEFAULT);
                (self.d_prev, None)
            }
            LeaderMode::NonActive => {
                let next = self.d_prev.and_then(|d| {
                    fault_error_bound(self.m, fault_count, self.eta, d)
                        .ok()
                        .map(|r| (r.fault_bound, r.state_growth_factor * d + self.v_l1))
                });
                match next {
                    Some((fault_bound, d)) => {
                        self.d_prev = Some(d);
                        (Some(d), Some(fault_bound))
                    }
                    None => {
                        self.d_prev = None;
                        (None, None)
                    }
                }
            }
        }
    }
}

fn estimator_row(
    step: &TruthStep,
    fault_count: usize,
    x_hat: DVector<f64>,
    f_hat: DVector<f64>,
    bounds: (Option<f64>, Option<f64>),
    iterations: usize,
    converged: bool,
    ambiguous: bool,
) -> EstimatorTraceRow {
    let err_x = &step.x - &x_hat;
    let err_f = &step.fault - &f_hat;
    EstimatorTraceRow {
        k: step.k,
        mode: step.mode,
        fault_count,
        x: step.x.clone(),
        x_hat,
        fault: step.fault.clone(),
        f_hat,
        err_x_l2: err_x.norm(),
        err_x_l1: err_x.abs().sum(),
        err_f_l1: err_f.abs().sum(),
        d_bound: bounds.0,
        fault_bound: bounds.1,
        iterations,
        converged,
        ambiguous,
    }
}

/// Runs one centralized estimator over a prerecorded truth.
pub fn run_centralized(
    sc: &Scenario,
    choice: EstimatorChoice,
    truth: &Truth,
) -> Result<EstimatorRun, RunnerError> {
    let mut est = build_estimator(sc, choice)?;
    let mut bounds = BoundTracker::new(sc);
    let mut u_prev = DVector::zeros(sc.plant.input_dim());
    let mut rows = Vec::with_capacity(truth.steps.len());
    for step in &truth.steps {
        let estimate = est.step(&sc.plant, &step.y, &u_prev, step.mode)?;
        let fault_count = sc.faults.support(step.k).len();
        let b = bounds.advance(step.mode, fault_count);
        rows.push(estimator_row(
            step,
            fault_count,
            estimate.x_hat,
            estimate.f_hat,
            b,
            estimate.iterations,
            estimate.converged,
            estimate.may_be_nonunique,
        ));
        u_prev = step.u.clone();
    }
    Ok(EstimatorRun { choice, rows })
}

/// Distributed trace: one record per step, carrying all per-node estimates.
#[derive(Debug, Clone)]
pub struct DistributedRun {
    pub rows: Vec<DistributedStepRow>,
}

#[derive(Debug, Clone)]
pub struct DistributedStepRow {
    pub k: usize,
    pub mode: LeaderMode,
    pub fault_count: usize,
    pub record: DistributedStepRecord,
}

pub fn run_distributed(sc: &Scenario, truth: &Truth) -> Result<DistributedRun, RunnerError> {
    let mut est = DistributedEstimator::new(
        sc.plant.clone(),
        sc.control.clone(),
        sc.distributed.clone(),
    )?;
    let mut rows = Vec::with_capacity(truth.steps.len());
    for step in &truth.steps {
        let record = est.step(&step.y, step.mode)?;
        rows.push(DistributedStepRow {
            k: step.k,
            mode: step.mode,
            fault_count: sc.faults.support(step.k).len(),
            record,
        });
    }
    Ok(DistributedRun { rows })
}

/// Everything produced by one scenario execution.
#[derive(Debug, Clone)]
pub struct ScenarioRunResult {
    pub name: String,
    pub truth: Truth,
    pub centralized: Vec<EstimatorRun>,
    pub distributed: Option<DistributedRun>,
}

/// Open-loop run: the truth evolves under exact state feedback and every
/// requested estimator observes the same measurement stream.
pub fn run_scenario(sc: &Scenario) -> Result<ScenarioRunResult, RunnerError> {
    let truth = simulate_truth(sc)?;
    let mut centralized = Vec::new();
    let mut distributed = None;
    for &choice in &sc.estimators {
        if choice == EstimatorChoice::Distributed {
            distributed = Some(run_distributed(sc, &truth)?);
        } else {
            centralized.push(run_centralized(sc, choice, &truth)?);
        }
    }
    Ok(ScenarioRunResult {
        name: sc.name.clone(),
        truth,
        centralized,
        distributed,
    })
}

/// One estimator run in closed loop: the controller acts on the estimate.
#[derive(Debug, Clone)]
pub struct ClosedLoopRun {
    pub choice: EstimatorChoice,
    pub truth: Truth,
    pub run: EstimatorRun,
}

/// Closed-loop run: `u(k)` comes from the control law evaluated on the
/// estimate, so each estimator produces its own truth trajectory. The
/// disturbance realization is replayed identically for every estimator.
pub fn run_closed_loop(sc: &Scenario) -> Result<Vec<ClosedLoopRun>, RunnerError> {
    if sc.estimators.contains(&EstimatorChoice::Distributed) {
        return Err(RunnerError::Invalid(
            "closed-loop runs support centralized estimators only".into(),
        ));
    }
    let plant = &sc.plant;
    let mut runs = Vec::new();
    for &choice in &sc.estimators {
        let mut est = build_estimator(sc, choice)?;
        let mut bounds = BoundTracker::new(sc);
        let mut rng = noise_rng(sc.seed);
        let mut x = sc.initial_state.clone();
        let mut u_prev = DVector::zeros(plant.input_dim());
        let mut steps = Vec::with_capacity(sc.horizon);
        let mut rows = Vec::with_capacity(sc.horizon);
        for k in 0..sc.horizon {
            let fault = sc
                .faults
                .stacked(k, plant.node_count(), plant.node_state_dim());
            if k > 0 {
                x = plant.a() * &x + plant.b() * &u_prev + &fault;
                if sc.noise.v_max > 0.0 {
                    x += uniform_vec(&mut rng, x.len(), sc.noise.v_max);
                }
            }
            let mode = sc.mode_at(k);
            let mut y = plant.measure(&x, mode)?;
            if sc.noise.w_max > 0.0 {
                y += uniform_vec(&mut rng, y.len(), sc.noise.w_max);
            }
            let estimate = est.step(plant, &y, &u_prev, mode)?;
            let u = sc.control.eval(plant, &estimate.x_hat)?;
            let step = TruthStep {
                k,
                mode,
                x: x.clone(),
                u: u.clone(),
                fault,
                y,
            };
            let fault_count = sc.faults.support(k).len();
            let b = bounds.advance(mode, fault_count);
            rows.push(estimator_row(
                &step,
                fault_count,
                estimate.x_hat,
                estimate.f_hat,
                b,
                estimate.iterations,
                estimate.converged,
                estimate.may_be_nonunique,
            ));
            steps.push(step);
            u_prev = u;
        }
        runs.push(ClosedLoopRun {
            choice,
            truth: Truth { steps },
            run: EstimatorRun { choice, rows },
        });
    }
    Ok(runs)
}

fn push_headers(line: &mut String, prefix: &str, len: usize) {
    for i in 0..len {
        line.push(',');
        let _ = write!(line, "{prefix}_{i}");
    }
}

fn push_values(line: &mut String, v: &DVector<f64>) {
    for value in v.iter() {
        line.push(',');
        let _ = write!(line, "{value}");
    }
}

fn opt_cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes one centralized estimator trace as CSV.
pub fn write_centralized_csv(path: &Path, run: &EstimatorRun) -> Result<(), RunnerError> {
    let mut out = String::new();
    let dim = run.rows.first().map_or(0, |r| r.x.len());
    out.push_str(
        "k,a1,fault_count,iterations,converged,ambiguous,err_x_l2,err_x_l1,err_f_l1,d_bound,fault_bound",
    );
    push_headers(&mut out, "x", dim);
    push_headers(&mut out, "xhat", dim);
    push_headers(&mut out, "f", dim);
    push_headers(&mut out, "fhat", dim);
    out.push('\n');
    for r in &run.rows {
        let _ = write!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.k,
            r.mode.a1(),
            r.fault_count,
            r.iterations,
            r.converged,
            r.ambiguous,
            r.err_x_l2,
            r.err_x_l1,
            r.err_f_l1,
            opt_cell(r.d_bound),
            opt_cell(r.fault_bound),
        );
        push_values(&mut out, &r.x);
        push_values(&mut out, &r.x_hat);
        push_values(&mut out, &r.fault);
        push_values(&mut out, &r.f_hat);
        out.push('\n');
    }
    std::fs::write(path, out).map_err(io_err(path))
}

/// Writes the distributed trace as CSV, one row per step and node.
pub fn write_distributed_csv(
    path: &Path,
    truth: &Truth,
    run: &DistributedRun,
) -> Result<(), RunnerError> {
    let mut out = String::new();
    let dim = truth.steps.first().map_or(0, |s| s.x.len());
    out.push_str("k,a1,fault_count,node,rounds,converged,disagreement_linf,err_x_l2,err_f_l1,flagged");
    push_headers(&mut out, "x", dim);
    push_headers(&mut out, "chihat", dim);
    push_headers(&mut out, "sigmahat", dim);
    out.push('\n');
    for (row, step) in run.rows.iter().zip(&truth.steps) {
        for (node0, estimate) in row.record.estimates.iter().enumerate() {
            let sigma = &row.record.fault_estimates[node0];
            let flagged = row.record.flagged[node0]
                .iter()
                .map(|id| id.to_string())
                .collect::<Vec<_>>()
                .join(";");
            let _ = write!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                row.k,
                row.mode.a1(),
                row.fault_count,
                node0 + 1,
                row.record.rounds,
                row.record.all_converged,
                row.record.disagreement(),
                (estimate - &step.x).norm(),
                (sigma - &step.fault).abs().sum(),
                flagged,
            );
            push_values(&mut out, &step.x);
            push_values(&mut out, estimate);
            push_values(&mut out, sigma);
            out.push('\n');
        }
    }
    std::fs::write(path, out).map_err(io_err(path))
}

/// Writes a compact machine-readable summary of a run.
pub fn write_summary_json(path: &Path, result: &ScenarioRunResult) -> Result<(), RunnerError> {
    let mut estimators = Vec::new();
    for run in &result.centralized {
        let max_err_x = run.rows.iter().map(|r| r.err_x_l2).fold(0.0, f64::max);
        let max_err_f = run.rows.iter().map(|r| r.err_f_l1).fold(0.0, f64::max);
        let final_err_x = run.rows.last().map_or(0.0, |r| r.err_x_l2);
        estimators.push(serde_json::json!({
            "name": run.choice.name(),
            "max_err_x_l2": max_err_x,
            "final_err_x_l2": final_err_x,
            "max_err_f_l1": max_err_f,
            "all_converged": run.rows.iter().all(|r| r.converged),
            "ambiguous_steps": run.rows.iter().filter(|r| r.ambiguous).count(),
        }));
    }
    let distributed = result.distributed.as_ref().map(|run| {
        let max_disagreement = run
            .rows
            .iter()
            .map(|r| r.record.disagreement())
            .fold(0.0, f64::max);
        let flagged_union: BTreeSet<usize> = run
            .rows
            .iter()
            .flat_map(|r| r.record.flagged.iter().flatten().copied())
            .collect();
        serde_json::json!({
            "max_disagreement_linf": max_disagreement,
            "max_rounds": run.rows.iter().map(|r| r.record.rounds).max().unwrap_or(0),
            "all_converged": run.rows.iter().all(|r| r.record.all_converged),
            "nodes_ever_flagged": flagged_union,
        })
    });
    let doc = serde_json::json!({
        "name": result.name,
        "steps": result.truth.steps.len(),
        "estimators": estimators,
        "distributed": distributed,
    });
    let text = serde_json::to_string_pretty(&doc).expect("json values serialize") + "\n";
    std::fs::write(path, text).map_err(io_err(path))
}

/// Sweep request: rerun the scenario with `1..=mf` faulty nodes per cell.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    /// Fault-count cells, e.g. `[1, 2, 3, 4, 5, 6]`.
    pub fault_counts: Vec<usize>,
    /// Inclusive fault window; should match the scenario's non-active window.
    pub window: (usize, usize),
    /// Per-agent coordinates the random fault drives.
    pub coords: Vec<usize>,
    /// Uniform fault-value range.
    pub range: (f64, f64),
}

#[derive(Debug, Clone)]
pub struct SweepCell {
    pub fault_count: usize,
    pub seed: u64,
    /// `sum ||x_hat(k) - x(k)||_2` over the window interior (start excluded).
    pub cumulative_err_x_l2: f64,
    pub final_err_x_l2: f64,
}

/// Runs the centralized l1 estimator once per fault count, with faults on
/// nodes `1..=count` drawn uniformly per step from the cell's own seed.
pub fn sweep_fault_count(sc: &Scenario, spec: &SweepSpec) -> Result<Vec<SweepCell>, RunnerError> {
    let n = sc.plant.node_state_dim();
    let m = sc.plant.node_count();
    if spec.fault_counts.is_empty() {
        return Err(RunnerError::Invalid("sweep needs at least one cell".into()));
    }
    if spec.window.0 == 0 || spec.window.0 > spec.window.1 || spec.window.1 >= sc.horizon {
        return Err(RunnerError::Invalid(format!(
            "sweep window {:?} must fit in 1..{}",
            spec.window, sc.horizon
        )));
    }
    if spec.coords.is_empty() || spec.coords.iter().any(|&c| c >= n) {
        return Err(RunnerError::Invalid(format!(
            "sweep coords {:?} must be nonempty and below n = {n}",
            spec.coords
        )));
    }
    if spec.range.0 > spec.range.1 {
        return Err(RunnerError::Invalid("sweep range is empty".into()));
    }
    let coords: BTreeSet<usize> = spec.coords.iter().copied().collect();

    let mut cells = Vec::new();
    for &count in &spec.fault_counts {
        if count > m {
            return Err(RunnerError::Invalid(format!(
                "cannot fault {count} of {m} nodes"
            )));
        }
        let seed = sc.seed + count as u64;
        let mut cell = sc.clone();
        cell.seed = seed;
        cell.estimators = vec![EstimatorChoice::L1];
        let mut faults = crate::plant::FaultSchedule::new();
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        for node in 1..=count {
            for k in spec.window.0..=spec.window.1 {
                let mut value = DVector::zeros(n);
                for &c in &coords {
                    value[c] = rng.gen_range(spec.range.0..=spec.range.1);
                }
                faults.add(k, node, value);
            }
        }
        cell.faults = faults;

        let result = run_scenario(&cell)?;
        let rows = &result.centralized[0].rows;
        let cumulative: f64 = rows
            .iter()
            .filter(|r| r.k > spec.window.0 && r.k <= spec.window.1)
            .map(|r| r.err_x_l2)
            .sum();
        cells.push(SweepCell {
            fault_count: count,
            seed,
            cumulative_err_x_l2: cumulative,
            final_err_x_l2: rows.last().map_or(0.0, |r| r.err_x_l2),
        });
    }
    Ok(cells)
}

pub fn write_sweep_csv(path: &Path, cells: &[SweepCell]) -> Result<(), RunnerError> {
    let mut out = String::from("fault_count,seed,cumulative_err_x_l2,final_err_x_l2\n");
    for c in cells {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            c.fault_count, c.seed, c.cumulative_err_x_l2, c.final_err_x_l2
        );
    }
    std::fs::write(path, out).map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = r#"
        name = "small"
        nodes = 3
        edges = [[2, 1], [3, 2]]
        horizon = 8
        seed = 3
        estimators = ["l1", "kalman"]
        initial_state = [2.0, 4.0, 6.0]

        [dynamics]
        preset = "integrator"

        [[fault]]
        node = 1
        k_start = 3
        k_end = 4
        vector = [-3.0]

        [[leader_mode]]
        k_start = 2
        k_end = 6
        a1 = 0
    "#;

    fn small() -> Scenario {
        Scenario::from_toml_str(SMALL).unwrap()
    }

    #[test]
    fn truth_accumulates_faults_through_dynamics() {
        let truth = simulate_truth(&small()).unwrap();
        let at = |k: usize, i: usize| truth.steps[k].x[i];
        assert_eq!(at(0, 0), 2.0);
        assert_eq!(at(2, 0), 2.0);
        assert_eq!(at(3, 0), -1.0, "first fault step");
        assert_eq!(at(4, 0), -4.0, "faults add through the integrator");
        assert_eq!(at(7, 0), -4.0, "state persists after the window");
        assert_eq!(at(7, 1), 4.0);
        // Measurement dimensions follow the leader mode.
        assert_eq!(truth.steps[0].y.len(), 3);
        assert_eq!(truth.steps[2].y.len(), 2);
    }

    #[test]
    fn l1_tracks_while_kalman_smears() {
        let sc = small();
        let result = run_scenario(&sc).unwrap();
        assert_eq!(result.centralized.len(), 2);
        let l1 = &result.centralized[0];
        assert_eq!(l1.choice, EstimatorChoice::L1);
        for row in &l1.rows {
            assert!(row.err_x_l2 < 1e-6, "k={} err={}", row.k, row.err_x_l2);
            assert!(row.converged);
        }
        // The fault estimate nails the injected value during the window.
        assert!((l1.rows[3].f_hat[0] + 3.0).abs() < 1e-6);
        assert_eq!(l1.rows[3].fault_count, 1);

        let kalman = &result.centralized[1];
        let worst = kalman
            .rows
            .iter()
            .skip(3)
            .map(|r| r.err_x_l2)
            .fold(0.0, f64::max);
        assert!(worst > 0.5, "kalman should miss the fault, worst {worst}");
    }

    #[test]
    fn bound_columns_follow_the_mode_schedule() {
        let sc = small();
        let result = run_scenario(&sc).unwrap();
        let rows = &result.centralized[0].rows;
        // Active steps pin the bound at the exact-recovery floor.
        assert_eq!(rows[0].d_bound, Some(D_BAR_DEFAULT));
        assert_eq!(rows[0].fault_bound, None);
        // Non-active steps inside the recovery limit grow it.
        assert!(rows[3].d_bound.unwrap() > rows[2].d_bound.unwrap());
        assert!(rows[3].fault_bound.is_some());
        // M = 3, one faulty node, eta = 3: growth (3M-4)/(M-2) * eta = 15,
        // fault factor 2(M-1)/(M-2) * eta = 12.
        let d2 = rows[2].d_bound.unwrap();
        assert!((rows[3].fault_bound.unwrap() - 12.0 * d2).abs() < 1e-12);
        assert!((rows[3].d_bound.unwrap() - 15.0 * d2).abs() < 1e-12);
    }

    #[test]
    fn closed_loop_matches_open_loop_without_control() {
        let sc = small();
        let open = run_scenario(&sc).unwrap();
        let closed = run_closed_loop(&sc).unwrap();
        // With the zero law the loops coincide step for step.
        for (o, c) in open.centralized[0].rows.iter().zip(&closed[0].run.rows) {
            assert_eq!(o.x, c.x);
            assert_eq!(o.x_hat, c.x_hat);
        }
    }

    #[test]
    fn distributed_run_records_every_node() {
        let doc = SMALL
            .replace("estimators = [\"l1\", \"kalman\"]", "estimators = [\"distributed\"]")
            .replace("horizon = 8", "horizon = 5")
            + "\n[distributed]\nl_max = 150\nconsensus_tol = 1e-7\n";
        let sc = Scenario::from_toml_str(&doc).unwrap();
        let result = run_scenario(&sc).unwrap();
        let run = result.distributed.as_ref().unwrap();
        assert_eq!(run.rows.len(), 5);
        for (row, step) in run.rows.iter().zip(&result.truth.steps) {
            assert_eq!(row.record.estimates.len(), 3);
            for estimate in &row.record.estimates {
                assert!(
                    (estimate - &step.x).amax() < 1e-2,
                    "k={} estimate {estimate} truth {}",
                    row.k,
                    step.x
                );
            }
        }
        // The faulty window flags node 1 everywhere.
        for row in run.rows.iter().filter(|r| r.fault_count > 0) {
            for flags in &row.record.flagged {
                assert_eq!(*flags, BTreeSet::from([1]));
            }
        }
    }

    #[test]
    fn csv_and_summary_outputs_are_byte_stable() {
        let sc = small();
        let result = run_scenario(&sc).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let c1 = dir.path().join("a.csv");
        let c2 = dir.path().join("b.csv");
        write_centralized_csv(&c1, &result.centralized[0]).unwrap();
        let again = run_scenario(&sc).unwrap();
        write_centralized_csv(&c2, &again.centralized[0]).unwrap();
        let b1 = std::fs::read(&c1).unwrap();
        let b2 = std::fs::read(&c2).unwrap();
        assert_eq!(b1, b2);
        let header = String::from_utf8(b1.split(|&b| b == b'\n').next().unwrap().to_vec()).unwrap();
        assert_eq!(
            header,
            "k,a1,fault_count,iterations,converged,ambiguous,err_x_l2,err_x_l1,err_f_l1,d_bound,\
             fault_bound,x_0,x_1,x_2,xhat_0,xhat_1,xhat_2,f_0,f_1,f_2,fhat_0,fhat_1,fhat_2"
        );

        let s1 = dir.path().join("s.json");
        write_summary_json(&s1, &result).unwrap();
        let text = std::fs::read_to_string(&s1).unwrap();
        let parsed: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(parsed["name"], "small");
        assert_eq!(parsed["estimators"][0]["name"], "l1");
    }

    #[test]
    fn sweep_runs_each_cell_with_its_own_seed() {
        let doc = r#"
            name = "mini_sweep"
            nodes = 4
            edges = [[2, 1], [3, 2], [4, 3]]
            horizon = 16
            seed = 11
            estimators = ["l1"]
            initial_state = [0.0, 0.0, 0.0, 0.0]

            [dynamics]
            preset = "integrator"

            [[leader_mode]]
            k_start = 5
            k_end = 12
            a1 = 0
        "#;
        let sc = Scenario::from_toml_str(doc).unwrap();
        let spec = SweepSpec {
            fault_counts: vec![1, 2],
            window: (5, 12),
            coords: vec![0],
            range: (-10.0, 10.0),
        };
        let cells = sweep_fault_count(&sc, &spec).unwrap();
        assert_eq!(cells.len(), 2);
        assert_eq!(cells[0].seed, 12);
        assert_eq!(cells[1].seed, 13);
        assert!(cells[0].cumulative_err_x_l2.is_finite());
        // Two faulty nodes of four reach the recovery limit; one stays below.
        assert!(cells[1].cumulative_err_x_l2 > 10.0 * cells[0].cumulative_err_x_l2.max(1e-9));

        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sweep.csv");
        write_sweep_csv(&p, &cells).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("fault_count,seed,"));
        assert_eq!(text.lines().count(), 3);
    }
}
