//! Scenario files: one TOML document describing the network, dynamics,
//! faults, leader-mode windows, control law and estimator settings.
//!
//! Time runs over steps `0..horizon`. Fault and leader windows are inclusive
//! on both ends; overlapping fault windows for the same node sum. Step 0 must
//! be fault-free with an active leader so estimators can lock on from their
//! all-zero initial estimate. Randomized faults are drawn once at load time
//! from the scenario seed, so a file pins its trajectory exactly.

use std::collections::BTreeSet;
use std::path::Path;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::Deserialize;
use thiserror::Error;

use crate::distributed::{DistributedError, RoundConfig};
use crate::graph::{Graph, GraphError, NodeId};
use crate::plant::{
    AgentDynamics, ControlLaw, FaultSchedule, LeaderMode, LeaderSchedule, NetworkPlant, PlantError,
};
use crate::solver::SolverConfig;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("cannot parse scenario: {0}")]
    Parse(#[from] toml::de::Error),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Plant(#[from] PlantError),
    #[error(transparent)]
    Distributed(#[from] DistributedError),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid(msg.into())
}

/// Estimators a scenario can request.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorChoice {
    L1,
    L1Denoise,
    Kalman,
    Distributed,
}

impl EstimatorChoice {
    pub fn name(self) -> &'static str {
        match self {
            EstimatorChoice::L1 => "l1",
            EstimatorChoice::L1Denoise => "l1_denoise",
            EstimatorChoice::Kalman => "kalman",
            EstimatorChoice::Distributed => "distributed",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "l1" => Some(EstimatorChoice::L1),
            "l1_denoise" => Some(EstimatorChoice::L1Denoise),
            "kalman" => Some(EstimatorChoice::Kalman),
            "distributed" => Some(EstimatorChoice::Distributed),
            _ => None,
        }
    }
}

/// Bounded disturbance amplitudes; zero disables a source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    /// Entrywise measurement-noise bound.
    pub w_max: f64,
    /// Entrywise process-noise bound.
    pub v_max: f64,
}

/// A loaded, validated scenario with all randomness materialized.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub plant: NetworkPlant,
    pub horizon: usize,
    pub seed: u64,
    pub estimators: Vec<EstimatorChoice>,
    pub initial_state: DVector<f64>,
    pub faults: FaultSchedule,
    pub leader: LeaderSchedule,
    pub control: ControlLaw,
    pub solver: SolverConfig,
    pub kalman_p_scale: f64,
    pub kalman_v_scale: f64,
    pub noise: NoiseSpec,
    pub distributed: RoundConfig,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: String,
    nodes: usize,
    edges: Vec<[NodeId; 2]>,
    horizon: usize,
    #[serde(default)]
    seed: u64,
    estimators: Vec<String>,
    initial_state: Vec<f64>,
    dynamics: RawDynamics,
    #[serde(default, rename = "fault")]
    faults: Vec<RawFault>,
    #[serde(default, rename = "leader_mode")]
    leader_windows: Vec<RawLeaderWindow>,
    control: Option<RawControl>,
    solver: Option<RawSolver>,
    kalman: Option<RawKalman>,
    noise: Option<RawNoise>,
    distributed: Option<RawDistributed>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDynamics {
    preset: String,
    n: Option<usize>,
    dt: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFault {
    node: NodeId,
    k_start: usize,
    k_end: usize,
    vector: Option<Vec<f64>>,
    random_uniform: Option<[f64; 2]>,
    coords: Option<Vec<usize>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLeaderWindow {
    k_start: usize,
    k_end: usize,
    a1: u8,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawControl {
    law: String,
    c1: Option<f64>,
    c2: Option<f64>,
    v_ref: Option<f64>,
    spacing: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    feas_tol: Option<f64>,
    step_tol: Option<f64>,
    max_iterations: Option<usize>,
    penalty: Option<f64>,
    over_relaxation: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawKalman {
    p_scale: Option<f64>,
    v_scale: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNoise {
    w_max: Option<f64>,
    v_max: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDistributed {
    zeta: Option<f64>,
    l_max: Option<usize>,
    l_max_blind: Option<usize>,
    consensus_tol: Option<f64>,
    detect_eps: Option<f64>,
    /// Iteration cap for each node's inner splitting solve; lower values
    /// bound per-round cost when innovations are large.
    inner_max_iterations: Option<usize>,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ScenarioError> {
        let raw: RawScenario = toml::from_str(text)?;
        raw.build()
    }

    /// Leader mode the scenario prescribes at step `k`.
    pub fn mode_at(&self, k: usize) -> LeaderMode {
        self.leader.mode_at(k)
    }
}

impl RawScenario {
    fn build(self) -> Result<Scenario, ScenarioError> {
        if self.horizon == 0 {
            return Err(invalid("horizon must be at least 1"));
        }
        let edges: Vec<(NodeId, NodeId)> = self.edges.iter().map(|e| (e[0], e[1])).collect();
        let graph = Graph::new(self.nodes, &edges)?;

        let agent = self.dynamics.build()?;
        let n = agent.state_dim();
        let plant = NetworkPlant::homogeneous(graph, agent)?;

        if self.initial_state.len() != plant.state_dim() {
            return Err(invalid(format!(
                "initial_state has {} entries, the network needs {}",
                self.initial_state.len(),
                plant.state_dim()
            )));
        }
        let initial_state = DVector::from_vec(self.initial_state);

        if self.estimators.is_empty() {
            return Err(invalid("estimators must name at least one estimator"));
        }
        let mut estimators = Vec::new();
        for name in &self.estimators {
            let choice = EstimatorChoice::from_name(name)
                .ok_or_else(|| invalid(format!("unknown estimator {name:?}")))?;
            if estimators.contains(&choice) {
                return Err(invalid(format!("estimator {name:?} listed twice")));
            }
            estimators.push(choice);
        }

        let mut leader = LeaderSchedule::always_active();
        for w in &self.leader_windows {
            if w.k_start > w.k_end {
                return Err(invalid(format!(
                    "leader window {}..={} is empty",
                    w.k_start, w.k_end
                )));
            }
            if w.a1 > 1 {
                return Err(invalid("a1 must be 0 or 1"));
            }
            leader.push_window(w.k_start, w.k_end, LeaderMode::from_a1(w.a1));
        }
        if leader.mode_at(0) != LeaderMode::Active {
            return Err(invalid(
                "step 0 must run with an active leader (a1 = 1) so the initial \
                 estimate can lock on",
            ));
        }

        let mut rng = ChaCha12Rng::seed_from_u64(self.seed);
        let mut faults = FaultSchedule::new();
        for f in &self.faults {
            f.materialize(&mut faults, n, self.nodes, self.horizon, &mut rng)?;
        }
        faults.validate(self.nodes, n)?;
        if !faults.support(0).is_empty() {
            return Err(invalid("faults cannot cover step 0"));
        }

        let control = match &self.control {
            None => ControlLaw::Zero,
            Some(c) => c.build(&plant)?,
        };

        let solver = self.solver.as_ref().map_or_else(
            SolverConfig::default,
            |raw| {
                let d = SolverConfig::default();
                SolverConfig {
                    feas_tol: raw.feas_tol.unwrap_or(d.feas_tol),
                    step_tol: raw.step_tol.unwrap_or(d.step_tol),
                    max_iterations: raw.max_iterations.unwrap_or(d.max_iterations),
                    penalty: raw.penalty.unwrap_or(d.penalty),
                    over_relaxation: raw.over_relaxation.unwrap_or(d.over_relaxation),
                }
            },
        );
        solver.validate().map_err(DistributedError::from)?;

        let kalman_p_scale = self
            .kalman
            .as_ref()
            .and_then(|k| k.p_scale)
            .unwrap_or(1e-4);
        let kalman_v_scale = self
            .kalman
            .as_ref()
            .and_then(|k| k.v_scale)
            .unwrap_or(1e-4);
        if kalman_p_scale <= 0.0 || kalman_v_scale <= 0.0 {
            return Err(invalid("kalman scales must be positive"));
        }

        let noise = NoiseSpec {
            w_max: self.noise.as_ref().and_then(|x| x.w_max).unwrap_or(0.0),
            v_max: self.noise.as_ref().and_then(|x| x.v_max).unwrap_or(0.0),
        };
        if noise.w_max < 0.0 || noise.v_max < 0.0 {
            return Err(invalid("noise amplitudes must be nonnegative"));
        }

        let dd = RoundConfig::default();
        let distributed = RoundConfig {
            zeta: self
                .distributed
                .as_ref()
                .and_then(|x| x.zeta)
                .unwrap_or(dd.zeta),
            l_max: self
                .distributed
                .as_ref()
                .and_then(|x| x.l_max)
                .unwrap_or(dd.l_max),
            l_max_blind: self
                .distributed
                .as_ref()
                .and_then(|x| x.l_max_blind)
                .map(Some)
                .unwrap_or(dd.l_max_blind),
            consensus_tol: self
                .distributed
                .as_ref()
                .and_then(|x| x.consensus_tol)
                .unwrap_or(dd.consensus_tol),
            detect_eps: self
                .distributed
                .as_ref()
                .and_then(|x| x.detect_eps)
                .unwrap_or(dd.detect_eps),
            inner: {
                let mut inner = solver.tightened(10.0);
                if let Some(cap) = self.distributed.as_ref().and_then(|x| x.inner_max_iterations)
                {
                    inner.max_iterations = cap;
                }
                inner
            },
        };
        distributed.validate()?;

        Ok(Scenario {
            name: self.name,
            plant,
            horizon: self.horizon,
            seed: self.seed,
            estimators,
            initial_state,
            faults,
            leader,
            control,
            solver,
            kalman_p_scale,
            kalman_v_scale,
            noise,
            distributed,
        })
    }
}

impl RawDynamics {
    fn build(&self) -> Result<AgentDynamics, ScenarioError> {
        match self.preset.as_str() {
            "integrator" => {
                if self.dt.is_some() {
                    return Err(invalid("integrator dynamics take no dt"));
                }
                let n = self.n.unwrap_or(1);
                if n == 0 {
                    return Err(invalid("integrator dimension n must be at least 1"));
                }
                Ok(AgentDynamics::integrator(n))
            }
            "double_integrator" => {
                if self.n.is_some() {
                    return Err(invalid(
                        "double_integrator dynamics fix n = 4; do not set n",
                    ));
                }
                let dt = self.dt.unwrap_or(0.05);
                if !(dt > 0.0) {
                    return Err(invalid("dt must be positive"));
                }
                Ok(AgentDynamics::double_integrator_zoh(dt))
            }
            other => Err(invalid(format!("unknown dynamics preset {other:?}"))),
        }
    }
}

impl RawFault {
    fn materialize(
        &self,
        schedule: &mut FaultSchedule,
        n: usize,
        nodes: usize,
        horizon: usize,
        rng: &mut ChaCha12Rng,
    ) -> Result<(), ScenarioError> {
        if self.node == 0 || self.node > nodes {
            return Err(invalid(format!("fault node {} out of range", self.node)));
        }
        if self.k_start > self.k_end {
            return Err(invalid(format!(
                "fault window {}..={} is empty",
                self.k_start, self.k_end
            )));
        }
        let last = self.k_end.min(horizon - 1);
        match (&self.vector, &self.random_uniform) {
            (Some(vector), None) => {
                if self.coords.is_some() {
                    return Err(invalid("coords only combine with random_uniform"));
                }
                if vector.len() != n {
                    return Err(invalid(format!(
                        "fault vector for node {} has {} entries, agents have n = {}",
                        self.node,
                        vector.len(),
                        n
                    )));
                }
                for k in self.k_start..=last {
                    schedule.add(k, self.node, DVector::from_column_slice(vector));
                }
                Ok(())
            }
            (None, Some([lo, hi])) => {
                if lo > hi {
                    return Err(invalid("random_uniform bounds must satisfy lo <= hi"));
                }
                let coords = self
                    .coords
                    .as_ref()
                    .ok_or_else(|| invalid("random_uniform requires coords"))?;
                let set: BTreeSet<usize> = coords.iter().copied().collect();
                if set.len() != coords.len() || coords.is_empty() {
                    return Err(invalid("coords must be nonempty and distinct"));
                }
                if let Some(&bad) = set.iter().find(|&&c| c >= n) {
                    return Err(invalid(format!("coord {bad} out of range for n = {n}")));
                }
                // Draw in (step, coord) order so a file pins its trajectory.
                for k in self.k_start..=last {
                    let mut value = DVector::zeros(n);
                    for &c in &set {
                        value[c] = rng.gen_range(*lo..=*hi);
                    }
                    schedule.add(k, self.node, value);
                }
                Ok(())
            }
            _ => Err(invalid(
                "each fault needs exactly one of vector or random_uniform",
            )),
        }
    }
}

impl RawControl {
    fn build(&self, plant: &NetworkPlant) -> Result<ControlLaw, ScenarioError> {
        match self.law.as_str() {
            "zero" => {
                if self.c1.is_some()
                    || self.c2.is_some()
                    || self.v_ref.is_some()
                    || self.spacing.is_some()
                {
                    return Err(invalid("the zero law takes no parameters"));
                }
                Ok(ControlLaw::Zero)
            }
            "leader_follower" => {
                if plant.node_state_dim() != 4 || plant.node_input_dim() != 2 {
                    return Err(invalid(
                        "leader_follower control needs double_integrator dynamics",
                    ));
                }
                let spacing = self.spacing.unwrap_or(2.0);
                Ok(ControlLaw::LeaderFollower {
                    c1: self.c1.unwrap_or(1.5),
                    c2: self.c2.unwrap_or(1.5),
                    v_ref: self.v_ref.unwrap_or(1.0),
                    slots: ControlLaw::line_slots(plant.node_count(), spacing),
                })
            }
            other => Err(invalid(format!("unknown control law {other:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FULL: &str = r#"
        name = "demo"
        nodes = 3
        edges = [[2, 1], [3, 2]]
        horizon = 10
        seed = 42
        estimators = ["l1", "kalman"]
        initial_state = [2.0, 4.0, 6.0]

        [dynamics]
        preset = "integrator"
        n = 1

        [[fault]]
        node = 1
        k_start = 3
        k_end = 5
        vector = [-3.0]

        [[leader_mode]]
        k_start = 2
        k_end = 8
        a1 = 0

        [solver]
        feas_tol = 1e-9

        [kalman]
        p_scale = 1e-3

        [noise]
        w_max = 0.0

        [distributed]
        l_max = 120
    "#;

    #[test]
    fn full_document_round_trips() {
        let s = Scenario::from_toml_str(FULL).unwrap();
        assert_eq!(s.name, "demo");
        assert_eq!(s.plant.node_count(), 3);
        assert_eq!(s.horizon, 10);
        assert_eq!(
            s.estimators,
            vec![EstimatorChoice::L1, EstimatorChoice::Kalman]
        );
        assert_eq!(s.mode_at(0), LeaderMode::Active);
        assert_eq!(s.mode_at(2), LeaderMode::NonActive);
        assert_eq!(s.mode_at(9), LeaderMode::Active);
        assert_eq!(s.faults.support(3), BTreeSet::from([1]));
        assert_eq!(s.faults.support(6), BTreeSet::new());
        assert_eq!(s.faults.stacked(4, 3, 1), DVector::from_column_slice(&[-3.0, 0.0, 0.0]));
        assert_eq!(s.solver.feas_tol, 1e-9);
        assert_eq!(s.kalman_p_scale, 1e-3);
        assert_eq!(s.kalman_v_scale, 1e-4);
        assert_eq!(s.distributed.l_max, 120);
        // Solver overrides carry into the distributed inner solver.
        assert_eq!(s.distributed.inner.feas_tol, 1e-10);
    }

    #[test]
    fn random_faults_are_deterministic_per_seed() {
        let doc = r#"
            name = "rand"
            nodes = 3
            edges = [[2, 1], [3, 2]]
            horizon = 8
            seed = 7
            estimators = ["l1"]
            initial_state = [0.0, 0.0, 0.0, 0.0, 0.0, 0.0]

            [dynamics]
            preset = "integrator"
            n = 2

            [[fault]]
            node = 2
            k_start = 2
            k_end = 6
            random_uniform = [-10.0, 10.0]
            coords = [1]
        "#;
        let a = Scenario::from_toml_str(doc).unwrap();
        let b = Scenario::from_toml_str(doc).unwrap();
        for k in 0..8 {
            assert_eq!(a.faults.stacked(k, 3, 2), b.faults.stacked(k, 3, 2));
        }
        let f = a.faults.stacked(3, 3, 2);
        assert_eq!(f[2], 0.0, "coord 0 of node 2 untouched");
        assert!(f[3] != 0.0 && f[3].abs() <= 10.0);
        assert_eq!(a.faults.support(7), BTreeSet::new(), "window clipped");
    }

    #[test]
    fn rejects_bad_documents() {
        let reject = |patch: &str, needle: &str| {
            let doc = FULL.replace("seed = 42", patch);
            let err = Scenario::from_toml_str(&doc).unwrap_err().to_string();
            assert!(err.contains(needle), "{err:?} lacks {needle:?}");
        };
        // Unknown top-level keys are refused outright.
        reject("seed = 42\nbogus = 1", "bogus");

        let fault_at_zero = FULL.replace("k_start = 3", "k_start = 0");
        assert!(Scenario::from_toml_str(&fault_at_zero)
            .unwrap_err()
            .to_string()
            .contains("step 0"));

        let non_active_start = FULL.replace("k_start = 2\n        k_end = 8", "k_start = 0\n        k_end = 8");
        assert!(Scenario::from_toml_str(&non_active_start)
            .unwrap_err()
            .to_string()
            .contains("active leader"));

        let bad_estimator = FULL.replace("\"kalman\"", "\"magic\"");
        assert!(Scenario::from_toml_str(&bad_estimator)
            .unwrap_err()
            .to_string()
            .contains("magic"));

        let short_state = FULL.replace("[2.0, 4.0, 6.0]", "[2.0, 4.0]");
        assert!(Scenario::from_toml_str(&short_state)
            .unwrap_err()
            .to_string()
            .contains("initial_state"));

        let bad_vector = FULL.replace("vector = [-3.0]", "vector = [-3.0, 1.0]");
        assert!(Scenario::from_toml_str(&bad_vector)
            .unwrap_err()
            .to_string()
            .contains("fault vector"));
    }

    #[test]
    fn double_integrator_rejects_n_and_defaults_dt() {
        let doc = r#"
            name = "d"
            nodes = 2
            edges = [[2, 1]]
            horizon = 2
            estimators = ["l1"]
            initial_state = [0,0,0,0, 0,0,0,0]

            [dynamics]
            preset = "double_integrator"
        "#;
        let s = Scenario::from_toml_str(doc).unwrap();
        assert_eq!(s.plant.node_state_dim(), 4);
        assert_eq!(s.plant.a()[(0, 2)], 0.05);

        let with_n = doc.replace("preset = \"double_integrator\"", "preset = \"double_integrator\"\nn = 4");
        assert!(Scenario::from_toml_str(&with_n).is_err());
    }

    #[test]
    fn later_leader_windows_win() {
        let doc = FULL.to_string()
            + r#"
        [[leader_mode]]
        k_start = 5
        k_end = 6
        a1 = 1
        "#;
        let s = Scenario::from_toml_str(&doc).unwrap();
        assert_eq!(s.mode_at(4), LeaderMode::NonActive);
        assert_eq!(s.mode_at(5), LeaderMode::Active);
        assert_eq!(s.mode_at(7), LeaderMode::NonActive);
    }

    #[test]
    fn control_law_needs_matching_dynamics() {
        let doc = FULL.to_string()
            + r#"
        [control]
        law = "leader_follower"
        "#;
        let err = Scenario::from_toml_str(&doc).unwrap_err().to_string();
        assert!(err.contains("double_integrator"));
    }
}
