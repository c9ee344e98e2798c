//! Distributed estimator: each node solves a local l1 subproblem over the
//! measurement rows it owns and exchanges iterates with its graph neighbors.
//!
//! The network must be bipartite. Within one measurement step the two classes
//! alternate: every node in the first class updates from its neighbors' last
//! deposits, then every node in the second class updates against the fresh
//! first-class iterates, then all dual variables advance. Updates inside a
//! phase touch disjoint state (a node writes only to opposite-class
//! mailboxes), so the result does not depend on the order nodes are visited
//! within a phase; consensus penalties drive all local iterates to a common
//! stacked-state estimate.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::graph::{Bipartition, GraphError, NodeId};
use crate::plant::{ControlLaw, LeaderMode, NetworkPlant, PlantError};
use crate::solver::{
    solve_node_subproblem_cached, NodeConstraint, NodeSubproblem, SolverConfig, SolverError,
};

#[derive(Debug, Error)]
pub enum DistributedError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Plant(#[from] PlantError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("measurement has length {got}, the {mode:?} mode expects {expected}")]
    MeasurementLength {
        expected: usize,
        got: usize,
        mode: LeaderMode,
    },
    #[error("phase order for class {class} is not a permutation of that class")]
    BadOrder { class: u8 },
    #[error("invalid round configuration: {0}")]
    Config(&'static str),
    #[error("node {node} outside 1..={count}")]
    NodeOutOfRange { node: NodeId, count: usize },
    #[error("prior for node {node} has length {got}, expected {expected}")]
    PriorLength {
        node: NodeId,
        expected: usize,
        got: usize,
    },
}

/// Per-step communication and solver budget of the distributed runtime.
#[derive(Debug, Clone)]
pub struct RoundConfig {
    /// Consensus penalty weight; must be positive.
    pub zeta: f64,
    /// Communication rounds per measurement step.
    pub l_max: usize,
    /// Optional smaller round budget used while the leader's absolute
    /// measurement is unavailable.  The mode is broadcast with the schedule,
    /// so every node applies the same budget.  `None` means `l_max` applies
    /// in both modes.
    pub l_max_blind: Option<usize>,
    /// Early-stop threshold on the pairwise iterate disagreement and the
    /// local constraint residuals; 0 disables early stopping.
    pub consensus_tol: f64,
    /// A node flags block `j` as faulty when the corresponding slice of its
    /// fault estimate exceeds this l2 threshold.
    pub detect_eps: f64,
    /// Configuration of the per-node inner solver.
    pub inner: SolverConfig,
}

impl Default for RoundConfig {
    fn default() -> Self {
        Self {
            zeta: 1.0,
            l_max: 500,
            l_max_blind: None,
            consensus_tol: 1e-6,
            detect_eps: 0.5,
            // The outer exchange averages out per-solve noise, but each inner
            // solution feeds every neighbor, so solve a notch tighter.
            inner: SolverConfig::default().tightened(10.0),
        }
    }
}

impl RoundConfig {
    pub fn validate(&self) -> Result<(), DistributedError> {
        if !(self.zeta > 0.0) {
            return Err(DistributedError::Config("zeta must be positive"));
        }
        if self.l_max == 0 {
            return Err(DistributedError::Config("l_max must be at least 1"));
        }
        if self.l_max_blind == Some(0) {
            return Err(DistributedError::Config("l_max_blind must be at least 1"));
        }
        if !(self.consensus_tol >= 0.0) {
            return Err(DistributedError::Config("consensus_tol must be >= 0"));
        }
        if !(self.detect_eps > 0.0) {
            return Err(DistributedError::Config("detect_eps must be positive"));
        }
        self.inner.validate()?;
        Ok(())
    }
}

/// Outcome of one measurement step.
#[derive(Debug, Clone)]
pub struct DistributedStepRecord {
    /// Stacked-state estimate of each node, ascending by node id.
    pub estimates: Vec<DVector<f64>>,
    /// Per-node fault estimate: the node's iterate minus its own prediction.
    pub fault_estimates: Vec<DVector<f64>>,
    /// Maximum pairwise l-infinity disagreement after each executed round.
    pub disagreement_history: Vec<f64>,
    /// Rounds actually executed (at most `l_max`).
    pub rounds: usize,
    /// True when every inner solve in every round converged within budget.
    pub all_converged: bool,
    /// Node blocks each node flags as faulty, ascending by node id.
    pub flagged: Vec<BTreeSet<NodeId>>,
}

impl DistributedStepRecord {
    /// Final-round disagreement (0 for a single node).
    pub fn disagreement(&self) -> f64 {
        self.disagreement_history.last().copied().unwrap_or(0.0)
    }
}

struct NodeRuntime {
    id: NodeId,
    /// Previous-step estimate the node predicts from.
    prior: DVector<f64>,
    /// Current iterate within the round exchange.
    iterate: DVector<f64>,
    dual: DVector<f64>,
    /// Iterates most recently deposited by neighbors, keyed by neighbor id.
    mailbox: BTreeMap<NodeId, DVector<f64>>,
    /// Undirected degree; weights the quadratic consensus term.
    weight: f64,
    /// Prediction for the current step (state plus modeled input effect).
    shift: DVector<f64>,
    c_rows: DMatrix<f64>,
    y: DVector<f64>,
}

/// Runs the node exchange for a fixed plant and shared control law.
pub struct DistributedEstimator {
    plant: NetworkPlant,
    control: ControlLaw,
    config: RoundConfig,
    partition: Bipartition,
    nodes: Vec<NodeRuntime>,
}

impl DistributedEstimator {
    pub fn new(
        plant: NetworkPlant,
        control: ControlLaw,
        config: RoundConfig,
    ) -> Result<Self, DistributedError> {
        config.validate()?;
        let partition = plant.graph().bipartition()?;
        let dim = plant.state_dim();
        let nodes = (1..=plant.node_count())
            .map(|id| NodeRuntime {
                id,
                prior: DVector::zeros(dim),
                iterate: DVector::zeros(dim),
                dual: DVector::zeros(dim),
                mailbox: BTreeMap::new(),
                weight: plant.graph().degree(id) as f64,
                shift: DVector::zeros(dim),
                c_rows: DMatrix::zeros(0, dim),
                y: DVector::zeros(0),
            })
            .collect();
        Ok(Self {
            plant,
            control,
            config,
            partition,
            nodes,
        })
    }

    pub fn plant(&self) -> &NetworkPlant {
        &self.plant
    }

    pub fn partition(&self) -> &Bipartition {
        &self.partition
    }

    pub fn config(&self) -> &RoundConfig {
        &self.config
    }

    /// Estimate node `node` carried out of the last completed step.
    pub fn node_estimate(&self, node: NodeId) -> Result<&DVector<f64>, DistributedError> {
        self.node_index(node).map(|i| &self.nodes[i].prior)
    }

    /// Seeds every node with the same starting estimate.
    pub fn set_priors(&mut self, prior: &DVector<f64>) -> Result<(), DistributedError> {
        if prior.len() != self.plant.state_dim() {
            return Err(DistributedError::PriorLength {
                node: 0,
                expected: self.plant.state_dim(),
                got: prior.len(),
            });
        }
        for node in &mut self.nodes {
            node.prior = prior.clone();
        }
        Ok(())
    }

    pub fn set_prior(&mut self, node: NodeId, prior: DVector<f64>) -> Result<(), DistributedError> {
        if prior.len() != self.plant.state_dim() {
            return Err(DistributedError::PriorLength {
                node,
                expected: self.plant.state_dim(),
                got: prior.len(),
            });
        }
        let i = self.node_index(node)?;
        self.nodes[i].prior = prior;
        Ok(())
    }

    fn node_index(&self, node: NodeId) -> Result<usize, DistributedError> {
        if node == 0 || node > self.nodes.len() {
            return Err(DistributedError::NodeOutOfRange {
                node,
                count: self.nodes.len(),
            });
        }
        Ok(node - 1)
    }

    /// One measurement step with both phases visited in ascending node order.
    pub fn step(
        &mut self,
        y: &DVector<f64>,
        mode: LeaderMode,
    ) -> Result<DistributedStepRecord, DistributedError> {
        let first: Vec<NodeId> = self.partition.class1.iter().copied().collect();
        let second: Vec<NodeId> = self.partition.class2.iter().copied().collect();
        self.step_ordered(y, mode, &first, &second)
    }

    /// One measurement step with explicit within-phase visit orders; the
    /// result is identical for any permutations of the two classes.
    pub fn step_ordered(
        &mut self,
        y: &DVector<f64>,
        mode: LeaderMode,
        first: &[NodeId],
        second: &[NodeId],
    ) -> Result<DistributedStepRecord, DistributedError> {
        let expected = self.plant.measurement_dim(mode);
        if y.len() != expected {
            return Err(DistributedError::MeasurementLength {
                expected,
                got: y.len(),
                mode,
            });
        }
        if first.iter().copied().collect::<BTreeSet<_>>() != self.partition.class1
            || first.len() != self.partition.class1.len()
        {
            return Err(DistributedError::BadOrder { class: 1 });
        }
        if second.iter().copied().collect::<BTreeSet<_>>() != self.partition.class2
            || second.len() != self.partition.class2.len()
        {
            return Err(DistributedError::BadOrder { class: 2 });
        }

        // Stage predictions and measurement rows, then reset the exchange.
        let ranges = self.plant.node_row_ranges(mode);
        let c_full = self.plant.output_matrix(mode);
        let dim = self.plant.state_dim();
        let mut constraints = Vec::with_capacity(self.nodes.len());
        for i in 0..self.nodes.len() {
            let u = self.control.eval(&self.plant, &self.nodes[i].prior)?;
            let node = &mut self.nodes[i];
            node.shift = self.plant.a() * &node.prior + self.plant.b() * u;
            node.c_rows = c_full.rows_range(ranges[i].clone()).clone_owned();
            node.y = y.rows_range(ranges[i].clone()).clone_owned();
            node.iterate = DVector::zeros(dim);
            node.dual = DVector::zeros(dim);
            node.mailbox.clear();
            constraints.push(NodeConstraint::new(&node.c_rows, &node.y, &self.config.inner)?);
        }

        let budget = match mode {
            LeaderMode::Active => self.config.l_max,
            LeaderMode::NonActive => self.config.l_max_blind.unwrap_or(self.config.l_max),
        };
        let mut history = Vec::new();
        let mut all_converged = true;
        let mut rounds = 0;
        for round in 1..=budget {
            rounds = round;
            for &id in first.iter().chain(second.iter()) {
                let i = self.node_index(id)?;
                all_converged &= self.update_node(i, &constraints[i], round)?;
            }
            for i in 0..self.nodes.len() {
                let node = &self.nodes[i];
                let mut drift = &node.iterate * node.weight;
                for deposit in node.mailbox.values() {
                    drift -= deposit;
                }
                let dual_step = drift * self.config.zeta;
                self.nodes[i].dual += dual_step;
            }

            let disagreement = self.max_pairwise_disagreement();
            history.push(disagreement);
            if self.config.consensus_tol > 0.0
                && disagreement <= self.config.consensus_tol
                && self.max_constraint_residual() <= self.config.consensus_tol
            {
                break;
            }
        }

        let n = self.plant.node_state_dim();
        let mut estimates = Vec::with_capacity(self.nodes.len());
        let mut fault_estimates = Vec::with_capacity(self.nodes.len());
        let mut flagged = Vec::with_capacity(self.nodes.len());
        for node in &mut self.nodes {
            let sigma = &node.iterate - &node.shift;
            flagged.push(detect_faults(&sigma, n, self.config.detect_eps));
            estimates.push(node.iterate.clone());
            fault_estimates.push(sigma);
            node.prior = node.iterate.clone();
        }
        Ok(DistributedStepRecord {
            estimates,
            fault_estimates,
            disagreement_history: history,
            rounds,
            all_converged,
            flagged,
        })
    }

    /// Local solve of node index `i`; deposits the fresh iterate with every
    /// neighbor. Returns the inner solver's convergence flag.
    fn update_node(
        &mut self,
        i: usize,
        constraint: &NodeConstraint,
        round: usize,
    ) -> Result<bool, DistributedError> {
        let node = &self.nodes[i];
        let mut linear = node.dual.clone();
        for deposit in node.mailbox.values() {
            linear -= deposit * self.config.zeta;
        }
        let problem = NodeSubproblem {
            c_rows: &node.c_rows,
            y: &node.y,
            shift: &node.shift,
            linear: &linear,
            quad: node.weight * self.config.zeta,
            l1_weight: 1.0 / self.nodes.len() as f64,
        };
        // Round 1 starts from the prediction; later rounds from the node's
        // own previous iterate.
        let warm = (round > 1).then_some(&node.iterate);
        let solution = solve_node_subproblem_cached(constraint, &problem, warm, &self.config.inner)?;

        let id = self.nodes[i].id;
        let neighbors: Vec<NodeId> = self.plant.graph().neighbors(id).iter().copied().collect();
        self.nodes[i].iterate = solution.z.clone();
        for j in neighbors {
            let jx = self.node_index(j)?;
            self.nodes[jx].mailbox.insert(id, solution.z.clone());
        }
        Ok(solution.converged)
    }

    fn max_pairwise_disagreement(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.nodes.len() {
            for j in (i + 1)..self.nodes.len() {
                let diff = (&self.nodes[i].iterate - &self.nodes[j].iterate).amax();
                worst = worst.max(diff);
            }
        }
        worst
    }

    fn max_constraint_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for node in &self.nodes {
            if node.c_rows.nrows() > 0 {
                worst = worst.max((&node.c_rows * &node.iterate - &node.y).amax());
            }
        }
        worst
    }
}

/// Node blocks of a stacked fault estimate whose l2 norm exceeds `eps`.
pub fn detect_faults(sigma: &DVector<f64>, n: usize, eps: f64) -> BTreeSet<NodeId> {
    let mut flagged = BTreeSet::new();
    if n == 0 {
        return flagged;
    }
    for node0 in 0..sigma.len() / n {
        let block = sigma.rows(node0 * n, n);
        if block.norm() > eps {
            flagged.insert(node0 + 1);
        }
    }
    flagged
}
