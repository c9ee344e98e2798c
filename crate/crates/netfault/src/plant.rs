//! Stacked network plant: per-agent dynamics, relative-measurement output
//! matrices, fault and leader-mode schedules, and the platoon control law.
//!
//! State layout is node-major: `x = (x_1, ..., x_M)` with each `x_i` of
//! dimension `n`. The output matrix `C_0` stacks one relative block
//! `x_head - x_tail` per oriented edge, ordered by measuring node (leader
//! first) and then by measured neighbour id. `C_1` prepends the leader's
//! absolute block `I_n`, which is what the active leader publishes.

use std::collections::{BTreeMap, BTreeSet};
use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::graph::{Graph, GraphError, NodeId};

#[derive(Debug, Error)]
pub enum PlantError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("A must be square and B must have matching row count (A is {a_rows}x{a_cols}, B has {b_rows} rows)")]
    AgentShape {
        a_rows: usize,
        a_cols: usize,
        b_rows: usize,
    },
    #[error("expected {expected} agents, got {got}")]
    AgentCount { expected: usize, got: usize },
    #[error("agents must share state/input dimensions (node {node} has n={n}, m={m}; expected n={expected_n}, m={expected_m})")]
    MixedDimensions {
        node: NodeId,
        n: usize,
        m: usize,
        expected_n: usize,
        expected_m: usize,
    },
    #[error("state dimension must be at least 1")]
    ZeroStateDim,
    #[error("vector has length {got}, expected {expected} ({what})")]
    VectorLength {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("fault schedule references node {node} outside 1..={node_count}")]
    FaultNodeOutOfRange { node: NodeId, node_count: usize },
    #[error("fault vector for node {node} at step {k} has length {got}, expected {expected}")]
    FaultLength {
        node: NodeId,
        k: usize,
        expected: usize,
        got: usize,
    },
    #[error("control law {law} requires the double-integrator layout (n=4, m=2), plant has n={n}, m={m}")]
    ControlLawShape {
        law: &'static str,
        n: usize,
        m: usize,
    },
    #[error("formation needs one slot per node ({expected}), got {got}")]
    SlotCount { expected: usize, got: usize },
}

/// Per-agent linear dynamics `x_i(k) = A x_i(k-1) + B u_i(k-1) + f_i(k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentDynamics {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
}

impl AgentDynamics {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self, PlantError> {
        if a.nrows() != a.ncols() || b.nrows() != a.nrows() {
            return Err(PlantError::AgentShape {
                a_rows: a.nrows(),
                a_cols: a.ncols(),
                b_rows: b.nrows(),
            });
        }
        if a.nrows() == 0 {
            return Err(PlantError::ZeroStateDim);
        }
        Ok(Self { a, b })
    }

    /// Driftless agent `A = I_n` with no input channel.
    pub fn integrator(n: usize) -> Self {
        Self {
            a: DMatrix::identity(n, n),
            b: DMatrix::zeros(n, 0),
        }
    }

    /// Planar double integrator, state `(p_x, p_y, v_x, v_y)`, acceleration
    /// inputs, discretized exactly under a zero-order hold of length `dt`.
    pub fn double_integrator_zoh(dt: f64) -> Self {
        let a = DMatrix::from_row_slice(
            4,
            4,
            &[
                1.0, 0.0, dt, 0.0, //
                0.0, 1.0, 0.0, dt, //
                0.0, 0.0, 1.0, 0.0, //
                0.0, 0.0, 0.0, 1.0,
            ],
        );
        let h = 0.5 * dt * dt;
        let b = DMatrix::from_row_slice(
            4,
            2,
            &[
                h, 0.0, //
                0.0, h, //
                dt, 0.0, //
                0.0, dt,
            ],
        );
        Self { a, b }
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }
}

/// Leader output mode: `Active` publishes the leader's absolute state next to
/// the relative rows, `NonActive` leaves only relative rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LeaderMode {
    Active,
    NonActive,
}

impl LeaderMode {
    pub fn from_a1(a1: u8) -> Self {
        if a1 == 0 {
            LeaderMode::NonActive
        } else {
            LeaderMode::Active
        }
    }

    pub fn a1(self) -> u8 {
        match self {
            LeaderMode::Active => 1,
            LeaderMode::NonActive => 0,
        }
    }
}

/// Relative-measurement output matrices `(C_0, C_1)` over `g` with per-node
/// state dimension `n`.
///
/// `C_0` holds one `n`-row block `x_head - x_tail` per oriented edge, grouped
/// by measuring node (node 1 first, then ascending) with each node's blocks
/// ordered by measured neighbour id. `C_1` is `C_0` with the leader's
/// absolute block `[I_n 0 ... 0]` stacked on top.
pub fn build_output_matrices(g: &Graph, n: usize) -> Result<(DMatrix<f64>, DMatrix<f64>), PlantError> {
    if n == 0 {
        return Err(PlantError::ZeroStateDim);
    }
    let m = g.node_count();
    let cols = n * m;
    let rel_rows = n * g.edge_count();
    let mut c0 = DMatrix::zeros(rel_rows, cols);
    let mut row = 0;
    for node in 1..=m {
        for tail in g.measured_targets(node) {
            for coord in 0..n {
                c0[(row + coord, (node - 1) * n + coord)] = 1.0;
                c0[(row + coord, (tail - 1) * n + coord)] = -1.0;
            }
            row += n;
        }
    }
    let mut c1 = DMatrix::zeros(rel_rows + n, cols);
    for coord in 0..n {
        c1[(coord, coord)] = 1.0;
    }
    c1.view_mut((n, 0), (rel_rows, cols)).copy_from(&c0);
    Ok((c0, c1))
}

/// Stacked multi-agent plant over a measurement graph.
#[derive(Debug, Clone)]
pub struct NetworkPlant {
    graph: Graph,
    agents: Vec<AgentDynamics>,
    n: usize,
    m_in: usize,
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c0: DMatrix<f64>,
    c1: DMatrix<f64>,
}

impl NetworkPlant {
    /// Builds the stacked plant from per-node dynamics (all agents must share
    /// state and input dimensions so the output blocks line up).
    pub fn new(graph: Graph, agents: Vec<AgentDynamics>) -> Result<Self, PlantError> {
        let node_count = graph.node_count();
        if agents.len() != node_count {
            return Err(PlantError::AgentCount {
                expected: node_count,
                got: agents.len(),
            });
        }
        let n = agents[0].state_dim();
        let m_in = agents[0].input_dim();
        for (i, ag) in agents.iter().enumerate() {
            if ag.state_dim() != n || ag.input_dim() != m_in {
                return Err(PlantError::MixedDimensions {
                    node: i + 1,
                    n: ag.state_dim(),
                    m: ag.input_dim(),
                    expected_n: n,
                    expected_m: m_in,
                });
            }
        }
        let mut a = DMatrix::zeros(n * node_count, n * node_count);
        let mut b = DMatrix::zeros(n * node_count, m_in * node_count);
        for (i, ag) in agents.iter().enumerate() {
            a.view_mut((i * n, i * n), (n, n)).copy_from(&ag.a);
            b.view_mut((i * n, i * m_in), (n, m_in)).copy_from(&ag.b);
        }
        let (c0, c1) = build_output_matrices(&graph, n)?;
        Ok(Self {
            graph,
            agents,
            n,
            m_in,
            a,
            b,
            c0,
            c1,
        })
    }

    /// Same dynamics on every node.
    pub fn homogeneous(graph: Graph, agent: AgentDynamics) -> Result<Self, PlantError> {
        let count = graph.node_count();
        Self::new(graph, vec![agent; count])
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn agents(&self) -> &[AgentDynamics] {
        &self.agents
    }

    pub fn node_count(&self) -> usize {
        self.graph.node_count()
    }

    /// Per-node state dimension `n`.
    pub fn node_state_dim(&self) -> usize {
        self.n
    }

    /// Per-node input dimension `m`.
    pub fn node_input_dim(&self) -> usize {
        self.m_in
    }

    pub fn state_dim(&self) -> usize {
        self.n * self.node_count()
    }

    pub fn input_dim(&self) -> usize {
        self.m_in * self.node_count()
    }

    /// Stacked block-diagonal state matrix.
    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    /// Stacked block-diagonal input matrix.
    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn output_matrix(&self, mode: LeaderMode) -> &DMatrix<f64> {
        match mode {
            LeaderMode::Active => &self.c1,
            LeaderMode::NonActive => &self.c0,
        }
    }

    pub fn measurement_dim(&self, mode: LeaderMode) -> usize {
        self.output_matrix(mode).nrows()
    }

    /// Row ranges of the output matrix owned by each node (index 0 is the
    /// leader). A node owns its own edge blocks; in the active mode the
    /// leader additionally owns the absolute block on top.
    pub fn node_row_ranges(&self, mode: LeaderMode) -> Vec<Range<usize>> {
        let n = self.n;
        let lead_extra = match mode {
            LeaderMode::Active => n,
            LeaderMode::NonActive => 0,
        };
        let mut ranges = Vec::with_capacity(self.node_count());
        let mut row = 0;
        for node in 1..=self.node_count() {
            let own = self.graph.measured_targets(node).len() * n
                + if node == 1 { lead_extra } else { 0 };
            ranges.push(row..row + own);
            row += own;
        }
        debug_assert_eq!(row, self.measurement_dim(mode));
        ranges
    }

    /// One plant step `A x + B u + f`.
    pub fn step_truth(
        &self,
        x_prev: &DVector<f64>,
        u_prev: &DVector<f64>,
        fault: &DVector<f64>,
    ) -> Result<DVector<f64>, PlantError> {
        self.check_len("state", x_prev.len(), self.state_dim())?;
        self.check_len("input", u_prev.len(), self.input_dim())?;
        self.check_len("fault", fault.len(), self.state_dim())?;
        Ok(&self.a * x_prev + &self.b * u_prev + fault)
    }

    /// Noise-free measurement `C x` under the given leader mode.
    pub fn measure(&self, x: &DVector<f64>, mode: LeaderMode) -> Result<DVector<f64>, PlantError> {
        self.check_len("state", x.len(), self.state_dim())?;
        Ok(self.output_matrix(mode) * x)
    }

    fn check_len(&self, what: &'static str, got: usize, expected: usize) -> Result<(), PlantError> {
        if got != expected {
            return Err(PlantError::VectorLength {
                what,
                expected,
                got,
            });
        }
        Ok(())
    }
}

/// Shared control law `u(k) = kappa(x(k))`, evaluated on true or estimated
/// states alike.
#[derive(Debug, Clone, PartialEq)]
pub enum ControlLaw {
    /// No actuation.
    Zero,
    /// Planar platoon law for double-integrator agents: the leader tracks a
    /// constant x-velocity reference, followers apply relative-position
    /// feedback toward their formation slots.
    LeaderFollower {
        c1: f64,
        c2: f64,
        v_ref: f64,
        /// Desired absolute position per node; only slot differences enter
        /// the law, which keeps it expressible in relative states.
        slots: Vec<[f64; 2]>,
    },
}

impl ControlLaw {
    /// Slots for a line formation along the negative x axis: node `i` sits
    /// `spacing * (i - 1)` behind the leader.
    pub fn line_slots(node_count: usize, spacing: f64) -> Vec<[f64; 2]> {
        (0..node_count)
            .map(|i| [-(i as f64) * spacing, 0.0])
            .collect()
    }

    /// Evaluates the law at the stacked state `x`.
    pub fn eval(&self, plant: &NetworkPlant, x: &DVector<f64>) -> Result<DVector<f64>, PlantError> {
        match self {
            ControlLaw::Zero => Ok(DVector::zeros(plant.input_dim())),
            ControlLaw::LeaderFollower {
                c1,
                c2,
                v_ref,
                slots,
            } => {
                let n = plant.node_state_dim();
                let m_in = plant.node_input_dim();
                if n != 4 || m_in != 2 {
                    return Err(PlantError::ControlLawShape {
                        law: "leader_follower",
                        n,
                        m: m_in,
                    });
                }
                if slots.len() != plant.node_count() {
                    return Err(PlantError::SlotCount {
                        expected: plant.node_count(),
                        got: slots.len(),
                    });
                }
                if x.len() != plant.state_dim() {
                    return Err(PlantError::VectorLength {
                        what: "state",
                        expected: plant.state_dim(),
                        got: x.len(),
                    });
                }
                let mut u = DVector::zeros(plant.input_dim());
                u[0] = -x[2] + v_ref;
                u[1] = 0.0;
                for node in 2..=plant.node_count() {
                    let i = node - 1;
                    let (mut ux, mut uy) = (0.0, 0.0);
                    for &j_node in plant.graph().neighbors(node) {
                        let j = j_node - 1;
                        let dx = slots[j][0] - slots[i][0];
                        let dy = slots[j][1] - slots[i][1];
                        ux -= c1 * (x[i * 4] - x[j * 4] + dx);
                        uy -= c2 * (x[i * 4 + 1] - x[j * 4 + 1] + dy);
                    }
                    u[i * 2] = ux;
                    u[i * 2 + 1] = uy;
                }
                Ok(u)
            }
        }
    }
}

/// Additive fault vectors keyed by step and node; absent entries are zero.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FaultSchedule {
    entries: BTreeMap<usize, BTreeMap<NodeId, DVector<f64>>>,
}

impl FaultSchedule {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `value` to node `node`'s fault at step `k` (faults on the same
    /// node and step accumulate).
    pub fn add(&mut self, k: usize, node: NodeId, value: DVector<f64>) {
        let slot = self
            .entries
            .entry(k)
            .or_default()
            .entry(node)
            .or_insert_with(|| DVector::zeros(value.len()));
        *slot += value;
    }

    /// Checks node ids and block lengths against a plant layout.
    pub fn validate(&self, node_count: usize, n: usize) -> Result<(), PlantError> {
        for (&k, nodes) in &self.entries {
            for (&node, v) in nodes {
                if node == 0 || node > node_count {
                    return Err(PlantError::FaultNodeOutOfRange { node, node_count });
                }
                if v.len() != n {
                    return Err(PlantError::FaultLength {
                        node,
                        k,
                        expected: n,
                        got: v.len(),
                    });
                }
            }
        }
        Ok(())
    }

    /// Faulty node set `I_k` (nodes whose fault block is nonzero).
    pub fn support(&self, k: usize) -> BTreeSet<NodeId> {
        self.entries
            .get(&k)
            .map(|nodes| {
                nodes
                    .iter()
                    .filter(|(_, v)| v.iter().any(|&c| c != 0.0))
                    .map(|(&node, _)| node)
                    .collect()
            })
            .unwrap_or_default()
    }

    /// Stacked fault vector `f(k)` for a plant with `node_count` nodes of
    /// state dimension `n`.
    pub fn stacked(&self, k: usize, node_count: usize, n: usize) -> DVector<f64> {
        let mut f = DVector::zeros(node_count * n);
        if let Some(nodes) = self.entries.get(&k) {
            for (&node, v) in nodes {
                f.rows_mut((node - 1) * n, n).copy_from(v);
            }
        }
        f
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Largest `|I_k|` over the whole schedule.
    pub fn max_support_size(&self) -> usize {
        self.entries
            .keys()
            .map(|&k| self.support(k).len())
            .max()
            .unwrap_or(0)
    }

    pub fn steps(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.keys().copied()
    }
}

/// Leader-mode windows; steps not covered by any window default to `Active`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LeaderSchedule {
    windows: Vec<(usize, usize, LeaderMode)>,
}

impl LeaderSchedule {
    pub fn always_active() -> Self {
        Self::default()
    }

    /// Marks `[k_start, k_end]` (inclusive) with the given mode.
    pub fn push_window(&mut self, k_start: usize, k_end: usize, mode: LeaderMode) {
        self.windows.push((k_start, k_end, mode));
    }

    /// Mode at step `k`; the last matching window wins.
    pub fn mode_at(&self, k: usize) -> LeaderMode {
        self.windows
            .iter()
            .rev()
            .find(|&&(lo, hi, _)| lo <= k && k <= hi)
            .map(|&(_, _, mode)| mode)
            .unwrap_or(LeaderMode::Active)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::path_graph;
    use crate::linalg::{rank, RANK_REL_TOL};

    fn chain3_plant() -> NetworkPlant {
        NetworkPlant::homogeneous(path_graph(3), AgentDynamics::integrator(1)).unwrap()
    }

    #[test]
    fn chain_output_matrices_match_hand_values() {
        let plant = chain3_plant();
        let c0 = DMatrix::from_row_slice(2, 3, &[1.0, -1.0, 0.0, 0.0, 1.0, -1.0]);
        let c1 = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 1.0, -1.0, 0.0, 0.0, 1.0, -1.0]);
        assert_eq!(plant.output_matrix(LeaderMode::NonActive), &c0);
        assert_eq!(plant.output_matrix(LeaderMode::Active), &c1);
    }

    #[test]
    fn two_node_chain_n2_output_matrices() {
        let plant =
            NetworkPlant::homogeneous(path_graph(2), AgentDynamics::integrator(2)).unwrap();
        let c0 = DMatrix::from_row_slice(2, 4, &[1.0, 0.0, -1.0, 0.0, 0.0, 1.0, 0.0, -1.0]);
        assert_eq!(plant.output_matrix(LeaderMode::NonActive), &c0);
        let c1 = DMatrix::from_row_slice(
            4,
            4,
            &[
                1.0, 0.0, 0.0, 0.0, //
                0.0, 1.0, 0.0, 0.0, //
                1.0, 0.0, -1.0, 0.0, //
                0.0, 1.0, 0.0, -1.0,
            ],
        );
        assert_eq!(plant.output_matrix(LeaderMode::Active), &c1);
    }

    #[test]
    fn single_node_output_matrices() {
        let g = Graph::new(1, &[]).unwrap();
        let plant = NetworkPlant::homogeneous(g, AgentDynamics::integrator(2)).unwrap();
        assert_eq!(plant.measurement_dim(LeaderMode::NonActive), 0);
        assert_eq!(
            plant.output_matrix(LeaderMode::Active),
            &DMatrix::identity(2, 2)
        );
    }

    #[test]
    fn output_matrix_ranks() {
        for (g, n) in [
            (path_graph(3), 1usize),
            (path_graph(5), 2),
            (crate::graph::grid_graph(3, 3), 2),
        ] {
            let m = g.node_count();
            let (c0, c1) = build_output_matrices(&g, n).unwrap();
            assert_eq!(rank(&c0, RANK_REL_TOL), n * (m - 1));
            assert_eq!(rank(&c1, RANK_REL_TOL), n * m);
        }
    }

    #[test]
    fn measure_matches_hand_values() {
        let plant = chain3_plant();
        let x = DVector::from_column_slice(&[2.0, 4.0, 6.0]);
        assert_eq!(
            plant.measure(&x, LeaderMode::NonActive).unwrap(),
            DVector::from_column_slice(&[-2.0, -2.0])
        );
        assert_eq!(
            plant.measure(&x, LeaderMode::Active).unwrap(),
            DVector::from_column_slice(&[2.0, -2.0, -2.0])
        );
    }

    #[test]
    fn step_truth_applies_fault() {
        let plant = chain3_plant();
        let x = DVector::from_column_slice(&[1.0, 1.0, 1.0]);
        let u = DVector::zeros(0);
        let mut f = DVector::zeros(3);
        f[2] = 5.0;
        assert_eq!(
            plant.step_truth(&x, &u, &f).unwrap(),
            DVector::from_column_slice(&[1.0, 1.0, 6.0])
        );
        let wrong = DVector::zeros(2);
        assert!(plant.step_truth(&wrong, &u, &f).is_err());
    }

    #[test]
    fn zoh_double_integrator_closed_form() {
        let ag = AgentDynamics::double_integrator_zoh(0.05);
        assert_eq!(ag.a()[(0, 2)], 0.05);
        assert_eq!(ag.a()[(1, 3)], 0.05);
        assert_eq!(ag.b()[(0, 0)], 0.5 * 0.05 * 0.05);
        assert_eq!(ag.b()[(2, 0)], 0.05);
        assert_eq!(ag.b()[(3, 1)], 0.05);
        assert_eq!(ag.state_dim(), 4);
        assert_eq!(ag.input_dim(), 2);
    }

    #[test]
    fn node_row_ranges_partition_rows() {
        let plant =
            NetworkPlant::homogeneous(crate::graph::grid_graph(3, 3), AgentDynamics::integrator(2))
                .unwrap();
        for mode in [LeaderMode::Active, LeaderMode::NonActive] {
            let ranges = plant.node_row_ranges(mode);
            assert_eq!(ranges.len(), 9);
            let mut covered = 0;
            for r in &ranges {
                assert_eq!(r.start, covered);
                covered = r.end;
            }
            assert_eq!(covered, plant.measurement_dim(mode));
        }
        // Leader owns the absolute block only when active.
        assert_eq!(plant.node_row_ranges(LeaderMode::Active)[0].len(), 2 + 4);
        assert_eq!(plant.node_row_ranges(LeaderMode::NonActive)[0].len(), 4);
    }

    #[test]
    fn platoon_law_vanishes_in_formation() {
        let g = path_graph(3);
        let plant =
            NetworkPlant::homogeneous(g, AgentDynamics::double_integrator_zoh(0.05)).unwrap();
        let slots = ControlLaw::line_slots(3, 2.0);
        let law = ControlLaw::LeaderFollower {
            c1: 1.5,
            c2: 1.5,
            v_ref: 1.0,
            slots: slots.clone(),
        };
        let mut x = DVector::zeros(12);
        for i in 0..3 {
            x[i * 4] = slots[i][0];
            x[i * 4 + 1] = slots[i][1];
            x[i * 4 + 2] = 1.0;
        }
        let u = law.eval(&plant, &x).unwrap();
        assert!(u.norm() < 1e-12);

        // Pull node 2 one metre ahead of its slot: both its own feedback and
        // nothing else reacts on x, neighbours' y stays zero.
        x[4] += 1.0;
        let u = law.eval(&plant, &x).unwrap();
        assert_eq!(u[2], -2.0 * 1.5);
        assert_eq!(u[3], 0.0);
    }

    #[test]
    fn control_law_shape_is_checked() {
        let plant = chain3_plant();
        let law = ControlLaw::LeaderFollower {
            c1: 1.0,
            c2: 1.0,
            v_ref: 1.0,
            slots: ControlLaw::line_slots(3, 2.0),
        };
        assert!(matches!(
            law.eval(&plant, &DVector::zeros(3)),
            Err(PlantError::ControlLawShape { .. })
        ));
    }

    #[test]
    fn fault_schedule_support_and_stacking() {
        let mut sched = FaultSchedule::new();
        sched.add(30, 1, DVector::from_column_slice(&[-3.0]));
        sched.add(30, 2, DVector::from_column_slice(&[0.0]));
        sched.validate(3, 1).unwrap();
        assert_eq!(sched.support(30), BTreeSet::from([1]));
        assert!(sched.support(29).is_empty());
        assert_eq!(
            sched.stacked(30, 3, 1),
            DVector::from_column_slice(&[-3.0, 0.0, 0.0])
        );
        assert_eq!(sched.max_support_size(), 1);

        sched.add(31, 5, DVector::from_column_slice(&[1.0]));
        assert!(matches!(
            sched.validate(3, 1),
            Err(PlantError::FaultNodeOutOfRange { node: 5, .. })
        ));
    }

    #[test]
    fn fault_schedule_accumulates_same_slot() {
        let mut sched = FaultSchedule::new();
        sched.add(4, 2, DVector::from_column_slice(&[1.0, 0.0]));
        sched.add(4, 2, DVector::from_column_slice(&[0.0, 2.0]));
        assert_eq!(
            sched.stacked(4, 2, 2),
            DVector::from_column_slice(&[0.0, 0.0, 1.0, 2.0])
        );
    }

    #[test]
    fn leader_schedule_windows() {
        let mut sched = LeaderSchedule::always_active();
        sched.push_window(20, 40, LeaderMode::NonActive);
        assert_eq!(sched.mode_at(0), LeaderMode::Active);
        assert_eq!(sched.mode_at(20), LeaderMode::NonActive);
        assert_eq!(sched.mode_at(40), LeaderMode::NonActive);
        assert_eq!(sched.mode_at(41), LeaderMode::Active);
    }
}
