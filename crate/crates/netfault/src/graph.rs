//! Measurement-graph plumbing: oriented incidence matrices, weak-connectivity
//! checks and the two-coloring used by the distributed runtime.
//!
//! Node ids are 1-based (node 1 is the leader). Each edge is stored as an
//! ordered pair `(head, tail)`: the head node owns the relative measurement
//! `x_head - x_tail` for that edge, and the incidence matrix assigns `+1` to
//! the head row and `-1` to the tail row. The same unordered pair may appear
//! only once, so the edge list doubles as the measurement list while the
//! undirected view (neighbour sets, degrees, connectivity, bipartition)
//! describes the communication topology.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::DMatrix;
use thiserror::Error;

use crate::linalg::{self, RANK_REL_TOL};

/// 1-based node identifier; node 1 is the leader.
pub type NodeId = usize;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("graph needs at least one node")]
    Empty,
    #[error("edge ({0}, {1}) references a node outside 1..={2}")]
    NodeOutOfRange(NodeId, NodeId, usize),
    #[error("edge ({0}, {0}) is a self-loop")]
    SelfLoop(NodeId),
    #[error("edge ({0}, {1}) repeats an unordered pair already in the list")]
    DuplicateEdge(NodeId, NodeId),
    #[error("graph is not weakly connected")]
    NotConnected,
    #[error("graph is not bipartite: edge ({0}, {1}) closes an odd cycle")]
    NotBipartite(NodeId, NodeId),
}

/// Undirected communication graph with an orientation per edge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    node_count: usize,
    edges: Vec<(NodeId, NodeId)>,
    neighbors: Vec<BTreeSet<NodeId>>,
}

/// Result of the weak-connectivity check, with the incidence rank retained as
/// a witness (`rank = node_count - 1` exactly when connected).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConnectivityReport {
    pub connected: bool,
    pub incidence_rank: usize,
}

/// Two-coloring of the node set; `class1` always contains node 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bipartition {
    pub class1: BTreeSet<NodeId>,
    pub class2: BTreeSet<NodeId>,
}

impl Bipartition {
    /// Class containing `node`, as 1 or 2.
    pub fn class_of(&self, node: NodeId) -> u8 {
        if self.class1.contains(&node) {
            1
        } else {
            2
        }
    }
}

impl Graph {
    /// Validates and stores an oriented edge list over nodes `1..=node_count`.
    pub fn new(node_count: usize, edges: &[(NodeId, NodeId)]) -> Result<Self, GraphError> {
        if node_count == 0 {
            return Err(GraphError::Empty);
        }
        let mut seen: BTreeSet<(NodeId, NodeId)> = BTreeSet::new();
        let mut neighbors = vec![BTreeSet::new(); node_count];
        for &(head, tail) in edges {
            if head == tail {
                return Err(GraphError::SelfLoop(head));
            }
            if head == 0 || tail == 0 || head > node_count || tail > node_count {
                return Err(GraphError::NodeOutOfRange(head, tail, node_count));
            }
            let key = (head.min(tail), head.max(tail));
            if !seen.insert(key) {
                return Err(GraphError::DuplicateEdge(head, tail));
            }
            neighbors[head - 1].insert(tail);
            neighbors[tail - 1].insert(head);
        }
        Ok(Self {
            node_count,
            edges: edges.to_vec(),
            neighbors,
        })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Oriented edges in input order; `(head, tail)` measures `x_head - x_tail`.
    pub fn edges(&self) -> &[(NodeId, NodeId)] {
        &self.edges
    }

    /// Undirected neighbour set of `node`, ascending.
    pub fn neighbors(&self, node: NodeId) -> &BTreeSet<NodeId> {
        &self.neighbors[node - 1]
    }

    pub fn degree(&self, node: NodeId) -> usize {
        self.neighbors[node - 1].len()
    }

    /// Tails of the edges headed at `node`, ascending: the nodes whose state
    /// `node` subtracts in its own measurement rows.
    pub fn measured_targets(&self, node: NodeId) -> Vec<NodeId> {
        let mut targets: Vec<NodeId> = self
            .edges
            .iter()
            .filter(|&&(h, _)| h == node)
            .map(|&(_, t)| t)
            .collect();
        targets.sort_unstable();
        targets
    }

    /// Oriented incidence matrix `D` (`node_count x edge_count`): column `j`
    /// carries `+1` at the head of edge `j` and `-1` at its tail.
    pub fn incidence_matrix(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.node_count, self.edges.len());
        for (j, &(head, tail)) in self.edges.iter().enumerate() {
            d[(head - 1, j)] = 1.0;
            d[(tail - 1, j)] = -1.0;
        }
        d
    }

    /// Weak connectivity via breadth-first search, together with the rank of
    /// the incidence matrix as an independent witness.
    pub fn check_weak_connectivity(&self) -> ConnectivityReport {
        let connected = self.reachable_from_leader().len() == self.node_count;
        let incidence_rank = linalg::rank(&self.incidence_matrix(), RANK_REL_TOL);
        debug_assert_eq!(connected, incidence_rank == self.node_count - 1);
        ConnectivityReport {
            connected,
            incidence_rank,
        }
    }

    fn reachable_from_leader(&self) -> BTreeSet<NodeId> {
        let mut seen = BTreeSet::new();
        let mut queue = vec![1];
        seen.insert(1);
        while let Some(u) = queue.pop() {
            for &v in self.neighbors(u) {
                if seen.insert(v) {
                    queue.push(v);
                }
            }
        }
        seen
    }

    /// Two-colors the graph by breadth-first search from node 1.
    ///
    /// Requires weak connectivity; fails on the first edge that closes an odd
    /// cycle.
    pub fn bipartition(&self) -> Result<Bipartition, GraphError> {
        if !self.check_weak_connectivity().connected {
            return Err(GraphError::NotConnected);
        }
        let mut color: BTreeMap<NodeId, u8> = BTreeMap::new();
        color.insert(1, 1);
        let mut frontier = vec![1];
        while let Some(u) = frontier.pop() {
            let cu = color[&u];
            for &v in self.neighbors(u) {
                match color.get(&v) {
                    None => {
                        color.insert(v, 3 - cu);
                        frontier.push(v);
                    }
                    Some(&cv) if cv == cu => return Err(GraphError::NotBipartite(u.min(v), u.max(v))),
                    Some(_) => {}
                }
            }
        }
        let mut part = Bipartition {
            class1: BTreeSet::new(),
            class2: BTreeSet::new(),
        };
        for (node, c) in color {
            if c == 1 {
                part.class1.insert(node);
            } else {
                part.class2.insert(node);
            }
        }
        Ok(part)
    }
}

/// Path graph `1 - 2 - ... - m` with every edge headed at the lower id.
pub fn path_graph(m: usize) -> Graph {
    let edges: Vec<(NodeId, NodeId)> = (1..m).map(|i| (i, i + 1)).collect();
    Graph::new(m, &edges).expect("path graph is always valid")
}

/// Axis-aligned grid with `rows x cols` nodes numbered row-major from 1.
pub fn grid_graph(rows: usize, cols: usize) -> Graph {
    let mut edges = Vec::new();
    let id = |r: usize, c: usize| r * cols + c + 1;
    for r in 0..rows {
        for c in 0..cols {
            if c + 1 < cols {
                edges.push((id(r, c), id(r, c + 1)));
            }
            if r + 1 < rows {
                edges.push((id(r, c), id(r + 1, c)));
            }
        }
    }
    Graph::new(rows * cols, &edges).expect("grid graph is always valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{kernel_basis, KERNEL_REL_TOL};
    use nalgebra::DVector;
    use proptest::prelude::*;

    fn chain3() -> Graph {
        Graph::new(3, &[(1, 2), (2, 3)]).unwrap()
    }

    #[test]
    fn rejects_malformed_edges() {
        assert_eq!(Graph::new(0, &[]), Err(GraphError::Empty));
        assert_eq!(
            Graph::new(3, &[(1, 1)]).unwrap_err(),
            GraphError::SelfLoop(1)
        );
        assert_eq!(
            Graph::new(3, &[(1, 4)]).unwrap_err(),
            GraphError::NodeOutOfRange(1, 4, 3)
        );
        assert_eq!(
            Graph::new(3, &[(1, 2), (2, 1)]).unwrap_err(),
            GraphError::DuplicateEdge(2, 1)
        );
    }

    #[test]
    fn chain_incidence_matrix() {
        let d = chain3().incidence_matrix();
        let expected = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, -1.0, 1.0, 0.0, -1.0]);
        assert_eq!(d, expected);
    }

    #[test]
    fn connectivity_and_rank_witness() {
        let report = chain3().check_weak_connectivity();
        assert!(report.connected);
        assert_eq!(report.incidence_rank, 2);

        let split = Graph::new(4, &[(1, 2), (3, 4)]).unwrap();
        let report = split.check_weak_connectivity();
        assert!(!report.connected);
        assert_eq!(report.incidence_rank, 2);
    }

    #[test]
    fn single_node_graph_is_connected() {
        let g = Graph::new(1, &[]).unwrap();
        let report = g.check_weak_connectivity();
        assert!(report.connected);
        assert_eq!(report.incidence_rank, 0);
    }

    #[test]
    fn incidence_kernel_is_consensus_direction() {
        // ker(D^T) is spanned by the all-ones vector on a connected graph.
        let d = grid_graph(3, 3).incidence_matrix();
        let basis = kernel_basis(&d.transpose(), KERNEL_REL_TOL);
        assert_eq!(basis.ncols(), 1);
        let ones = DVector::from_element(9, 1.0 / 3.0);
        let col = basis.column(0);
        let aligned = (col.clone_owned() - &ones).norm() < 1e-9
            || (col.clone_owned() + &ones).norm() < 1e-9;
        assert!(aligned, "kernel basis not aligned with all-ones");
    }

    #[test]
    fn bipartition_of_chain_and_grid() {
        let part = chain3().bipartition().unwrap();
        assert_eq!(part.class1, BTreeSet::from([1, 3]));
        assert_eq!(part.class2, BTreeSet::from([2]));

        let part = grid_graph(3, 3).bipartition().unwrap();
        assert_eq!(part.class1, BTreeSet::from([1, 3, 5, 7, 9]));
        assert_eq!(part.class2, BTreeSet::from([2, 4, 6, 8]));
        assert_eq!(part.class_of(1), 1);
    }

    #[test]
    fn odd_cycle_is_rejected_with_edge() {
        let g = Graph::new(3, &[(1, 2), (2, 3), (3, 1)]).unwrap();
        assert_eq!(g.bipartition().unwrap_err(), GraphError::NotBipartite(2, 3));
    }

    #[test]
    fn bipartition_requires_connectivity() {
        let g = Graph::new(4, &[(1, 2), (3, 4)]).unwrap();
        assert_eq!(g.bipartition().unwrap_err(), GraphError::NotConnected);
    }

    #[test]
    fn neighbors_and_measured_targets() {
        let g = chain3();
        assert_eq!(g.neighbors(2), &BTreeSet::from([1, 3]));
        assert_eq!(g.measured_targets(1), vec![2]);
        assert_eq!(g.measured_targets(2), vec![3]);
        assert!(g.measured_targets(3).is_empty());
        assert_eq!(g.degree(2), 2);
    }

    /// Random connected graph: a spanning tree plus a few extra edges.
    fn arb_connected_graph() -> impl Strategy<Value = Graph> {
        (2usize..9).prop_flat_map(|m| {
            let tree = proptest::collection::vec(0usize..usize::MAX, m - 1);
            let extras = proptest::collection::vec((0usize..usize::MAX, 0usize..usize::MAX), 0..4);
            (Just(m), tree, extras).prop_map(|(m, tree, extras)| {
                let mut edges: Vec<(NodeId, NodeId)> = Vec::new();
                let mut seen = BTreeSet::new();
                for (i, pick) in tree.iter().enumerate() {
                    let child = i + 2;
                    let parent = (pick % (child - 1)) + 1;
                    edges.push((parent, child));
                    seen.insert((parent.min(child), parent.max(child)));
                }
                for (a, b) in extras {
                    let a = a % m + 1;
                    let b = b % m + 1;
                    if a != b && seen.insert((a.min(b), a.max(b))) {
                        edges.push((a, b));
                    }
                }
                Graph::new(m, &edges).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn connected_graph_rank_is_m_minus_1(g in arb_connected_graph()) {
            let report = g.check_weak_connectivity();
            prop_assert!(report.connected);
            prop_assert_eq!(report.incidence_rank, g.node_count() - 1);
        }

        #[test]
        fn incidence_transpose_kills_constants(g in arb_connected_graph()) {
            let d = g.incidence_matrix();
            let ones = DVector::from_element(g.node_count(), 1.0);
            prop_assert!((d.transpose() * ones).norm() < 1e-12);
        }
    }
}
