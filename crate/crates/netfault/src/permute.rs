//! Coordinate-major rearrangement of the stacked state and the block
//! structure it exposes in the output matrices.
//!
//! In node-major order the stacked state interleaves coordinates,
//! `(x_1^1..x_1^n, x_2^1..x_2^n, ...)`. Regrouping by coordinate instead,
//! `(x_1^1, x_2^1, ..., x_M^1, x_1^2, ...)`, turns the relative-measurement
//! matrix into `n` identical diagonal blocks: `C_0` becomes
//! `blockdiag(D^T, ..., D^T)` for the incidence matrix `D`, and `C_1` becomes
//! `blockdiag([e_1 D]^T, ...)` with the extra unit column marking the
//! leader's absolute row. Fault blocks of node `i` land on the index set
//! `{i, i+M, ..., i+(n-1)M}` (1-based), so per-node faults are sparse in the
//! rearranged coordinates with one index per diagonal block.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::graph::{Graph, NodeId};
use crate::plant::{build_output_matrices, PlantError};

#[derive(Debug, Error)]
pub enum PermuteError {
    #[error("node and coordinate counts must be at least 1 (got M={m}, n={n})")]
    EmptyLayout { m: usize, n: usize },
    #[error("vector has length {got}, expected {expected}")]
    Length { expected: usize, got: usize },
    #[error("node {node} outside 1..={m}")]
    NodeOutOfRange { node: NodeId, m: usize },
    #[error(transparent)]
    Plant(#[from] PlantError),
    #[error("row of the structured matrix has no unique match in the permuted output matrix (internal)")]
    RowMatch,
}

/// Index bookkeeping between the node-major and coordinate-major layouts for
/// `M` nodes with `n` coordinates each.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PermutationPlan {
    node_count: usize,
    state_dim: usize,
}

impl PermutationPlan {
    pub fn new(node_count: usize, state_dim: usize) -> Result<Self, PermuteError> {
        if node_count == 0 || state_dim == 0 {
            return Err(PermuteError::EmptyLayout {
                m: node_count,
                n: state_dim,
            });
        }
        Ok(Self {
            node_count,
            state_dim,
        })
    }

    pub fn len(&self) -> usize {
        self.node_count * self.state_dim
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    /// Node-major position of `(node0, coord)`, both 0-based.
    pub fn node_major_index(&self, node0: usize, coord: usize) -> usize {
        node0 * self.state_dim + coord
    }

    /// Coordinate-major position of `(node0, coord)`, both 0-based.
    pub fn coordinate_major_index(&self, node0: usize, coord: usize) -> usize {
        coord * self.node_count + node0
    }

    /// Reorders a node-major vector into coordinate-major layout.
    pub fn to_coordinate_major(&self, v: &DVector<f64>) -> Result<DVector<f64>, PermuteError> {
        self.check_len(v.len())?;
        let mut out = DVector::zeros(self.len());
        for node0 in 0..self.node_count {
            for coord in 0..self.state_dim {
                out[self.coordinate_major_index(node0, coord)] =
                    v[self.node_major_index(node0, coord)];
            }
        }
        Ok(out)
    }

    /// Inverse of [`Self::to_coordinate_major`].
    pub fn to_node_major(&self, v: &DVector<f64>) -> Result<DVector<f64>, PermuteError> {
        self.check_len(v.len())?;
        let mut out = DVector::zeros(self.len());
        for node0 in 0..self.node_count {
            for coord in 0..self.state_dim {
                out[self.node_major_index(node0, coord)] =
                    v[self.coordinate_major_index(node0, coord)];
            }
        }
        Ok(out)
    }

    /// Permutation matrix `P` with `P v_node_major = v_coordinate_major`.
    pub fn matrix(&self) -> DMatrix<f64> {
        let len = self.len();
        let mut p = DMatrix::zeros(len, len);
        for node0 in 0..self.node_count {
            for coord in 0..self.state_dim {
                p[(
                    self.coordinate_major_index(node0, coord),
                    self.node_major_index(node0, coord),
                )] = 1.0;
            }
        }
        p
    }

    /// Coordinate-major indices (0-based) of node `node`'s block: one index
    /// in each of the `n` diagonal blocks.
    pub fn node_support(&self, node: NodeId) -> Result<BTreeSet<usize>, PermuteError> {
        if node == 0 || node > self.node_count {
            return Err(PermuteError::NodeOutOfRange {
                node,
                m: self.node_count,
            });
        }
        Ok((0..self.state_dim)
            .map(|coord| self.coordinate_major_index(node - 1, coord))
            .collect())
    }

    /// Union of [`Self::node_support`] over a faulty-node set: the sparsity
    /// pattern a stacked fault occupies in coordinate-major layout.
    pub fn fault_support_sets(
        &self,
        faulty: &BTreeSet<NodeId>,
    ) -> Result<BTreeSet<usize>, PermuteError> {
        let mut out = BTreeSet::new();
        for &node in faulty {
            out.extend(self.node_support(node)?);
        }
        Ok(out)
    }

    fn check_len(&self, got: usize) -> Result<(), PermuteError> {
        if got != self.len() {
            return Err(PermuteError::Length {
                expected: self.len(),
                got,
            });
        }
        Ok(())
    }
}

/// Output matrices rewritten in coordinate-major layout, with the row and
/// column permutations that connect them to the node-major originals.
#[derive(Debug, Clone)]
pub struct StructuredForm {
    pub plan: PermutationPlan,
    /// `blockdiag(D^T, ...)`: the non-active-mode output matrix, permuted.
    pub cp0: DMatrix<f64>,
    /// `blockdiag([e_1 D]^T, ...)`: the active-mode output matrix, permuted.
    pub cp1: DMatrix<f64>,
    /// `row_perm0[i] = r` means row `i` of `cp0` is row `r` of `C_0`.
    pub row_perm0: Vec<usize>,
    pub row_perm1: Vec<usize>,
}

/// Builds `cp0`/`cp1` directly from the incidence matrix and recovers the row
/// permutations by matching each structured row against the column-permuted
/// output matrices; the correspondence is verified entry-for-entry.
pub fn build_structured_matrices(g: &Graph, n: usize) -> Result<StructuredForm, PermuteError> {
    let plan = PermutationPlan::new(g.node_count(), n)?;
    let m = g.node_count();
    let edges = g.edge_count();
    let d = g.incidence_matrix();
    let dt = d.transpose();

    let mut d2t = DMatrix::zeros(edges + 1, m);
    d2t[(0, 0)] = 1.0;
    d2t.view_mut((1, 0), (edges, m)).copy_from(&dt);

    let cp0 = block_diagonal(&dt, n);
    let cp1 = block_diagonal(&d2t, n);

    let (c0, c1) = build_output_matrices(g, n)?;
    let p = plan.matrix();
    let c0_cm = &c0 * p.transpose();
    let c1_cm = &c1 * p.transpose();

    let row_perm0 = match_rows(&cp0, &c0_cm)?;
    let row_perm1 = match_rows(&cp1, &c1_cm)?;

    Ok(StructuredForm {
        plan,
        cp0,
        cp1,
        row_perm0,
        row_perm1,
    })
}

fn block_diagonal(block: &DMatrix<f64>, copies: usize) -> DMatrix<f64> {
    let (r, c) = block.shape();
    let mut out = DMatrix::zeros(r * copies, c * copies);
    for i in 0..copies {
        out.view_mut((i * r, i * c), (r, c)).copy_from(block);
    }
    out
}

/// For each row of `structured`, the index of the bit-identical row of
/// `permuted`. Entries are exact `0.0 / +-1.0`, so plain equality applies.
fn match_rows(structured: &DMatrix<f64>, permuted: &DMatrix<f64>) -> Result<Vec<usize>, PermuteError> {
    if structured.shape() != permuted.shape() {
        return Err(PermuteError::RowMatch);
    }
    let key = |row: nalgebra::RowDVector<f64>| -> Vec<(usize, i8)> {
        row.iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(|(j, &v)| (j, if v > 0.0 { 1 } else { -1 }))
            .collect()
    };
    let mut lookup: BTreeMap<Vec<(usize, i8)>, usize> = BTreeMap::new();
    for r in 0..permuted.nrows() {
        if lookup.insert(key(permuted.row(r).clone_owned()), r).is_some() {
            return Err(PermuteError::RowMatch);
        }
    }
    let mut perm = Vec::with_capacity(structured.nrows());
    for r in 0..structured.nrows() {
        match lookup.get(&key(structured.row(r).clone_owned())) {
            Some(&idx) => perm.push(idx),
            None => return Err(PermuteError::RowMatch),
        }
    }
    Ok(perm)
}
