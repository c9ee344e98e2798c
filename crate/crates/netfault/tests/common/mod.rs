//! Shared oracles for the integration suites: a dense two-phase simplex
//! solver used as an independent reference for the ℓ1 solver, and
//! grid-search references for the per-node subproblem.

use nalgebra::{DMatrix, DVector};

/// Outcome of the reference LP solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LpOutcome {
    Optimal(f64),
    Infeasible,
    Unbounded,
}

const EPS: f64 = 1e-9;

/// Minimize `c^T x` subject to `a x = b`, `x >= 0` with a dense two-phase
/// tableau simplex using Bland's rule (no cycling).  Sizes here are tiny, so
/// clarity beats sparsity.
pub fn simplex_min(c: &[f64], a: &DMatrix<f64>, b: &DVector<f64>) -> LpOutcome {
    let m = a.nrows();
    let n = a.ncols();
    assert_eq!(c.len(), n);
    assert_eq!(b.len(), m);

    // Tableau columns: n structural + m artificial + 1 rhs.
    let width = n + m + 1;
    let mut t = vec![vec![0.0f64; width]; m];
    for r in 0..m {
        let flip = if b[r] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            t[r][j] = flip * a[(r, j)];
        }
        t[r][n + r] = 1.0;
        t[r][width - 1] = flip * b[r];
    }
    let mut basis: Vec<usize> = (n..n + m).collect();

    // Reduced cost of column `j` under cost vector `cost`, given the basis.
    let reduced = |t: &Vec<Vec<f64>>, basis: &Vec<usize>, cost: &dyn Fn(usize) -> f64, j: usize| {
        let mut v = cost(j);
        for r in 0..t.len() {
            v -= cost(basis[r]) * t[r][j];
        }
        v
    };

    let pivot = |t: &mut Vec<Vec<f64>>, basis: &mut Vec<usize>, row: usize, col: usize| {
        let p = t[row][col];
        for v in t[row].iter_mut() {
            *v /= p;
        }
        for r in 0..t.len() {
            if r != row && t[r][col].abs() > 0.0 {
                let factor = t[r][col];
                for j in 0..t[r].len() {
                    t[r][j] -= factor * t[row][j];
                }
            }
        }
        basis[row] = col;
    };

    // One simplex phase over the allowed column range; Bland's rule.
    let run = |t: &mut Vec<Vec<f64>>,
               basis: &mut Vec<usize>,
               cost: &dyn Fn(usize) -> f64,
               allowed: usize|
     -> Option<()> {
        loop {
            let mut entering = None;
            for j in 0..allowed {
                if basis.contains(&j) {
                    continue;
                }
                if reduced(t, basis, cost, j) < -EPS {
                    entering = Some(j);
                    break;
                }
            }
            let Some(col) = entering else {
                return Some(());
            };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..t.len() {
                if t[r][col] > EPS {
                    let ratio = t[r][width - 1] / t[r][col];
                    let better = match leave {
                        None => true,
                        Some((lr, lratio)) => {
                            ratio < lratio - EPS
                                || (ratio < lratio + EPS && basis[r] < basis[lr])
                        }
                    };
                    if better {
                        leave = Some((r, ratio));
                    }
                }
            }
            let Some((row, _)) = leave else {
                return None; // unbounded in this phase
            };
            pivot(t, basis, row, col);
        }
    };

    // Phase 1: minimize the artificial sum.
    let phase1 = |j: usize| if j >= n { 1.0 } else { 0.0 };
    if run(&mut t, &mut basis, &phase1, n + m).is_none() {
        return LpOutcome::Unbounded; // cannot happen: phase-1 objective is bounded
    }
    let w: f64 = (0..m)
        .filter(|&r| basis[r] >= n)
        .map(|r| t[r][width - 1])
        .sum();
    if w > 1e-7 {
        return LpOutcome::Infeasible;
    }
    // Drive lingering zero-level artificials out where a structural pivot exists.
    for r in 0..m {
        if basis[r] >= n {
            if let Some(col) = (0..n).find(|&j| t[r][j].abs() > EPS) {
                pivot(&mut t, &mut basis, r, col);
            }
        }
    }

    // Phase 2 over structural columns only (rows still holding an artificial
    // basis variable are redundant and stay fixed at zero).
    let phase2 = |j: usize| if j < n { c[j] } else { 0.0 };
    if run(&mut t, &mut basis, &phase2, n).is_none() {
        return LpOutcome::Unbounded;
    }
    let mut value = 0.0;
    for r in 0..m {
        if basis[r] < n {
            value += c[basis[r]] * t[r][width - 1];
        }
    }
    LpOutcome::Optimal(value)
}

/// Optimal value of `min ||z - shift||_1  s.t.  a z = b` via the split
/// `z - shift = u - v`, `u, v >= 0`:
/// `min 1^T(u + v)  s.t.  a(u - v) = b - a*shift`.
pub fn l1_equality_oracle(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    shift: &DVector<f64>,
) -> LpOutcome {
    let m = a.nrows();
    let n = a.ncols();
    let rhs = b - a * shift;
    let mut wide = DMatrix::zeros(m, 2 * n);
    wide.view_mut((0, 0), (m, n)).copy_from(a);
    wide.view_mut((0, n), (m, n)).copy_from(&(-a));
    let cost = vec![1.0; 2 * n];
    simplex_min(&cost, &wide, &rhs)
}

/// Node-subproblem objective
/// `w1 ||x - shift||_1 + linear^T x + (quad / 2) ||x||^2`.
pub fn node_objective(
    x: &DVector<f64>,
    shift: &DVector<f64>,
    linear: &DVector<f64>,
    quad: f64,
    w1: f64,
) -> f64 {
    let mut v = 0.5 * quad * x.norm_squared() + linear.dot(x);
    for i in 0..x.len() {
        v += w1 * (x[i] - shift[i]).abs();
    }
    v
}

/// Coarse-to-fine scalar minimization of `f` over `[lo, hi]`.
pub fn refine_1d(mut lo: f64, mut hi: f64, f: &dyn Fn(f64) -> f64) -> (f64, f64) {
    let mut best_x = lo;
    let mut best = f64::INFINITY;
    for _ in 0..6 {
        let steps = 800;
        let dx = (hi - lo) / steps as f64;
        for i in 0..=steps {
            let x = lo + dx * i as f64;
            let v = f(x);
            if v < best {
                best = v;
                best_x = x;
            }
        }
        lo = best_x - 2.0 * dx;
        hi = best_x + 2.0 * dx;
    }
    (best_x, best)
}

/// Coarse-to-fine 2-D grid minimization of `f` over the given box.
pub fn refine_2d(
    mut lo: (f64, f64),
    mut hi: (f64, f64),
    f: &dyn Fn(f64, f64) -> f64,
) -> ((f64, f64), f64) {
    let mut best_xy = lo;
    let mut best = f64::INFINITY;
    for _ in 0..6 {
        let steps = 120;
        let dx = (hi.0 - lo.0) / steps as f64;
        let dy = (hi.1 - lo.1) / steps as f64;
        for i in 0..=steps {
            for j in 0..=steps {
                let x = lo.0 + dx * i as f64;
                let y = lo.1 + dy * j as f64;
                let v = f(x, y);
                if v < best {
                    best = v;
                    best_xy = (x, y);
                }
            }
        }
        lo = (best_xy.0 - 2.0 * dx, best_xy.1 - 2.0 * dy);
        hi = (best_xy.0 + 2.0 * dx, best_xy.1 + 2.0 * dy);
    }
    (best_xy, best)
}

#[cfg(test)]
mod self_checks {
    use super::*;

    #[test]
    fn simplex_solves_a_textbook_lp() {
        // min -x1 - 2 x2  s.t.  x1 + x2 + s = 4, x1 + 3 x2 + t = 6, all >= 0.
        // Vertices (0,0), (4,0), (0,2), (3,1) give 0, -4, -4, -5.
        let a = DMatrix::from_row_slice(2, 4, &[1.0, 1.0, 1.0, 0.0, 1.0, 3.0, 0.0, 1.0]);
        let b = DVector::from_column_slice(&[4.0, 6.0]);
        let c = [-1.0, -2.0, 0.0, 0.0];
        match simplex_min(&c, &a, &b) {
            LpOutcome::Optimal(v) => assert!((v + 5.0).abs() < 1e-9, "optimum {v}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn simplex_detects_infeasibility() {
        // x1 = 1 and x1 = 2 cannot both hold.
        let a = DMatrix::from_row_slice(2, 1, &[1.0, 1.0]);
        let b = DVector::from_column_slice(&[1.0, 2.0]);
        assert_eq!(simplex_min(&[0.0], &a, &b), LpOutcome::Infeasible);
    }

    #[test]
    fn l1_oracle_matches_a_hand_value() {
        // min |z1| + |z2|  s.t.  z1 + z2 = 2  ->  value 2.
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let b = DVector::from_column_slice(&[2.0]);
        let shift = DVector::zeros(2);
        match l1_equality_oracle(&a, &b, &shift) {
            LpOutcome::Optimal(v) => assert!((v - 2.0).abs() < 1e-9, "{v}"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
