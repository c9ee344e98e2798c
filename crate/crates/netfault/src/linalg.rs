//! Small dense linear-algebra helpers shared across modules.
//!
//! Everything here operates on desk-scale matrices (tens of rows/columns), so
//! plain SVD-based routines are used throughout instead of sparse or
//! structure-exploiting factorizations.

use nalgebra::{DMatrix, DVector};

/// Relative singular-value threshold used for rank decisions.
pub const RANK_REL_TOL: f64 = 1e-8;

/// Relative singular-value threshold used when extracting kernel bases.
pub const KERNEL_REL_TOL: f64 = 1e-10;

/// Singular values of `a`, padded with zero rows first so the decomposition
/// always carries a complete set of right singular vectors.
fn padded_svd(a: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let (rows, cols) = a.shape();
    let padded = if rows >= cols {
        a.clone()
    } else {
        let mut p = DMatrix::zeros(cols, cols);
        p.view_mut((0, 0), (rows, cols)).copy_from(a);
        p
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("SVD requested right singular vectors");
    (svd.singular_values, v_t)
}

/// Numerical rank with a threshold relative to the largest singular value.
pub fn rank(a: &DMatrix<f64>, rel_tol: f64) -> usize {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0;
    }
    let (sv, _) = padded_svd(a);
    let max = sv.max();
    if max <= 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * max).count()
}

/// Orthonormal kernel basis of `a`; columns span `{v : a v = 0}`.
///
/// Returns a `cols x dim` matrix (zero columns when the kernel is trivial).
pub fn kernel_basis(a: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let cols = a.ncols();
    if cols == 0 {
        return DMatrix::zeros(0, 0);
    }
    if a.nrows() == 0 {
        return DMatrix::identity(cols, cols);
    }
    let (sv, v_t) = padded_svd(a);
    let max = sv.max();
    let mut kernel_rows: Vec<usize> = Vec::new();
    for i in 0..cols {
        let s = if i < sv.len() { sv[i] } else { 0.0 };
        if max <= 0.0 || s <= rel_tol * max {
            kernel_rows.push(i);
        }
    }
    let mut basis = DMatrix::zeros(cols, kernel_rows.len());
    for (j, &i) in kernel_rows.iter().enumerate() {
        basis.set_column(j, &v_t.row(i).transpose());
    }
    basis
}

/// Moore-Penrose pseudoinverse via SVD with a relative cutoff.
pub fn pseudoinverse(a: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let (rows, cols) = a.shape();
    if rows == 0 || cols == 0 {
        return DMatrix::zeros(cols, rows);
    }
    let svd = a.clone().svd(true, true);
    let u = svd.u.as_ref().expect("SVD requested U");
    let v_t = svd.v_t.as_ref().expect("SVD requested V^T");
    let max = svd.singular_values.max();
    let k = svd.singular_values.len();
    let mut sigma_inv = DMatrix::zeros(k, k);
    for i in 0..k {
        let s = svd.singular_values[i];
        if max > 0.0 && s > rel_tol * max {
            sigma_inv[(i, i)] = 1.0 / s;
        }
    }
    v_t.transpose() * sigma_inv * u.transpose()
}

/// Euclidean norm of `a v - b`.
pub fn residual_norm(a: &DMatrix<f64>, v: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a * v - b).norm()
}
