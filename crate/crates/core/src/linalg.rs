//! Small dense linear algebra helpers shared across modules.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Eigenvalues of a symmetric matrix in ascending order.
pub(crate) fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let mut eigs: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    eigs.sort_by(f64::total_cmp);
    eigs
}

pub(crate) fn is_symmetric(m: &DMatrix<f64>, tol: f64) -> bool {
    if !m.is_square() {
        return false;
    }
    let n = m.nrows();
    (0..n).all(|i| (0..i).all(|j| (m[(i, j)] - m[(j, i)]).abs() <= tol))
}

/// Induced 2-norm. Symmetric inputs go through the (cheaper) eigenvalue route.
pub(crate) fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let scale = m.amax();
    if is_symmetric(m, 1e-14 * scale.max(1.0)) {
        symmetric_eigenvalues(m)
            .into_iter()
            .fold(0.0, |acc, e| acc.max(e.abs()))
    } else {
        m.clone().singular_values().max()
    }
}

/// Kronecker lift `L ⊗ I_n`.
pub(crate) fn kron_identity(l: &DMatrix<f64>, n: usize) -> DMatrix<f64> {
    l.kronecker(&DMatrix::identity(n, n))
}

/// Block-diagonal assembly of rectangular blocks.
pub(crate) fn block_diagonal(blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), (b.nrows(), b.ncols())).copy_from(b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

pub(crate) fn stack(parts: &[DVector<f64>]) -> DVector<f64> {
    let len = parts.iter().map(|p| p.len()).sum();
    let mut out = DVector::zeros(len);
    let mut off = 0;
    for p in parts {
        out.rows_mut(off, p.len()).copy_from(p);
        off += p.len();
    }
    out
}

pub(crate) fn unstack(v: &DVector<f64>, blocks: usize) -> Result<Vec<DVector<f64>>> {
    if blocks == 0 || !v.len().is_multiple_of(blocks) {
        return Err(Error::DimensionMismatch(format!(
            "stacked length {} not divisible into {blocks} blocks",
            v.len()
        )));
    }
    let n = v.len() / blocks;
    Ok((0..blocks).map(|i| v.rows(i * n, n).into_owned()).collect())
}
