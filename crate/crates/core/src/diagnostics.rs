//! Convergence and excitation readouts.

use std::io::Write;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::funcspace::{slice_error_metrics, KernelExpansion};
use crate::graph::Graph;
use crate::kernel::Kernel;
use crate::learner::{Estimates, NetworkState};
use crate::linalg;

/// Largest pairwise distance between node estimates: sup over knots in grid
/// mode, RKHS norm in expansion mode, Euclidean norm in finite dimension.
pub fn consensus_gap(state: &NetworkState) -> f64 {
    let n = state.n_nodes();
    let mut gap: f64 = 0.0;
    match state.estimates() {
        Estimates::Grid { functions, .. } => {
            for i in 0..n {
                for j in i + 1..n {
                    gap = gap.max(slice_error_metrics(functions[i].values(), functions[j].values()).sup);
                }
            }
        }
        Estimates::Expansion(shared) => {
            // ‖f_i - f_j‖² = dᵀ G d over the shared centers, without storing G
            let kernel = shared.kernel();
            let centers = shared.centers();
            for i in 0..n {
                for j in i + 1..n {
                    let d: Vec<f64> =
                        shared.coefficients(i).iter().zip(shared.coefficients(j)).map(|(a, b)| a - b).collect();
                    let mut q = 0.0;
                    for (a, (&ca, &da)) in centers.iter().zip(&d).enumerate() {
                        if da == 0.0 {
                            continue;
                        }
                        let row: f64 =
                            centers[..a].iter().zip(&d).map(|(&cb, &db)| db * kernel.eval_unchecked(ca, cb)).sum();
                        q += da * (da * kernel.eval_unchecked(ca, ca) + 2.0 * row);
                    }
                    gap = gap.max(q.max(0.0).sqrt());
                }
            }
        }
        Estimates::FiniteDim(v) => {
            for i in 0..n {
                for j in i + 1..n {
                    gap = gap.max((&v[i] - &v[j]).norm());
                }
            }
        }
    }
    gap
}

/// Sup-grid consensus gap from raw node values.
pub fn grid_consensus_gap(values: &[Vec<f64>]) -> f64 {
    let mut gap: f64 = 0.0;
    for i in 0..values.len() {
        for j in i + 1..values.len() {
            gap = gap.max(slice_error_metrics(&values[i], &values[j]).sup);
        }
    }
    gap
}

/// `‖f - f0‖_K`.
pub fn rkhs_error(f: &KernelExpansion, f0: &KernelExpansion) -> Result<f64> {
    Ok(f.difference(f0)?.rkhs_norm())
}

/// Gram matrices with a larger condition number are rejected.
pub const MAX_DICTIONARY_CONDITION: f64 = 1e14;

#[derive(Debug, Clone, PartialEq)]
pub struct ExcitationSpectrum {
    pub min_eig: f64,
    /// Ascending.
    pub eigs: Vec<f64>,
}

/// Spectrum of `Σ_j Σ_i K_{x_j(i)} ⊗ K_{x_j(i)}` compressed to
/// `span{K_z : z ∈ dictionary}`, for one window of inputs given per node.
pub fn excitation_spectrum(inputs: &[Vec<f64>], kernel: &Kernel, dictionary: &[f64]) -> Result<ExcitationSpectrum> {
    let points: Vec<(f64, f64)> = inputs.iter().flatten().map(|&x| (x, 1.0)).collect();
    weighted_spectrum(&points, kernel, dictionary)
}

/// Spectrum of the Monte-Carlo mean of the window operators over several
/// independent draws of the same window.
pub fn mean_excitation_spectrum(
    windows: &[Vec<Vec<f64>>],
    kernel: &Kernel,
    dictionary: &[f64],
) -> Result<ExcitationSpectrum> {
    if windows.is_empty() {
        return Err(Error::EmptySamples);
    }
    let w = 1.0 / windows.len() as f64;
    let points: Vec<(f64, f64)> = windows.iter().flatten().flatten().map(|&x| (x, w)).collect();
    weighted_spectrum(&points, kernel, dictionary)
}

/// Generalized eigenvalues of `(BᵀWB, G)` where `B[r][l] = K(x_r, z_l)` and
/// `G` is the dictionary Gram matrix.
///
/// The assembled `BᵀWB` loses everything below `ε‖B‖²`, which for smooth
/// kernels is far above the smallest eigenvalues. Instead `√W B = QR` and
/// `G = LLᵀ` are factored separately and the eigenvalues are the squared
/// singular values of `L⁻¹ Rᵀ`.
fn weighted_spectrum(points: &[(f64, f64)], kernel: &Kernel, dictionary: &[f64]) -> Result<ExcitationSpectrum> {
    if dictionary.is_empty() {
        return Err(Error::InvalidArgument("empty dictionary".into()));
    }
    let m = dictionary.len();
    let gram = kernel.gram(dictionary)?;
    let g_eigs = linalg::symmetric_eigenvalues(&gram);
    let cond = if g_eigs[0] > 0.0 { g_eigs[m - 1] / g_eigs[0] } else { f64::INFINITY };
    if !(cond <= MAX_DICTIONARY_CONDITION) {
        return Err(Error::DegenerateDictionary(cond));
    }
    let chol = gram.cholesky().ok_or(Error::DegenerateDictionary(cond))?;
    if points.is_empty() {
        return Ok(ExcitationSpectrum { min_eig: 0.0, eigs: vec![0.0; m] });
    }
    let mut b = DMatrix::zeros(points.len(), m);
    for (r, &(x, w)) in points.iter().enumerate() {
        let x = kernel.check(x)?;
        let s = w.sqrt();
        for (l, &z) in dictionary.iter().enumerate() {
            b[(r, l)] = s * kernel.eval_unchecked(x, z);
        }
    }
    let r = b.qr().r();
    let l = chol.l();
    let whitened = l
        .solve_lower_triangular(&r.transpose())
        .ok_or(Error::DegenerateDictionary(cond))?;
    let mut eigs: Vec<f64> = whitened.singular_values().iter().map(|s| s * s).collect();
    eigs.resize(m, 0.0);
    eigs.sort_by(f64::total_cmp);
    Ok(ExcitationSpectrum { min_eig: eigs[0], eigs })
}

/// Equispaced dictionary of `m` points on `[lo, hi]`.
pub fn uniform_dictionary(lo: f64, hi: f64, m: usize) -> Vec<f64> {
    match m {
        0 => Vec::new(),
        1 => vec![0.5 * (lo + hi)],
        _ => (0..m).map(|l| lo + (hi - lo) * l as f64 / (m - 1) as f64).collect(),
    }
}

/// Writes `window,min_eig` lines.
pub fn write_pe_report<W: Write>(mut w: W, rows: &[(usize, f64)]) -> Result<()> {
    writeln!(w, "window,min_eig")?;
    for (window, min_eig) in rows {
        writeln!(w, "{window},{min_eig:e}")?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositivityReport {
    pub min_eig: f64,
    pub positive: bool,
}

/// Eigenvalues at or below this are treated as zero.
pub const POSITIVITY_TOLERANCE: f64 = 1e-10;

/// Minimum eigenvalue of `diag{H_1, …, H_N} + L ⊗ I_n`.
pub fn joint_positivity_check(graph: &Graph, operators: &[DMatrix<f64>]) -> Result<PositivityReport> {
    let n_nodes = graph.n_nodes();
    if operators.len() != n_nodes {
        return Err(Error::LengthMismatch { expected: n_nodes, actual: operators.len() });
    }
    let n = operators.first().map_or(0, |h| h.nrows());
    for h in operators {
        if h.shape() != (n, n) {
            return Err(Error::DimensionMismatch("operators must share one square shape".into()));
        }
        if !linalg::is_symmetric(h, 1e-12 * h.amax().max(1.0)) {
            return Err(Error::NotSymmetric);
        }
    }
    let assembled = linalg::block_diagonal(operators) + linalg::kron_identity(graph.laplacian().matrix(), n);
    let min_eig = linalg::symmetric_eigenvalues(&assembled).first().copied().unwrap_or(0.0);
    Ok(PositivityReport { min_eig, positive: min_eig > POSITIVITY_TOLERANCE })
}

/// Which steps get a trajectory row: `k = 0` and the powers of ten up to
/// `dense_until`, then every `every` steps, plus the final step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LoggingStride {
    pub dense_until: u64,
    pub every: u64,
}

impl Default for LoggingStride {
    fn default() -> Self {
        LoggingStride { dense_until: 100, every: 1000 }
    }
}

impl LoggingStride {
    pub fn new(dense_until: u64, every: u64) -> Result<Self> {
        if every == 0 {
            return Err(Error::InvalidArgument("logging stride must be positive".into()));
        }
        Ok(LoggingStride { dense_until, every })
    }

    pub fn is_logged(&self, k: u64, terminal: u64) -> bool {
        if k == 0 || k == terminal || k.is_multiple_of(self.every) {
            return true;
        }
        if k > self.dense_until {
            return false;
        }
        let mut p = 1;
        while p < k {
            p *= 10;
        }
        p == k
    }
}

/// One node at one logged step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRow {
    pub k: u64,
    /// Zero-based; written one-based.
    pub node: usize,
    pub sup_err: f64,
    pub rmse: f64,
    pub consensus_gap: f64,
    pub a_k: f64,
    pub b_k: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrajectoryRecord {
    rows: Vec<TrajectoryRow>,
}

impl TrajectoryRecord {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends the rows of one logged step. Steps must strictly increase and
    /// errors must be nonnegative.
    pub fn push_step(&mut self, rows: &[TrajectoryRow]) -> Result<()> {
        let Some(first) = rows.first() else { return Ok(()) };
        let k = first.k;
        if self.rows.last().is_some_and(|r| r.k >= k) {
            return Err(Error::InvalidArgument(format!("step {k} logged out of order")));
        }
        for r in rows {
            if r.k != k {
                return Err(Error::InvalidArgument("rows of one step disagree on k".into()));
            }
            if !(r.sup_err >= 0.0 && r.rmse >= 0.0 && r.consensus_gap >= 0.0) {
                return Err(Error::InvalidArgument(format!("negative or NaN error at step {k}")));
            }
        }
        self.rows.extend_from_slice(rows);
        Ok(())
    }

    pub fn rows(&self) -> &[TrajectoryRow] {
        &self.rows
    }

    /// Rows of the last logged step.
    pub fn last_step(&self) -> &[TrajectoryRow] {
        let Some(last) = self.rows.last() else { return &[] };
        let start = self.rows.iter().rposition(|r| r.k != last.k).map_or(0, |p| p + 1);
        &self.rows[start..]
    }

    /// `k,node,sup_err,rmse,consensus_gap,a_k,b_k`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(["k", "node", "sup_err", "rmse", "consensus_gap", "a_k", "b_k"])?;
        for r in &self.rows {
            csv.write_record([
                r.k.to_string(),
                (r.node + 1).to_string(),
                r.sup_err.to_string(),
                r.rmse.to_string(),
                r.consensus_gap.to_string(),
                r.a_k.to_string(),
                r.b_k.to_string(),
            ])?;
        }
        csv.flush()?;
        Ok(())
    }
}
