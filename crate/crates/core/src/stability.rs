//! Random difference equations `x(k+1) = (I - F(k)) x(k) + G(k) u(k)` and
//! the stability probes built on them.

use std::io::Write;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::RngCore;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg;
use crate::streams::{derive_rng, Channel};

/// `(k, rng) -> matrix`.
pub type MatrixSampler = dyn Fn(u64, &mut dyn RngCore) -> DMatrix<f64> + Send + Sync;
/// `(k, rng) -> vector`.
pub type VectorSampler = dyn Fn(u64, &mut dyn RngCore) -> DVector<f64> + Send + Sync;

/// Probe problems are dense; larger ones are refused.
pub const MAX_PROBE_DIM: usize = 64;

#[derive(Clone)]
pub struct RandomRecursionSpec {
    dim: usize,
    f_sampler: Arc<MatrixSampler>,
    g_sampler: Arc<MatrixSampler>,
    u_sampler: Arc<VectorSampler>,
    initial: DVector<f64>,
}

impl RandomRecursionSpec {
    pub fn new(
        f_sampler: Arc<MatrixSampler>,
        g_sampler: Arc<MatrixSampler>,
        u_sampler: Arc<VectorSampler>,
        initial: DVector<f64>,
    ) -> Result<Self> {
        let dim = initial.len();
        if dim == 0 || dim > MAX_PROBE_DIM {
            return Err(Error::InvalidArgument(format!("dimension {dim} outside 1..={MAX_PROBE_DIM}")));
        }
        Ok(RandomRecursionSpec { dim, f_sampler, g_sampler, u_sampler, initial })
    }

    /// Homogeneous recursion: `G = 0`, `u = 0`.
    pub fn homogeneous(f_sampler: Arc<MatrixSampler>, initial: DVector<f64>) -> Result<Self> {
        let n = initial.len();
        Self::new(
            f_sampler,
            Arc::new(move |_, _| DMatrix::zeros(n, 1)),
            Arc::new(|_, _| DVector::zeros(1)),
            initial,
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn initial(&self) -> &DVector<f64> {
        &self.initial
    }

    /// Empirical zero-mean check of `u(k)` at `k = 0`: every component mean
    /// of `draws` samples must lie within 5 standard errors of zero.
    pub fn check_zero_mean_noise(&self, draws: usize, seed: u64) -> Result<()> {
        if draws < 2 {
            return Err(Error::InvalidArgument("need at least two draws".into()));
        }
        let samples: Vec<DVector<f64>> = (0..draws)
            .map(|r| (self.u_sampler)(0, &mut derive_rng(seed, r as u64, 0, 0, Channel::Noise)))
            .collect();
        let m = samples[0].len();
        if samples.iter().any(|s| s.len() != m) {
            return Err(Error::DimensionMismatch("u sampler changed length".into()));
        }
        let nf = draws as f64;
        for c in 0..m {
            let mean = samples.iter().map(|s| s[c]).sum::<f64>() / nf;
            let var = samples.iter().map(|s| (s[c] - mean).powi(2)).sum::<f64>() / (nf - 1.0);
            if mean.abs() > 5.0 * (var / nf).sqrt() {
                return Err(Error::InvalidArgument(format!(
                    "u component {c} has mean {mean:e}, not zero within sampling error"
                )));
            }
        }
        Ok(())
    }

    fn advance(&self, x: &DVector<f64>, k: u64, seed: u64, replicate: u64) -> Result<DVector<f64>> {
        let n = self.dim;
        let f = (self.f_sampler)(k, &mut derive_rng(seed, replicate, 0, k, Channel::Operator));
        if f.shape() != (n, n) {
            return Err(Error::DimensionMismatch(format!("F({k}) is {:?}, expected {n}x{n}", f.shape())));
        }
        let mut next = (DMatrix::identity(n, n) - f) * x;
        let g = (self.g_sampler)(k, &mut derive_rng(seed, replicate, 1, k, Channel::Operator));
        let u = (self.u_sampler)(k, &mut derive_rng(seed, replicate, 0, k, Channel::Noise));
        if g.nrows() != n || g.ncols() != u.len() {
            return Err(Error::DimensionMismatch(format!(
                "G({k}) is {:?} but u({k}) has length {}",
                g.shape(),
                u.len()
            )));
        }
        next.gemv(1.0, &g, &u, 1.0);
        Ok(next)
    }
}

/// Monte-Carlo estimates of `E‖x(k)‖²`, `k = 0..=steps`.
#[derive(Debug, Clone, PartialEq)]
pub struct RecursionTrajectory {
    pub mean_sq_norm: Vec<f64>,
}

impl RecursionTrajectory {
    pub fn terminal(&self) -> f64 {
        *self.mean_sq_norm.last().expect("trajectory holds k = 0")
    }

    /// `k,mean_sq_norm`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "k,mean_sq_norm")?;
        for (k, v) in self.mean_sq_norm.iter().enumerate() {
            writeln!(w, "{k},{v:e}")?;
        }
        Ok(())
    }
}

/// Replicates run in parallel on independent streams; the mean is summed in
/// replicate order so the result does not depend on scheduling.
pub fn simulate_recursion(
    spec: &RandomRecursionSpec,
    steps: u64,
    replicates: u64,
    master_seed: u64,
) -> Result<RecursionTrajectory> {
    if replicates == 0 {
        return Err(Error::InvalidArgument("replicates must be at least 1".into()));
    }
    let runs: Vec<Vec<f64>> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let mut x = spec.initial.clone();
            let mut norms = Vec::with_capacity(steps as usize + 1);
            norms.push(x.norm_squared());
            for k in 0..steps {
                x = spec.advance(&x, k, master_seed, r)?;
                norms.push(x.norm_squared());
            }
            Ok(norms)
        })
        .collect::<Result<_>>()?;
    let mut mean = vec![0.0; steps as usize + 1];
    for run in &runs {
        for (m, v) in mean.iter_mut().zip(run) {
            *m += v;
        }
    }
    let scale = 1.0 / replicates as f64;
    mean.iter_mut().for_each(|m| *m *= scale);
    Ok(RecursionTrajectory { mean_sq_norm: mean })
}

/// Settings for [`lpq_stability_probe`].
#[derive(Debug, Clone, PartialEq)]
pub struct LpqProbeSpec {
    pub p: f64,
    pub q: f64,
    pub starts: Vec<u64>,
    pub horizon: u64,
    pub replicates: u64,
    /// A row passes when its last moment is at most this fraction of its first.
    pub decay_fraction: f64,
    pub master_seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpqRow {
    pub n: u64,
    /// `moments[j]` estimates `E‖A(n+j)…A(n+1) x(n)‖ᵖ`, so `moments[0] = E‖x(n)‖ᵖ`.
    pub moments: Vec<f64>,
    /// Estimated `E‖x(n)‖^q`.
    pub q_moment: f64,
}

impl LpqRow {
    pub fn ratio(&self) -> f64 {
        let first = self.moments[0];
        let last = *self.moments.last().expect("row is never empty");
        if first > 0.0 { last / first } else { 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpqTable {
    pub rows: Vec<LpqRow>,
    pub pass: bool,
}

impl LpqTable {
    /// `n,m,moment`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "n,m,moment")?;
        for row in &self.rows {
            for (j, v) in row.moments.iter().enumerate() {
                writeln!(w, "{},{},{v:e}", row.n, row.n + j as u64)?;
            }
        }
        Ok(())
    }
}

/// Estimates `E‖∏_{k=n+1}^{m} A(k) x(n)‖ᵖ` for each start `n`.
///
/// Within a replicate all rows see the same realization of `A`, and the
/// starting vector `x(n)` is drawn from `test_vectors(n, rng)` on a stream
/// of its own, which makes it independent of the future factors.
pub fn lpq_stability_probe(
    a_sampler: &MatrixSampler,
    test_vectors: &VectorSampler,
    spec: &LpqProbeSpec,
) -> Result<LpqTable> {
    if !(spec.p > 0.0 && spec.q > 0.0) {
        return Err(Error::InvalidArgument("p and q must be positive".into()));
    }
    if spec.replicates == 0 || spec.starts.is_empty() {
        return Err(Error::InvalidArgument("need at least one replicate and one start".into()));
    }
    if let Some(&n) = spec.starts.iter().find(|&&n| n >= spec.horizon) {
        return Err(Error::InvalidArgument(format!("start {n} is not before horizon {}", spec.horizon)));
    }
    let first = *spec.starts.iter().min().expect("nonempty");
    let runs: Vec<Vec<(Vec<f64>, f64)>> = (0..spec.replicates)
        .into_par_iter()
        .map(|r| {
            let mut rows: Vec<(Vec<f64>, f64)> = vec![(Vec::new(), 0.0); spec.starts.len()];
            let mut xs: Vec<Option<DVector<f64>>> = vec![None; spec.starts.len()];
            for k in first..=spec.horizon {
                if k > first {
                    let a = a_sampler(k, &mut derive_rng(spec.master_seed, r, 0, k, Channel::Operator));
                    for x in xs.iter_mut().flatten() {
                        if a.shape() != (x.len(), x.len()) {
                            return Err(Error::DimensionMismatch(format!(
                                "A({k}) is {:?}, vector has length {}",
                                a.shape(),
                                x.len()
                            )));
                        }
                        *x = &a * &*x;
                    }
                }
                for (s, &n) in spec.starts.iter().enumerate() {
                    if n == k {
                        let x = test_vectors(n, &mut derive_rng(spec.master_seed, r, 0, n, Channel::Auxiliary));
                        rows[s].1 = x.norm().powf(spec.q);
                        xs[s] = Some(x);
                    }
                    if let Some(x) = &xs[s] {
                        rows[s].0.push(x.norm().powf(spec.p));
                    }
                }
            }
            Ok(rows)
        })
        .collect::<Result<_>>()?;
    let scale = 1.0 / spec.replicates as f64;
    let mut rows = Vec::with_capacity(spec.starts.len());
    for (s, &n) in spec.starts.iter().enumerate() {
        let len = (spec.horizon - n + 1) as usize;
        let mut moments = vec![0.0; len];
        let mut q_moment = 0.0;
        for run in &runs {
            for (m, v) in moments.iter_mut().zip(&run[s].0) {
                *m += v;
            }
            q_moment += run[s].1;
        }
        moments.iter_mut().for_each(|m| *m *= scale);
        rows.push(LpqRow { n, moments, q_moment: q_moment * scale });
    }
    let pass = rows.iter().all(|r| r.moments[0] > 0.0 && r.ratio() <= spec.decay_fraction);
    Ok(LpqTable { rows, pass })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentProbe {
    /// `max(E‖A(k)‖⁴ - 1, 0)`.
    pub gamma_hat: Vec<f64>,
    pub partial_sums: Vec<f64>,
    /// Largest `‖A(k)‖⁴` over replicates.
    pub sample_max: Vec<f64>,
}

impl MomentProbe {
    /// `k,gamma_hat,partial_sum`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "k,gamma_hat,partial_sum")?;
        for (k, (g, s)) in self.gamma_hat.iter().zip(&self.partial_sums).enumerate() {
            writeln!(w, "{k},{g:e},{s:e}")?;
        }
        Ok(())
    }
}

/// Fourth-moment probe on `A(k) = I - F(k)`, `k = 0..horizon`.
pub fn moment_condition_probe(
    a_sampler: &MatrixSampler,
    horizon: u64,
    replicates: u64,
    master_seed: u64,
) -> Result<MomentProbe> {
    if replicates < 10 {
        return Err(Error::InvalidArgument("moment probe needs at least 10 replicates".into()));
    }
    let per_step: Vec<(f64, f64)> = (0..horizon)
        .into_par_iter()
        .map(|k| {
            let mut sum = 0.0;
            let mut max: f64 = 0.0;
            for r in 0..replicates {
                let a = a_sampler(k, &mut derive_rng(master_seed, r, 0, k, Channel::Operator));
                let v = linalg::spectral_norm(&a).powi(4);
                sum += v;
                max = max.max(v);
            }
            (sum / replicates as f64, max)
        })
        .collect();
    let gamma_hat: Vec<f64> = per_step.iter().map(|&(m, _)| (m - 1.0).max(0.0)).collect();
    let partial_sums = gamma_hat
        .iter()
        .scan(0.0, |acc, g| {
            *acc += g;
            Some(*acc)
        })
        .collect();
    let sample_max = per_step.iter().map(|&(_, m)| m).collect();
    Ok(MomentProbe { gamma_hat, partial_sums, sample_max })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContractionTrajectory {
    /// `norms[k] = ‖∏_{j=0}^{k} (I - μ(j) H) x‖`.
    pub norms: Vec<f64>,
    pub x_norm: f64,
    /// First index with `μ(j)‖H‖ ≤ 1` (or the step count if none is reached).
    pub d: usize,
    /// `max(1, max_{j<d} ‖I - μ(j) H‖)`.
    pub m: f64,
}

impl ContractionTrajectory {
    pub fn bound(&self) -> f64 {
        self.m.powi(self.d as i32) * self.x_norm
    }

    /// Every norm is within `M^d ‖x‖`, up to rounding in the last few bits.
    pub fn within_bound(&self) -> bool {
        let b = self.bound() * (1.0 + 1e-12);
        self.norms.iter().all(|&v| v <= b)
    }
}

pub fn product_contraction(
    h: &DMatrix<f64>,
    mu: impl Fn(u64) -> f64,
    x: &DVector<f64>,
    steps: u64,
) -> Result<ContractionTrajectory> {
    let n = h.nrows();
    if !h.is_square() || x.len() != n {
        return Err(Error::DimensionMismatch(format!("H is {:?}, x has length {}", h.shape(), x.len())));
    }
    if !linalg::is_symmetric(h, 1e-12 * h.amax().max(1.0)) {
        return Err(Error::NotSymmetric);
    }
    let eigs = linalg::symmetric_eigenvalues(h);
    if eigs.first().is_none_or(|&e| e <= 0.0) {
        return Err(Error::NotPositiveDefinite);
    }
    let h_norm = eigs[n - 1];
    let ident = DMatrix::identity(n, n);
    let mut d = steps as usize;
    let mut m: f64 = 1.0;
    for j in 0..steps {
        let step = mu(j);
        if step * h_norm <= 1.0 {
            d = j as usize;
            break;
        }
        // eigenvalues of I - μH are 1 - μλ
        m = m.max((1.0 - step * eigs[0]).abs()).max((1.0 - step * h_norm).abs());
    }
    let mut norms = Vec::with_capacity(steps as usize);
    let mut y = x.clone();
    for j in 0..steps {
        y = (&ident - h * mu(j)) * &y;
        norms.push(y.norm());
    }
    Ok(ContractionTrajectory { norms, x_norm: x.norm(), d, m })
}
