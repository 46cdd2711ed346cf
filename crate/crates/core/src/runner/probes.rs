use std::fs::File;
use std::io::BufWriter;
use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::diagnostics::{mean_excitation_spectrum, uniform_dictionary, write_pe_report};
use crate::error::{Error, Result};
use crate::stability::{
    lpq_stability_probe, moment_condition_probe, LpqProbeSpec, LpqTable, MatrixSampler, MomentProbe, VectorSampler,
    MAX_PROBE_DIM,
};

use super::config::Experiment;

#[derive(Debug, Clone, PartialEq)]
pub struct PeCheckReport {
    /// `(window index, min_eig)`.
    pub rows: Vec<(usize, f64)>,
    pub all_positive: bool,
}

impl PeCheckReport {
    pub fn min(&self) -> f64 {
        self.rows.iter().map(|r| r.1).fold(f64::INFINITY, f64::min)
    }
}

/// Smallest eigenvalue of the mean excitation operator of each window
/// `[w h, (w+1) h)`, averaged over `draws` independent replicates, on an
/// equispaced dictionary over the stream support.
pub fn pe_check(exp: &Experiment, windows: u64, draws: u64, dictionary_size: usize) -> Result<PeCheckReport> {
    let h = exp.config.probe.window;
    if h == 0 || windows == 0 || draws == 0 {
        return Err(Error::InvalidArgument("window, windows and draws must be positive".into()));
    }
    let (lo, hi) = exp.stream.input_rule.support();
    let dictionary = uniform_dictionary(lo, hi, dictionary_size);
    let n = exp.graph.n_nodes();
    let rows: Vec<(usize, f64)> = (0..windows)
        .into_par_iter()
        .map(|w| {
            let draws: Vec<Vec<Vec<f64>>> = (0..draws)
                .map(|r| {
                    (0..n)
                        .map(|i| (w * h..(w + 1) * h).map(|t| exp.stream.sample_input(r, i, t)).collect())
                        .collect()
                })
                .collect();
            let s = mean_excitation_spectrum(&draws, &exp.kernel, &dictionary)?;
            Ok((w as usize, s.min_eig))
        })
        .collect::<Result<_>>()?;
    let all_positive = rows.iter().all(|r| r.1 > 0.0);
    Ok(PeCheckReport { rows, all_positive })
}

impl PeCheckReport {
    pub fn write(&self, path: &Path) -> Result<()> {
        write_pe_report(BufWriter::new(File::create(path)?), &self.rows)
    }
}

/// The error-recursion operators of the experiment restricted to an
/// equispaced dictionary of `m` points:
/// `A(k) = I - a(k) diag{h_i hᵢᵀ} - b(k) L ⊗ I_m`, with `h_i` the
/// orthonormal coordinates of the projection of `K_{x_i(k)}` onto the
/// dictionary span.
pub fn benchmark_operator_family(exp: &Experiment, m: usize) -> Result<Arc<MatrixSampler>> {
    let n = exp.graph.n_nodes();
    if m == 0 || n * m > MAX_PROBE_DIM {
        return Err(Error::InvalidArgument(format!(
            "{n} nodes x {m} dictionary points exceeds the probe limit of {MAX_PROBE_DIM}"
        )));
    }
    let (lo, hi) = exp.stream.input_rule.support();
    let dictionary = uniform_dictionary(lo, hi, m);
    let gram = exp.kernel.gram(&dictionary)?;
    let chol = gram.cholesky().ok_or(Error::NotPositiveDefinite)?;
    let l = chol.l();
    let coupling = exp.graph.laplacian().matrix().kronecker(&DMatrix::<f64>::identity(m, m));
    let kernel = exp.kernel;
    let gains = exp.gains;
    let input = exp.stream.input_rule.clone();
    Ok(Arc::new(move |k, rng| {
        let mut a = DMatrix::identity(n * m, n * m) - &coupling * gains.b(k);
        let ak = gains.a(k);
        for i in 0..n {
            let x = input.sample(k, rng);
            let kx = DVector::from_iterator(m, dictionary.iter().map(|&z| kernel.eval_unchecked(x, z)));
            let h = l.solve_lower_triangular(&kx).expect("Cholesky factor is nonsingular");
            let mut block = a.view_mut((i * m, i * m), (m, m));
            block.ger(-ak, &h, &h, 1.0);
        }
        a
    }))
}

/// Standard Gaussian vectors scaled to unit mean square norm.
pub fn gaussian_test_vectors(dim: usize) -> Arc<VectorSampler> {
    let s = 1.0 / (dim as f64).sqrt();
    Arc::new(move |_, rng| DVector::from_fn(dim, |_, _| s * rng.sample::<f64, _>(StandardNormal)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub dim: usize,
    pub lpq: LpqTable,
    pub moments: MomentProbe,
    /// Partial sums grew by at most `1e-6 (1 + total)` over the second half.
    pub moment_sum_flat: bool,
}

/// Runs both probes on [`benchmark_operator_family`] and writes `lpq.csv`
/// and `moments.csv` to `out_dir` when given.
pub fn stability_probe(exp: &Experiment, out_dir: Option<&Path>) -> Result<StabilityReport> {
    let p = &exp.config.probe;
    let family = benchmark_operator_family(exp, p.lpq_dictionary)?;
    let dim = exp.graph.n_nodes() * p.lpq_dictionary;
    let spec = LpqProbeSpec {
        p: p.lpq_p,
        q: p.lpq_q,
        starts: p.lpq_starts.clone(),
        horizon: p.lpq_horizon,
        replicates: p.lpq_replicates,
        decay_fraction: p.decay_fraction,
        master_seed: exp.stream.master_seed,
    };
    let lpq = lpq_stability_probe(&*family, &*gaussian_test_vectors(dim), &spec)?;
    let moments = moment_condition_probe(&*family, p.moment_horizon, p.moment_replicates, exp.stream.master_seed)?;
    let total = moments.partial_sums.last().copied().unwrap_or(0.0);
    let mid = moments.partial_sums.get(moments.partial_sums.len() / 2).copied().unwrap_or(0.0);
    let moment_sum_flat = total - mid <= 1e-6 * (1.0 + total);
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        lpq.write_csv(BufWriter::new(File::create(dir.join("lpq.csv"))?))?;
        moments.write_csv(BufWriter::new(File::create(dir.join("moments.csv"))?))?;
    }
    Ok(StabilityReport { dim, lpq, moments, moment_sum_flat })
}
