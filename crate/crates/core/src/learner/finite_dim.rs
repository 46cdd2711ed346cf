use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

use super::{Estimates, GainSchedule, NetworkState};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::linalg;
use crate::streams::{derive_rng, Channel};

/// Draws `H_i(k)` given `(node, step, rng)`.
pub type ObservationSampler = dyn Fn(usize, u64, &mut dyn RngCore) -> DMatrix<f64> + Send + Sync;

/// `y_i(k) = H_i(k) f0 + v_i(k)` with random `m_i × n` observation matrices.
#[derive(Clone)]
pub struct FiniteDimModel {
    truth: DVector<f64>,
    obs_dims: Vec<usize>,
    sampler: Arc<ObservationSampler>,
}

impl fmt::Debug for FiniteDimModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FiniteDimModel")
            .field("truth", &self.truth)
            .field("obs_dims", &self.obs_dims)
            .finish_non_exhaustive()
    }
}

impl FiniteDimModel {
    pub fn new(truth: DVector<f64>, obs_dims: Vec<usize>, sampler: Arc<ObservationSampler>) -> Self {
        FiniteDimModel { truth, obs_dims, sampler }
    }

    /// Observation matrices with i.i.d. standard normal entries.
    pub fn gaussian(truth: DVector<f64>, obs_dims: Vec<usize>) -> Self {
        let n = truth.len();
        let dims = obs_dims.clone();
        let sampler: Arc<ObservationSampler> = Arc::new(move |i, _k, rng| {
            DMatrix::from_fn(dims[i], n, |_, _| StandardNormal.sample(rng))
        });
        Self::new(truth, obs_dims, sampler)
    }

    pub fn dim(&self) -> usize {
        self.truth.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.obs_dims.len()
    }

    pub fn truth(&self) -> &DVector<f64> {
        &self.truth
    }

    pub fn obs_dims(&self) -> &[usize] {
        &self.obs_dims
    }

    /// `H_1(k), …, H_N(k)` from a single generator.
    pub fn sample_operators(&self, k: u64, rng: &mut dyn RngCore) -> Result<Vec<DMatrix<f64>>> {
        (0..self.n_nodes())
            .map(|i| {
                let h = (self.sampler)(i, k, rng);
                self.check_operator(i, &h)?;
                Ok(h)
            })
            .collect()
    }

    /// `H_i(k)` drawn from the counter-derived operator stream of each node.
    pub fn sample_operators_seeded(&self, seed: u64, replicate: u64, k: u64) -> Result<Vec<DMatrix<f64>>> {
        (0..self.n_nodes())
            .map(|i| {
                let mut rng = derive_rng(seed, replicate, i as u64, k, Channel::Operator);
                let h = (self.sampler)(i, k, &mut rng);
                self.check_operator(i, &h)?;
                Ok(h)
            })
            .collect()
    }

    fn check_operator(&self, i: usize, h: &DMatrix<f64>) -> Result<()> {
        if h.shape() != (self.obs_dims[i], self.dim()) {
            return Err(Error::DimensionMismatch(format!(
                "H_{i} is {}x{}, expected {}x{}",
                h.nrows(),
                h.ncols(),
                self.obs_dims[i],
                self.dim()
            )));
        }
        Ok(())
    }

    fn check_inputs(&self, operators: &[DMatrix<f64>], noise: &[DVector<f64>]) -> Result<()> {
        let n = self.n_nodes();
        for len in [operators.len(), noise.len()] {
            if len != n {
                return Err(Error::LengthMismatch { expected: n, actual: len });
            }
        }
        for (i, (h, v)) in operators.iter().zip(noise).enumerate() {
            self.check_operator(i, h)?;
            if v.len() != self.obs_dims[i] {
                return Err(Error::DimensionMismatch(format!(
                    "v_{i} has length {}, expected {}",
                    v.len(),
                    self.obs_dims[i]
                )));
            }
        }
        Ok(())
    }

    /// `y_i = H_i f0 + v_i` for every node.
    pub fn observe(&self, operators: &[DMatrix<f64>], noise: &[DVector<f64>]) -> Result<Vec<DVector<f64>>> {
        self.check_inputs(operators, noise)?;
        Ok(operators.iter().zip(noise).map(|(h, v)| h * &self.truth + v).collect())
    }
}

/// `f_i + a H_iᵀ (y_i - H_i f_i) + b Σ_j a_ij (f_j - f_i)` for every node,
/// with `y_i` generated from the model.
pub fn finite_dim_step(
    state: &NetworkState,
    graph: &Graph,
    gains: &GainSchedule,
    model: &FiniteDimModel,
    operators: &[DMatrix<f64>],
    noise: &[DVector<f64>],
) -> Result<NetworkState> {
    let Estimates::FiniteDim(nodes) = state.estimates() else {
        return Err(Error::RepresentationMismatch("finite_dim_step needs a finite-dimensional state"));
    };
    if graph.n_nodes() != nodes.len() || model.n_nodes() != nodes.len() {
        return Err(Error::LengthMismatch { expected: nodes.len(), actual: graph.n_nodes() });
    }
    if nodes.iter().any(|f| f.len() != model.dim()) {
        return Err(Error::DimensionMismatch("estimate length differs from model dimension".into()));
    }
    let ys = model.observe(operators, noise)?;
    let k = state.step();
    let (a, b) = (gains.a(k), gains.b(k));
    let next = nodes
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let h = &operators[i];
            let residual = &ys[i] - h * f;
            let mut out = f + h.transpose() * residual * a;
            for &(j, w) in graph.neighbors(i) {
                out += (&nodes[j] - f) * (b * w);
            }
            out
        })
        .collect();
    NetworkState::from_vectors(next, k + 1)
}

/// Iterates the stacked network error
/// `e(k+1) = (I - a(k) 𝓗ᵀ𝓗 - b(k) L⊗I) e(k) + a(k) 𝓗ᵀ v(k)`
/// with `𝓗(k) = diag{H_1(k), …, H_N(k)}`, starting at gain index 0.
///
/// Returns `e(0), …, e(T)` for `T = operators.len()` steps.
pub fn error_recursion_trajectory(
    model: &FiniteDimModel,
    graph: &Graph,
    gains: &GainSchedule,
    e0: &DVector<f64>,
    operators: &[Vec<DMatrix<f64>>],
    noise: &[Vec<DVector<f64>>],
) -> Result<Vec<DVector<f64>>> {
    let n_nodes = model.n_nodes();
    let n = model.dim();
    if graph.n_nodes() != n_nodes {
        return Err(Error::LengthMismatch { expected: n_nodes, actual: graph.n_nodes() });
    }
    if e0.len() != n_nodes * n {
        return Err(Error::DimensionMismatch(format!(
            "e0 has length {}, expected {}",
            e0.len(),
            n_nodes * n
        )));
    }
    if operators.len() != noise.len() {
        return Err(Error::LengthMismatch { expected: operators.len(), actual: noise.len() });
    }
    let lifted = linalg::kron_identity(graph.laplacian().matrix(), n);
    let identity = DMatrix::<f64>::identity(n_nodes * n, n_nodes * n);
    let mut e = e0.clone();
    let mut out = Vec::with_capacity(operators.len() + 1);
    out.push(e.clone());
    for (k, (hs, vs)) in operators.iter().zip(noise).enumerate() {
        model.check_inputs(hs, vs)?;
        let big_h = linalg::block_diagonal(hs);
        let big_ht = big_h.transpose();
        let v = linalg::stack(vs);
        let (a, b) = (gains.a(k as u64), gains.b(k as u64));
        let transition = &identity - (&big_ht * &big_h) * a - &lifted * b;
        e = transition * e + big_ht * v * a;
        out.push(e.clone());
    }
    Ok(out)
}
