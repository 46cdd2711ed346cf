//! Random instance generators and oracles shared by the integration tests
//! and the acceptance suite.
#![allow(dead_code)]

use consensus_rkhs::graph::Graph;
use consensus_rkhs::learner::{
    error_recursion_trajectory, finite_dim_step, laplacian_loss, laplacian_loss_gradient, FiniteDimModel,
    GainSchedule, LossSample, NetworkState,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut impl Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Random spanning tree plus a few extra edges, positive weights.
pub fn random_connected_graph(rng: &mut impl Rng, n: usize) -> Graph {
    let mut edges = Vec::new();
    for i in 1..n {
        edges.push((rng.random_range(0..i), i, rng.random_range(0.05..1.0)));
    }
    for _ in 0..rng.random_range(0..=n) {
        let (i, j) = (rng.random_range(0..n), rng.random_range(0..n));
        if i != j && !edges.iter().any(|&(a, b, _)| (a, b) == (i, j) || (a, b) == (j, i)) {
            edges.push((i, j, rng.random_range(0.05..1.0)));
        }
    }
    Graph::from_edges(n, &edges).unwrap()
}

/// `Q diag(λ) Qᵀ` with eigenvalues drawn log-uniformly from `[lo, hi]`.
pub fn random_spd(rng: &mut impl Rng, n: usize, lo: f64, hi: f64) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| normal(rng));
    let q = a.qr().q();
    let lam = DVector::from_fn(n, |_, _| (lo.ln() + (hi.ln() - lo.ln()) * rng.random::<f64>()).exp());
    let m = &q * DMatrix::from_diagonal(&lam) * q.transpose();
    (&m + m.transpose()) * 0.5
}

pub fn stack(parts: &[DVector<f64>]) -> DVector<f64> {
    DVector::from_iterator(parts.iter().map(|p| p.len()).sum(), parts.iter().flat_map(|p| p.iter().copied()))
}

/// Largest entrywise gap between `finite_dim_step` errors and the error
/// recursion over one random instance with `N ≤ 5` nodes and `n ≤ 6`.
pub fn error_recursion_deviation(seed: u64, steps: u64) -> f64 {
    let mut r = rng(seed);
    let n_nodes = r.random_range(1..=5);
    let dim = r.random_range(1..=6);
    let truth = DVector::from_fn(dim, |_, _| r.random_range(-2.0..2.0));
    let obs_dims: Vec<usize> = (0..n_nodes).map(|_| r.random_range(1..=dim)).collect();
    let model = FiniteDimModel::gaussian(truth.clone(), obs_dims.clone());
    let graph = random_connected_graph(&mut r, n_nodes);
    let gains = GainSchedule::with_scales(r.random_range(0.55..1.0), r.random_range(0.55..1.0), 0.2, 0.3).unwrap();
    let start: Vec<DVector<f64>> = (0..n_nodes).map(|_| DVector::from_fn(dim, |_, _| normal(&mut r))).collect();
    let e0 = stack(&start.iter().map(|f| f - &truth).collect::<Vec<_>>());
    let mut state = NetworkState::from_vectors(start, 0).unwrap();
    let mut ops = Vec::new();
    let mut noises = Vec::new();
    let mut states = vec![state.clone()];
    for k in 0..steps {
        let h = model.sample_operators_seeded(seed, 0, k).unwrap();
        let v: Vec<DVector<f64>> =
            obs_dims.iter().map(|&m| DVector::from_fn(m, |_, _| 0.3 * normal(&mut r))).collect();
        state = finite_dim_step(&state, &graph, &gains, &model, &h, &v).unwrap();
        states.push(state.clone());
        ops.push(h);
        noises.push(v);
    }
    let traj = error_recursion_trajectory(&model, &graph, &gains, &e0, &ops, &noises).unwrap();
    assert_eq!(traj.len(), states.len());
    states
        .iter()
        .zip(&traj)
        .map(|(s, e)| {
            let errs: Vec<DVector<f64>> = s.node_vectors().unwrap().iter().map(|f| f - &truth).collect();
            (stack(&errs) - e).amax()
        })
        .fold(0.0, f64::max)
}

/// Relative error of the analytic loss gradient against central finite
/// differences at a random point.
pub fn gradient_relative_error(seed: u64) -> f64 {
    let mut r = rng(seed);
    let n_nodes = r.random_range(2..=5);
    let dim = r.random_range(1..=5);
    let truth = DVector::from_fn(dim, |_, _| normal(&mut r));
    let obs_dims: Vec<usize> = (0..n_nodes).map(|_| r.random_range(1..=3)).collect();
    let model = FiniteDimModel::gaussian(truth, obs_dims.clone());
    let graph = random_connected_graph(&mut r, n_nodes);
    let samples: Vec<LossSample> = (0..r.random_range(1..=4))
        .map(|_| LossSample {
            operators: obs_dims.iter().map(|&m| DMatrix::from_fn(m, dim, |_, _| normal(&mut r))).collect(),
            noise: obs_dims.iter().map(|&m| DVector::from_fn(m, |_, _| 0.3 * normal(&mut r))).collect(),
        })
        .collect();
    let f = DVector::from_fn(n_nodes * dim, |_, _| normal(&mut r));
    let g = laplacian_loss_gradient(&f, &graph, &model, &samples).unwrap();
    let fd = DVector::from_fn(f.len(), |j, _| {
        let h = 1e-6 * f[j].abs().max(1.0);
        let (mut up, mut down) = (f.clone(), f.clone());
        up[j] += h;
        down[j] -= h;
        let lu = laplacian_loss(&up, &graph, &model, &samples).unwrap();
        let ld = laplacian_loss(&down, &graph, &model, &samples).unwrap();
        (lu - ld) / (2.0 * h)
    });
    (&g - &fd).norm() / g.norm().max(1e-12)
}

/// `N` random rank-deficient PSD matrices whose sum is positive definite
/// (smallest eigenvalue above `1e-6`).
pub fn psd_family_with_definite_sum(rng: &mut impl Rng, n_nodes: usize, n: usize) -> Vec<DMatrix<f64>> {
    loop {
        let hs: Vec<DMatrix<f64>> = (0..n_nodes)
            .map(|_| {
                let rank = rng.random_range(0..=n);
                let b = DMatrix::from_fn(rank, n, |_, _| normal(rng));
                b.transpose() * b
            })
            .collect();
        let sum = hs.iter().fold(DMatrix::zeros(n, n), |acc, h| acc + h);
        if sum.symmetric_eigenvalues().min() > 1e-6 {
            return hs;
        }
    }
}
