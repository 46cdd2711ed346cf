use nalgebra::{DMatrix, DVector};

use super::FiniteDimModel;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::linalg;

/// One joint draw of the observation matrices and noises of all nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct LossSample {
    pub operators: Vec<DMatrix<f64>>,
    pub noise: Vec<DVector<f64>>,
}

/// `½ Σ_i Σ_j a_ij ‖f_i - f_j‖²`, which equals `⟨(L⊗I) f, f⟩`.
pub fn laplacian_penalty(f: &DVector<f64>, graph: &Graph) -> Result<f64> {
    let parts = linalg::unstack(f, graph.n_nodes())?;
    let mut acc = 0.0;
    for i in 0..parts.len() {
        for &(j, w) in graph.neighbors(i) {
            acc += w * (&parts[i] - &parts[j]).norm_squared();
        }
    }
    Ok(0.5 * acc)
}

fn check(f: &DVector<f64>, graph: &Graph, model: &FiniteDimModel, samples: &[LossSample]) -> Result<Vec<DVector<f64>>> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    if graph.n_nodes() != model.n_nodes() {
        return Err(Error::LengthMismatch { expected: model.n_nodes(), actual: graph.n_nodes() });
    }
    let parts = linalg::unstack(f, graph.n_nodes())?;
    if parts[0].len() != model.dim() {
        return Err(Error::DimensionMismatch(format!(
            "node blocks have length {}, model dimension is {}",
            parts[0].len(),
            model.dim()
        )));
    }
    Ok(parts)
}

/// Laplacian-regularized empirical loss
/// `½ (mean_s Σ_i ‖y_i - H_i f_i‖² + ⟨(L⊗I) f, f⟩)` over stacked `f`.
pub fn laplacian_loss(
    f: &DVector<f64>,
    graph: &Graph,
    model: &FiniteDimModel,
    samples: &[LossSample],
) -> Result<f64> {
    let parts = check(f, graph, model, samples)?;
    let mut fit = 0.0;
    for s in samples {
        let ys = model.observe(&s.operators, &s.noise)?;
        for ((h, y), fi) in s.operators.iter().zip(&ys).zip(&parts) {
            fit += (y - h * fi).norm_squared();
        }
    }
    fit /= samples.len() as f64;
    let lifted = linalg::kron_identity(graph.laplacian().matrix(), model.dim());
    Ok(0.5 * (fit + f.dot(&(lifted * f))))
}

/// `-mean_s 𝓗ᵀ(y - 𝓗 f) + (L⊗I) f`.
pub fn laplacian_loss_gradient(
    f: &DVector<f64>,
    graph: &Graph,
    model: &FiniteDimModel,
    samples: &[LossSample],
) -> Result<DVector<f64>> {
    let parts = check(f, graph, model, samples)?;
    let mut blocks: Vec<DVector<f64>> = parts.iter().map(|p| DVector::zeros(p.len())).collect();
    for s in samples {
        let ys = model.observe(&s.operators, &s.noise)?;
        for (((h, y), fi), g) in s.operators.iter().zip(&ys).zip(&parts).zip(&mut blocks) {
            *g -= h.transpose() * (y - h * fi);
        }
    }
    let inv = 1.0 / samples.len() as f64;
    let fit = linalg::stack(&blocks) * inv;
    let lifted = linalg::kron_identity(graph.laplacian().matrix(), model.dim());
    Ok(fit + lifted * f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn instance(seed: u64) -> (Graph, FiniteDimModel, Vec<LossSample>, DVector<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n_nodes = rng.random_range(2..=5);
        let dim = rng.random_range(1..=4);
        let mut edges = Vec::new();
        for i in 1..n_nodes {
            edges.push((rng.random_range(0..i), i, rng.random_range(0.1..1.0)));
        }
        let graph = Graph::from_edges(n_nodes, &edges).unwrap();
        let truth = DVector::from_fn(dim, |_, _| rng.random_range(-1.0..1.0));
        let obs: Vec<usize> = (0..n_nodes).map(|_| rng.random_range(1..=3)).collect();
        let model = FiniteDimModel::gaussian(truth, obs.clone());
        let samples = (0..8)
            .map(|k| LossSample {
                operators: model.sample_operators(k, &mut rng).unwrap(),
                noise: obs.iter().map(|&m| DVector::from_fn(m, |_, _| rng.random_range(-0.3..0.3))).collect(),
            })
            .collect();
        let f = DVector::from_fn(n_nodes * dim, |_, _| rng.random_range(-2.0..2.0));
        (graph, model, samples, f)
    }

    #[test]
    fn truth_is_stationary_without_noise() {
        let (graph, model, mut samples, _) = instance(1);
        for s in &mut samples {
            for v in &mut s.noise {
                v.fill(0.0);
            }
        }
        let f = linalg::stack(&vec![model.truth().clone(); graph.n_nodes()]);
        assert!(laplacian_loss(&f, &graph, &model, &samples).unwrap().abs() < 1e-14);
        assert!(laplacian_loss_gradient(&f, &graph, &model, &samples).unwrap().amax() < 1e-14);
    }

    #[test]
    fn consensus_subspace_has_no_penalty() {
        let graph = Graph::from_edges(2, &[(0, 1, 0.7)]).unwrap();
        let u = DVector::from_vec(vec![1.5, -0.25, 3.0]);
        assert_eq!(laplacian_penalty(&linalg::stack(&[u.clone(), u]), &graph).unwrap(), 0.0);
    }

    #[test]
    fn penalty_matches_quadratic_form() {
        let (graph, model, _, f) = instance(2);
        let lifted = linalg::kron_identity(graph.laplacian().matrix(), model.dim());
        let q = f.dot(&(lifted * &f));
        assert!((laplacian_penalty(&f, &graph).unwrap() - q).abs() < 1e-12 * q.abs().max(1.0));
    }

    #[test]
    fn gradient_matches_central_differences() {
        for seed in 0..10 {
            let (graph, model, samples, f) = instance(seed);
            let grad = laplacian_loss_gradient(&f, &graph, &model, &samples).unwrap();
            let mut fd = DVector::zeros(f.len());
            for j in 0..f.len() {
                let h = 1e-6 * f[j].abs().max(1.0);
                let (mut up, mut dn) = (f.clone(), f.clone());
                up[j] += h;
                dn[j] -= h;
                fd[j] = (laplacian_loss(&up, &graph, &model, &samples).unwrap()
                    - laplacian_loss(&dn, &graph, &model, &samples).unwrap())
                    / (2.0 * h);
            }
            let rel = (&fd - &grad).norm() / grad.norm();
            assert!(rel < 1e-6, "seed {seed}: {rel}");
        }
    }

    #[test]
    fn empty_samples_rejected() {
        let (graph, model, _, f) = instance(3);
        assert!(matches!(laplacian_loss(&f, &graph, &model, &[]), Err(Error::EmptySamples)));
        assert!(matches!(laplacian_loss_gradient(&f, &graph, &model, &[]), Err(Error::EmptySamples)));
    }
}
