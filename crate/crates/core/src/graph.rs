//! Weighted undirected graphs and their Laplacians.
//!
//! Graphs are small (at most a few hundred nodes) so everything is dense.
//! Connectivity is decided combinatorially by a breadth-first traversal over
//! edges of strictly positive weight; the algebraic connectivity (second
//! smallest Laplacian eigenvalue) is available as a quantitative readout.

use std::collections::VecDeque;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg;

/// Edge list of the ten-node benchmark network, 1-based `(i, j, weight)`.
pub const BENCHMARK_EDGES: [(usize, usize, f64); 12] = [
    (1, 2, 0.2),
    (1, 4, 0.4),
    (2, 3, 0.1),
    (2, 4, 0.3),
    (3, 5, 0.5),
    (4, 5, 0.6),
    (4, 6, 0.8),
    (5, 6, 0.7),
    (6, 7, 0.3),
    (7, 8, 0.2),
    (8, 9, 0.9),
    (9, 10, 0.1),
];

/// A weighted undirected graph with symmetric nonnegative adjacency and no
/// self-loops.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    weights: DMatrix<f64>,
    neighbors: Vec<Vec<(usize, f64)>>,
}

/// `L = D - A`.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianMatrix(DMatrix<f64>);

impl LaplacianMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::symmetric_eigenvalues(&self.0)
    }
}

impl Graph {
    /// Validates a full weight matrix. Symmetry is checked exactly.
    pub fn from_weights(weights: DMatrix<f64>) -> Result<Self> {
        if !weights.is_square() {
            return Err(Error::NotSquare {
                rows: weights.nrows(),
                cols: weights.ncols(),
            });
        }
        let n = weights.nrows();
        for i in 0..n {
            if weights[(i, i)] != 0.0 {
                return Err(Error::SelfLoop(i));
            }
            for j in 0..n {
                let w = weights[(i, j)];
                if !(w >= 0.0) || !w.is_finite() {
                    return Err(Error::NegativeWeight { i, j, weight: w });
                }
                if w != weights[(j, i)] {
                    return Err(Error::Asymmetric(i, j));
                }
            }
        }
        let neighbors = (0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| weights[(i, j)] > 0.0)
                    .map(|j| (j, weights[(i, j)]))
                    .collect()
            })
            .collect();
        Ok(Graph { weights, neighbors })
    }

    /// Builds a graph from 0-based undirected edges. Repeated pairs must carry
    /// the same weight.
    pub fn from_edges(n_nodes: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut w = DMatrix::zeros(n_nodes, n_nodes);
        for &(i, j, weight) in edges {
            for index in [i, j] {
                if index >= n_nodes {
                    return Err(Error::NodeOutOfRange { index, n_nodes });
                }
            }
            if i == j {
                return Err(Error::SelfLoop(i));
            }
            if !(weight >= 0.0) || !weight.is_finite() {
                return Err(Error::NegativeWeight { i, j, weight });
            }
            if w[(i, j)] != 0.0 && w[(i, j)] != weight {
                return Err(Error::Asymmetric(i, j));
            }
            w[(i, j)] = weight;
            w[(j, i)] = weight;
        }
        Self::from_weights(w)
    }

    /// Same as [`Graph::from_edges`] with 1-based node labels.
    pub fn from_one_based_edges(n_nodes: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let shifted = edges
            .iter()
            .map(|&(i, j, w)| {
                if i == 0 || j == 0 {
                    Err(Error::NodeOutOfRange { index: 0, n_nodes })
                } else {
                    Ok((i - 1, j - 1, w))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_edges(n_nodes, &shifted)
    }

    /// The ten-node benchmark network.
    pub fn benchmark() -> Self {
        Self::from_one_based_edges(10, &BENCHMARK_EDGES).expect("benchmark edges are valid")
    }

    pub fn n_nodes(&self) -> usize {
        self.weights.nrows()
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[(i, j)]
    }

    /// Neighbours of `i` with their (strictly positive) weights.
    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.neighbors[i]
    }

    pub fn degree(&self, i: usize) -> f64 {
        self.neighbors[i].iter().map(|&(_, w)| w).sum()
    }

    pub fn laplacian(&self) -> LaplacianMatrix {
        let n = self.n_nodes();
        let mut l = -self.weights.clone();
        for i in 0..n {
            l[(i, i)] = self.degree(i);
        }
        LaplacianMatrix(l)
    }

    pub fn is_connected(&self) -> bool {
        let n = self.n_nodes();
        if n == 0 {
            return true;
        }
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        let mut visited = 1;
        while let Some(i) = queue.pop_front() {
            for &(j, _) in &self.neighbors[i] {
                if !seen[j] {
                    seen[j] = true;
                    visited += 1;
                    queue.push_back(j);
                }
            }
        }
        visited == n
    }

    /// Second smallest Laplacian eigenvalue.
    pub fn algebraic_connectivity(&self) -> Result<f64> {
        if self.n_nodes() < 2 {
            return Err(Error::GraphTooSmall(self.n_nodes()));
        }
        Ok(self.laplacian().eigenvalues()[1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn two_node(w: f64) -> Graph {
        Graph::from_edges(2, &[(0, 1, w)]).unwrap()
    }

    #[test]
    fn laplacian_two_node() {
        let l = two_node(0.2).laplacian();
        assert_eq!(l.matrix(), &DMatrix::from_row_slice(2, 2, &[0.2, -0.2, -0.2, 0.2]));
    }

    #[test]
    fn laplacian_benchmark_diagonal_and_rows() {
        let l = Graph::benchmark().laplacian();
        let m = l.matrix();
        assert!((m[(0, 0)] - 0.6).abs() < 1e-15);
        assert!((m[(3, 3)] - 2.1).abs() < 1e-15);
        for i in 0..10 {
            assert!(m.row(i).sum().abs() < 1e-12);
        }
    }

    #[test]
    fn laplacian_single_node() {
        let g = Graph::from_edges(1, &[]).unwrap();
        assert_eq!(g.laplacian().matrix(), &DMatrix::zeros(1, 1));
    }

    #[test]
    fn connectivity_examples() {
        assert!(Graph::benchmark().is_connected());
        assert!(!Graph::from_edges(2, &[]).unwrap().is_connected());
        assert!(Graph::from_edges(3, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap().is_connected());
    }

    #[test]
    fn algebraic_connectivity_examples() {
        assert!((two_node(0.2).algebraic_connectivity().unwrap() - 0.4).abs() < 1e-12);
        assert_eq!(Graph::from_edges(2, &[]).unwrap().algebraic_connectivity().unwrap(), 0.0);
        let single = Graph::from_edges(1, &[]).unwrap();
        assert!(matches!(single.algebraic_connectivity(), Err(Error::GraphTooSmall(1))));
    }

    #[test]
    fn algebraic_connectivity_benchmark() {
        let lambda2 = Graph::benchmark().algebraic_connectivity().unwrap();
        // Reference value from an independent LAPACK eigensolve.
        assert!(lambda2 > 0.0);
        assert!((lambda2 - 0.044_414_700_015).abs() < 1e-9, "λ₂ = {lambda2}");
    }

    #[test]
    fn rejects_invalid_weights() {
        let asym = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.5, 0.0]);
        assert!(matches!(Graph::from_weights(asym), Err(Error::Asymmetric(..))));
        let neg = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, -1.0, 0.0]);
        assert!(matches!(Graph::from_weights(neg), Err(Error::NegativeWeight { .. })));
        let diag = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert!(matches!(Graph::from_weights(diag), Err(Error::SelfLoop(0))));
        assert!(Graph::from_edges(2, &[(0, 2, 1.0)]).is_err());
        assert!(Graph::from_one_based_edges(2, &[(0, 1, 1.0)]).is_err());
    }

    fn random_graph(n: usize, density: f64, seed: u64) -> Graph {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if rng.random::<f64>() < density {
                    edges.push((i, j, rng.random_range(0.01..2.0)));
                }
            }
        }
        Graph::from_edges(n, &edges).unwrap()
    }

    proptest! {
        #[test]
        fn laplacian_is_psd_with_ones_kernel(n in 1usize..20, density in 0.0f64..1.0, seed: u64) {
            let l = random_graph(n, density, seed).laplacian();
            let m = l.matrix();
            for i in 0..n {
                prop_assert!(m.row(i).sum().abs() < 1e-12);
            }
            prop_assert!(l.eigenvalues()[0] >= -1e-10);
            let ones = nalgebra::DVector::from_element(n, 1.0);
            prop_assert!((m * ones).amax() < 1e-12);
        }

        #[test]
        fn connectivity_matches_spectrum(sizes in proptest::collection::vec(1usize..6, 1..4), seed: u64) {
            // planted components: each block is a connected path plus random chords
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let n: usize = sizes.iter().sum();
            let mut edges = Vec::new();
            let mut start = 0;
            for &s in &sizes {
                for i in start..start + s - 1 {
                    edges.push((i, i + 1, rng.random_range(0.05..1.0)));
                }
                for i in start..start + s {
                    for j in i + 2..start + s {
                        if rng.random::<f64>() < 0.3 {
                            edges.push((i, j, rng.random_range(0.05..1.0)));
                        }
                    }
                }
                start += s;
            }
            let g = Graph::from_edges(n, &edges).unwrap();
            prop_assume!(n >= 2);
            let lambda2 = g.algebraic_connectivity().unwrap();
            prop_assert_eq!(g.is_connected(), sizes.len() == 1);
            prop_assert_eq!(g.is_connected(), lambda2 > 1e-10);
        }

        #[test]
        fn adding_edge_never_decreases_connectivity(n in 2usize..15, seed: u64, w in 0.01f64..2.0) {
            let g = random_graph(n, 0.3, seed);
            let missing: Vec<(usize, usize)> = (0..n)
                .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
                .filter(|&(i, j)| g.weight(i, j) == 0.0)
                .collect();
            prop_assume!(!missing.is_empty());
            let (i, j) = missing[(seed as usize) % missing.len()];
            let mut weights = g.weights().clone();
            weights[(i, j)] = w;
            weights[(j, i)] = w;
            let h = Graph::from_weights(weights).unwrap();
            prop_assert!(h.algebraic_connectivity().unwrap() >= g.algebraic_connectivity().unwrap() - 1e-10);
        }
    }
}
