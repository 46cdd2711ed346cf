mod common;

use common::*;
use consensus_rkhs::diagnostics::joint_positivity_check;
use consensus_rkhs::graph::Graph;
use nalgebra::{DMatrix, DVector};
use rand::Rng;

#[test]
fn definite_sum_on_connected_graph_is_positive() {
    let mut r = rng(101);
    for _ in 0..100 {
        let nodes = r.random_range(2..=7);
        let n = r.random_range(1..=5);
        let g = random_connected_graph(&mut r, nodes);
        let hs = psd_family_with_definite_sum(&mut r, nodes, n);
        let rep = joint_positivity_check(&g, &hs).unwrap();
        assert!(rep.positive, "min eig {}", rep.min_eig);
    }
}

#[test]
fn shared_null_direction_has_zero_quadratic_form() {
    let mut r = rng(102);
    for _ in 0..30 {
        let nodes = r.random_range(2..=6);
        let n = r.random_range(2..=4);
        let g = random_connected_graph(&mut r, nodes);
        let v = DVector::from_fn(n, |_, _| normal(&mut r)).normalize();
        let p = DMatrix::identity(n, n) - &v * v.transpose();
        let hs: Vec<DMatrix<f64>> = (0..nodes)
            .map(|_| {
                let b = DMatrix::from_fn(n, n, |_, _| normal(&mut r));
                let h = &p * b.transpose() * b * &p;
                (&h + h.transpose()) * 0.5
            })
            .collect();
        let rep = joint_positivity_check(&g, &hs).unwrap();
        assert!(!rep.positive && rep.min_eig.abs() < 1e-10);
        // the lifted null vector 1 ⊗ v is where the form vanishes
        let lifted = stack(&vec![v.clone(); nodes]);
        let mut form = 0.0;
        for (i, h) in hs.iter().enumerate() {
            form += v.dot(&(h * &v));
            for &(j, w) in g.neighbors(i) {
                form += 0.5 * w * (lifted.rows(i * n, n) - lifted.rows(j * n, n)).norm_squared();
            }
        }
        assert!(form.abs() <= 1e-10);
    }
}

#[test]
fn excitation_confined_to_one_component_is_not_enough() {
    let g = Graph::from_edges(4, &[(0, 1, 1.0), (2, 3, 1.0)]).unwrap();
    let hs = vec![DMatrix::identity(2, 2), DMatrix::identity(2, 2), DMatrix::zeros(2, 2), DMatrix::zeros(2, 2)];
    assert!(!joint_positivity_check(&g, &hs).unwrap().positive);
    let joined = Graph::from_edges(4, &[(0, 1, 1.0), (1, 2, 0.5), (2, 3, 1.0)]).unwrap();
    assert!(joint_positivity_check(&joined, &hs).unwrap().positive);
}
