mod common;

use common::*;
use consensus_rkhs::funcspace::{Grid, KernelExpansion};
use consensus_rkhs::graph::Graph;
use consensus_rkhs::kernel::Kernel;
use consensus_rkhs::learner::{finite_dim_step, network_step, FiniteDimModel, GainSchedule, NetworkState};
use consensus_rkhs::streams::StreamSpec;
use nalgebra::DVector;

#[test]
fn error_recursion_matches_network_iterates() {
    for seed in 0..50 {
        let d = error_recursion_deviation(seed, 100);
        assert!(d <= 1e-10, "seed {seed}: {d}");
    }
}

#[test]
fn gradient_matches_finite_differences() {
    for seed in 0..30 {
        let e = gradient_relative_error(500 + seed);
        assert!(e < 1e-6, "seed {seed}: {e}");
    }
}

#[test]
fn noiseless_finite_dim_network_recovers_truth() {
    let truth = DVector::from_vec(vec![0.5, -1.0, 2.0]);
    let model = FiniteDimModel::gaussian(truth.clone(), vec![1; 10]);
    let graph = Graph::benchmark();
    let gains = GainSchedule::benchmark();
    let mut state = NetworkState::zero_finite_dim(3, 10);
    let zero_noise = vec![DVector::zeros(1); 10];
    for k in 0..5000 {
        let ops = model.sample_operators_seeded(3, 0, k).unwrap();
        state = finite_dim_step(&state, &graph, &gains, &model, &ops, &zero_noise).unwrap();
    }
    for f in state.node_vectors().unwrap() {
        assert!((f - &truth).norm() < 1e-3 * truth.norm(), "{f}");
    }
}

/// With every input on a knot the spline readout is exact, so the grid and
/// expansion representations follow the same recursion.
#[test]
fn grid_matches_expansion_when_inputs_are_knots() {
    let kernel = Kernel::gaussian(1.0, -2.0, 4.0).unwrap();
    let grid = Grid::uniform(-2.0, 4.0, 61).unwrap();
    let graph = Graph::benchmark();
    let gains = GainSchedule::benchmark();
    let truth = KernelExpansion::section(kernel, 1.0).unwrap();
    let stream = StreamSpec::benchmark(4);
    let mut g = NetworkState::zero_grid(kernel, grid.clone(), 10).unwrap();
    let mut e = NetworkState::zero_expansion(kernel, 10);
    for t in 0..200 {
        let obs: Vec<(f64, f64)> = (0..10)
            .map(|i| {
                let l = ((stream.sample_input(0, i, t) + 2.0) * 10.0).round();
                let x = grid.points()[l as usize];
                (x, truth.evaluate(x).unwrap() + stream.sample_noise(0, i, t))
            })
            .collect();
        g = network_step(&g, &graph, &gains, &obs).unwrap();
        e = network_step(&e, &graph, &gains, &obs).unwrap();
    }
    let (gv, ev) = (g.values_on(&grid).unwrap(), e.values_on(&grid).unwrap());
    for (a, b) in gv.iter().flatten().zip(ev.iter().flatten()) {
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }
}
