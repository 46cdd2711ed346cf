use std::sync::Arc;

use nalgebra::DVector;

use super::GainSchedule;
use crate::error::{Error, Result};
use crate::funcspace::{Grid, GridFunction, KernelExpansion, RkhsFunction, MERGE_TOLERANCE};
use crate::graph::Graph;
use crate::kernel::Kernel;

/// Expansions of all nodes over one shared, growing list of centers.
///
/// Every node's estimate lies in the span of the sections at all inputs seen
/// so far by *any* node (the consensus term mixes neighbours' expansions), so
/// storing one center list plus one coefficient row per node keeps the
/// update linear in the number of centers.
#[derive(Debug, Clone, PartialEq)]
pub struct SharedExpansion {
    kernel: Kernel,
    centers: Vec<f64>,
    coefficients: Vec<Vec<f64>>,
}

impl SharedExpansion {
    pub fn zero(kernel: Kernel, n_nodes: usize) -> Self {
        SharedExpansion { kernel, centers: Vec::new(), coefficients: vec![Vec::new(); n_nodes] }
    }

    pub fn from_expansions(kernel: Kernel, nodes: &[KernelExpansion]) -> Result<Self> {
        let mut shared = Self::zero(kernel, nodes.len());
        for f in nodes {
            if *f.kernel() != kernel {
                return Err(Error::KernelMismatch);
            }
            shared.centers.extend_from_slice(f.centers());
        }
        let total = shared.centers.len();
        let mut offset = 0;
        for (row, f) in shared.coefficients.iter_mut().zip(nodes) {
            row.resize(total, 0.0);
            row[offset..offset + f.len()].copy_from_slice(f.coefficients());
            offset += f.len();
        }
        Ok(shared)
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn coefficients(&self, node: usize) -> &[f64] {
        &self.coefficients[node]
    }

    pub fn n_nodes(&self) -> usize {
        self.coefficients.len()
    }

    pub fn node(&self, i: usize) -> KernelExpansion {
        KernelExpansion::new(self.kernel, self.centers.clone(), self.coefficients[i].clone())
            .expect("shared centers are validated")
    }

    fn evaluate_node(&self, i: usize, x: f64) -> f64 {
        self.centers
            .iter()
            .zip(&self.coefficients[i])
            .map(|(&c, &a)| a * self.kernel.eval_unchecked(c, x))
            .sum()
    }

    /// Merges coincident centers across all nodes.
    pub fn compact(&mut self) {
        let mut order: Vec<usize> = (0..self.centers.len()).collect();
        order.sort_by(|&a, &b| self.centers[a].total_cmp(&self.centers[b]));
        let mut centers: Vec<f64> = Vec::with_capacity(order.len());
        let mut slot = vec![0usize; self.centers.len()];
        for i in order {
            match centers.last() {
                Some(&last) if self.centers[i] - last <= MERGE_TOLERANCE => {}
                _ => centers.push(self.centers[i]),
            }
            slot[i] = centers.len() - 1;
        }
        for row in &mut self.coefficients {
            let mut merged = vec![0.0; centers.len()];
            for (i, &a) in row.iter().enumerate() {
                merged[slot[i]] += a;
            }
            *row = merged;
        }
        self.centers = centers;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Estimates {
    Grid { kernel: Kernel, functions: Vec<GridFunction> },
    Expansion(SharedExpansion),
    FiniteDim(Vec<DVector<f64>>),
}

/// All node estimates after `step` synchronous updates.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    step: u64,
    estimates: Estimates,
}

impl NetworkState {
    pub fn zero_grid(kernel: Kernel, grid: Arc<Grid>, n_nodes: usize) -> Result<Self> {
        for &z in grid.points() {
            kernel.check(z)?;
        }
        let functions = (0..n_nodes).map(|_| GridFunction::zero(grid.clone())).collect();
        Ok(NetworkState { step: 0, estimates: Estimates::Grid { kernel, functions } })
    }

    pub fn zero_expansion(kernel: Kernel, n_nodes: usize) -> Self {
        NetworkState { step: 0, estimates: Estimates::Expansion(SharedExpansion::zero(kernel, n_nodes)) }
    }

    pub fn zero_finite_dim(dim: usize, n_nodes: usize) -> Self {
        NetworkState { step: 0, estimates: Estimates::FiniteDim(vec![DVector::zeros(dim); n_nodes]) }
    }

    pub fn from_grid_functions(kernel: Kernel, functions: Vec<GridFunction>, step: u64) -> Result<Self> {
        if let Some(first) = functions.first() {
            if functions.iter().any(|f| !f.same_grid(first)) {
                return Err(Error::GridMismatch);
            }
            for &z in first.grid().points() {
                kernel.check(z)?;
            }
        }
        Ok(NetworkState { step, estimates: Estimates::Grid { kernel, functions } })
    }

    pub fn from_expansions(kernel: Kernel, nodes: &[KernelExpansion], step: u64) -> Result<Self> {
        Ok(NetworkState {
            step,
            estimates: Estimates::Expansion(SharedExpansion::from_expansions(kernel, nodes)?),
        })
    }

    pub fn from_vectors(vectors: Vec<DVector<f64>>, step: u64) -> Result<Self> {
        if let Some(first) = vectors.first() {
            if vectors.iter().any(|v| v.len() != first.len()) {
                return Err(Error::DimensionMismatch("node vectors differ in length".into()));
            }
        }
        Ok(NetworkState { step, estimates: Estimates::FiniteDim(vectors) })
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn estimates(&self) -> &Estimates {
        &self.estimates
    }

    pub fn estimates_mut(&mut self) -> &mut Estimates {
        &mut self.estimates
    }

    pub fn n_nodes(&self) -> usize {
        match &self.estimates {
            Estimates::Grid { functions, .. } => functions.len(),
            Estimates::Expansion(s) => s.n_nodes(),
            Estimates::FiniteDim(v) => v.len(),
        }
    }

    /// Node `i` as an RKHS function; `None` in finite-dimensional mode.
    pub fn node_function(&self, i: usize) -> Option<RkhsFunction> {
        match &self.estimates {
            Estimates::Grid { functions, .. } => Some(functions[i].clone().into()),
            Estimates::Expansion(s) => Some(s.node(i).into()),
            Estimates::FiniteDim(_) => None,
        }
    }

    pub fn node_vectors(&self) -> Option<&[DVector<f64>]> {
        match &self.estimates {
            Estimates::FiniteDim(v) => Some(v),
            _ => None,
        }
    }

    /// Node values on the knots of `grid` (grid functions must already live on
    /// it; expansions are sampled).
    pub fn values_on(&self, grid: &Arc<Grid>) -> Result<Vec<Vec<f64>>> {
        match &self.estimates {
            Estimates::Grid { functions, .. } => functions
                .iter()
                .map(|f| {
                    if f.grid().points() == grid.points() {
                        Ok(f.values().to_vec())
                    } else {
                        Err(Error::GridMismatch)
                    }
                })
                .collect(),
            Estimates::Expansion(s) => {
                for &z in grid.points() {
                    s.kernel.check(z)?;
                }
                Ok((0..s.n_nodes())
                    .map(|i| grid.points().iter().map(|&z| s.evaluate_node(i, z)).collect())
                    .collect())
            }
            Estimates::FiniteDim(_) => {
                Err(Error::RepresentationMismatch("finite-dimensional state has no grid values"))
            }
        }
    }
}

fn check_gains(a: f64, b: f64) -> Result<()> {
    if !(a >= 0.0 && b >= 0.0) {
        return Err(Error::InvalidArgument(format!("gains must be nonnegative, got a={a}, b={b}")));
    }
    Ok(())
}

/// `out[l] = own[l] + g K(x, z_l) + b Σ_j w_j (f_j[l] - own[l])`.
fn grid_update(
    kernel: &Kernel,
    points: &[f64],
    own: &[f64],
    neighbors: &[(f64, &[f64])],
    x: f64,
    innovation: f64,
    b: f64,
) -> Vec<f64> {
    let mut out = vec![0.0; own.len()];
    kernel.column_into(x, points, &mut out);
    for (o, &f) in out.iter_mut().zip(own) {
        *o = f + innovation * *o;
    }
    for &(w, nb) in neighbors {
        let bw = b * w;
        for ((o, &f), &g) in out.iter_mut().zip(own).zip(nb) {
            *o += bw * (g - f);
        }
    }
    out
}

/// One consensus + innovations update of a single node:
///
/// `f_i + a (y - f_i(x)) K_x + b Σ_j w_j (f_j - f_i)`.
pub fn rkhs_node_update(
    kernel: &Kernel,
    f_i: &RkhsFunction,
    neighbors: &[(f64, &RkhsFunction)],
    x: f64,
    y: f64,
    a: f64,
    b: f64,
) -> Result<RkhsFunction> {
    check_gains(a, b)?;
    let x = kernel.check(x)?;
    match f_i {
        RkhsFunction::Expansion(own) => {
            if own.kernel() != kernel {
                return Err(Error::KernelMismatch);
            }
            let innovation = a * (y - own.evaluate_unchecked(x));
            let section = KernelExpansion::section(*kernel, x)?;
            let mut total_weight = 0.0;
            let mut terms = Vec::with_capacity(neighbors.len() + 2);
            for (w, nb) in neighbors {
                let RkhsFunction::Expansion(g) = nb else {
                    return Err(Error::RepresentationMismatch("neighbour is not an expansion"));
                };
                total_weight += w;
                terms.push((b * w, g));
            }
            terms.push((1.0 - b * total_weight, own));
            terms.push((innovation, &section));
            Ok(KernelExpansion::linear_combination(*kernel, &terms)?.into())
        }
        RkhsFunction::Grid(own) => {
            let mut nb_values = Vec::with_capacity(neighbors.len());
            for (w, nb) in neighbors {
                let RkhsFunction::Grid(g) = nb else {
                    return Err(Error::RepresentationMismatch("neighbour is not a grid function"));
                };
                if !g.same_grid(own) {
                    return Err(Error::GridMismatch);
                }
                nb_values.push((*w, g.values()));
            }
            let innovation = a * (y - own.interpolate(x)?);
            let values = grid_update(kernel, own.grid().points(), own.values(), &nb_values, x, innovation, b);
            Ok(GridFunction::new(own.grid().clone(), values)?.into())
        }
    }
}

/// Synchronous update of every node from the step-`k` state with
/// observations `(x_i(k), y_i(k))`.
pub fn network_step(
    state: &NetworkState,
    graph: &Graph,
    gains: &GainSchedule,
    observations: &[(f64, f64)],
) -> Result<NetworkState> {
    let n = state.n_nodes();
    if observations.len() != n {
        return Err(Error::LengthMismatch { expected: n, actual: observations.len() });
    }
    if graph.n_nodes() != n {
        return Err(Error::LengthMismatch { expected: n, actual: graph.n_nodes() });
    }
    let (a, b) = (gains.a(state.step), gains.b(state.step));
    let estimates = match &state.estimates {
        Estimates::Grid { kernel, functions } => {
            let mut next = Vec::with_capacity(n);
            for (i, &(x, y)) in observations.iter().enumerate() {
                let x = kernel.check(x)?;
                let own = &functions[i];
                let nb: Vec<(f64, &[f64])> =
                    graph.neighbors(i).iter().map(|&(j, w)| (w, functions[j].values())).collect();
                let innovation = a * (y - own.interpolate(x)?);
                let values = grid_update(kernel, own.grid().points(), own.values(), &nb, x, innovation, b);
                next.push(GridFunction::new(own.grid().clone(), values)?);
            }
            Estimates::Grid { kernel: *kernel, functions: next }
        }
        Estimates::Expansion(shared) => {
            let kernel = shared.kernel;
            let old = shared.centers.len();
            let mut centers = shared.centers.clone();
            for &(x, _) in observations {
                centers.push(kernel.check(x)?);
            }
            let mut coefficients = Vec::with_capacity(n);
            for (i, &(x, y)) in observations.iter().enumerate() {
                let own = &shared.coefficients[i];
                let mut row = Vec::with_capacity(old + n);
                row.extend_from_slice(own);
                for &(j, w) in graph.neighbors(i) {
                    let bw = b * w;
                    for ((r, &f), &g) in row.iter_mut().zip(own).zip(&shared.coefficients[j]) {
                        *r += bw * (g - f);
                    }
                }
                row.resize(old + n, 0.0);
                row[old + i] = a * (y - shared.evaluate_node(i, x));
                coefficients.push(row);
            }
            Estimates::Expansion(SharedExpansion { kernel, centers, coefficients })
        }
        Estimates::FiniteDim(_) => {
            return Err(Error::RepresentationMismatch(
                "finite-dimensional states are advanced with finite_dim_step",
            ))
        }
    };
    Ok(NetworkState { step: state.step + 1, estimates })
}
