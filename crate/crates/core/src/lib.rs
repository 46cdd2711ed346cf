//! Decentralized online learning over a fixed weighted graph.
//!
//! Every node holds its own estimate of an unknown element of a Hilbert
//! space and refines it with a "consensus + innovations" step: a gradient
//! correction from its fresh measurement plus a Laplacian-weighted pull
//! toward its neighbours,
//!
//! ```text
//! f_i(k+1) = f_i(k) + a(k) H_i*(k) (y_i(k) - H_i(k) f_i(k))
//!                   + b(k) Σ_j a_ij (f_j(k) - f_i(k))
//! ```
//!
//! Two specializations are provided: finite-dimensional parameter
//! estimation with random observation matrices, and function estimation in
//! a reproducing kernel Hilbert space where `H_i(k)` is point evaluation at
//! a random input `x_i(k)`.
//!
//! | Module | Purpose |
//! |--------|---------|
//! | [`graph`] | weighted undirected graphs, Laplacian, connectivity |
//! | [`kernel`] | Mercer kernels on an interval, Gram matrices |
//! | [`funcspace`] | kernel expansions and spline-interpolated grid functions |
//! | [`learner`] | gain schedules, node/network updates, loss, error recursion |
//! | [`streams`] | counter-based reproducible input and noise streams |
//! | [`diagnostics`] | errors, consensus gap, excitation spectra, joint positivity |
//! | [`stability`] | random difference equation probes and product contraction |
//! | [`runner`] | experiment configuration, execution and CSV output |

// `!(x >= 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod funcspace;
pub mod graph;
pub mod kernel;
pub mod learner;
mod linalg;
pub mod runner;
pub mod stability;
pub mod streams;

pub use error::{ConfigError, ConfigViolation, Error, Result};
pub use funcspace::{Grid, GridFunction, KernelExpansion, RkhsFunction};
pub use graph::{Graph, LaplacianMatrix};
pub use kernel::{Domain, Kernel, KernelFamily};
pub use learner::{GainSchedule, NetworkState};
