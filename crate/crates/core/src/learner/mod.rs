//! The consensus + innovations recursion and its ingredients.

mod finite_dim;
mod gains;
mod loss;
mod network;

pub use finite_dim::{error_recursion_trajectory, finite_dim_step, FiniteDimModel, ObservationSampler};
pub use gains::{validate_gains, GainReport, GainSchedule};
pub use loss::{laplacian_loss, laplacian_loss_gradient, laplacian_penalty, LossSample};
pub use network::{network_step, rkhs_node_update, Estimates, NetworkState, SharedExpansion};
