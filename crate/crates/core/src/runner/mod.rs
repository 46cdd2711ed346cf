//! Experiment orchestration: configuration, seeded replicated runs, CSV
//! output and the probe commands.

mod config;
mod experiment;
mod probes;

pub use config::{
    Experiment, ExperimentConfig, FiniteDimConfig, GainsConfig, GraphConfig, GridConfig, InputKind, KernelConfig, KernelKind,
    LogConfig, Mode, ProbeConfig, StreamConfig, TruthConfig, GAIN_CERTIFICATION_HORIZON,
};
pub use experiment::{
    reproduce_fig1, reproduce_fig1_steps, run_experiment, run_replicate, write_grid_table, ExperimentSummary, Fig1Summary,
    ReplicateOutcome, Snapshot,
};
pub use probes::{
    benchmark_operator_family, pe_check, stability_probe, gaussian_test_vectors, PeCheckReport, StabilityReport,
};
