use std::fmt;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("weight matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("weight matrix is not symmetric at ({0}, {1})")]
    Asymmetric(usize, usize),

    #[error("negative weight {weight} at ({i}, {j})")]
    NegativeWeight { i: usize, j: usize, weight: f64 },

    #[error("nonzero self-loop weight at node {0}")]
    SelfLoop(usize),

    #[error("node index {index} out of range for {n_nodes} nodes")]
    NodeOutOfRange { index: usize, n_nodes: usize },

    #[error("graph too small: {0} nodes")]
    GraphTooSmall(usize),

    #[error("out of domain: {x} not in [{lo}, {hi}]")]
    OutOfDomain { x: f64, lo: f64, hi: f64 },

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("kernel mismatch")]
    KernelMismatch,

    #[error("representation mismatch: {0}")]
    RepresentationMismatch(&'static str),

    #[error("grid mismatch")]
    GridMismatch,

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("extrapolation refused: {x} outside [{lo}, {hi}]")]
    Extrapolation { x: f64, lo: f64, hi: f64 },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid gain schedule: {0}")]
    InvalidGains(String),

    #[error("empty sample set")]
    EmptySamples,

    #[error("dictionary degenerate: Gram condition number {0:.3e}")]
    DegenerateDictionary(f64),

    #[error("matrix is not symmetric")]
    NotSymmetric,

    #[error("matrix is not symmetric positive definite")]
    NotPositiveDefinite,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// One violated invariant of an experiment configuration.
#[derive(Debug, Clone, PartialEq)]
pub enum ConfigViolation {
    Parse(String),
    EdgeOutOfRange { edge: usize, node: usize, n_nodes: usize },
    SelfLoop { edge: usize },
    NegativeWeight { edge: usize, weight: f64 },
    ConflictingEdge { edge: usize },
    GraphDisconnected,
    InvalidKernel(String),
    InvalidGains(String),
    GainConditionFailed(&'static str),
    StreamOutsideKernelDomain { support: (f64, f64), domain: (f64, f64) },
    InvalidStream(String),
    InvalidGrid(String),
    GridOutsideKernelDomain,
    GridMissesStreamSupport { support: (f64, f64), grid: (f64, f64) },
    TruthOutsideDomain(f64),
    InvalidTruth(String),
    NoReplicates,
    InvalidFiniteDim(String),
    InvalidLogging(String),
}

impl ConfigViolation {
    /// Stable machine-readable name of the violation.
    pub fn name(&self) -> &'static str {
        match self {
            ConfigViolation::Parse(_) => "parse",
            ConfigViolation::EdgeOutOfRange { .. } => "graph.edge_out_of_range",
            ConfigViolation::SelfLoop { .. } => "graph.self_loop",
            ConfigViolation::NegativeWeight { .. } => "graph.negative_weight",
            ConfigViolation::ConflictingEdge { .. } => "graph.conflicting_edge",
            ConfigViolation::GraphDisconnected => "graph.disconnected",
            ConfigViolation::InvalidKernel(_) => "kernel.invalid",
            ConfigViolation::InvalidGains(_) => "gains.invalid",
            ConfigViolation::GainConditionFailed(_) => "gains.condition_failed",
            ConfigViolation::StreamOutsideKernelDomain { .. } => "stream.outside_kernel_domain",
            ConfigViolation::InvalidStream(_) => "stream.invalid",
            ConfigViolation::InvalidGrid(_) => "grid.invalid",
            ConfigViolation::GridOutsideKernelDomain => "grid.outside_kernel_domain",
            ConfigViolation::GridMissesStreamSupport { .. } => "grid.misses_stream_support",
            ConfigViolation::TruthOutsideDomain(_) => "truth.outside_domain",
            ConfigViolation::InvalidTruth(_) => "truth.invalid",
            ConfigViolation::NoReplicates => "replicates.zero",
            ConfigViolation::InvalidFiniteDim(_) => "finite_dim.invalid",
            ConfigViolation::InvalidLogging(_) => "log.invalid",
        }
    }
}

impl fmt::Display for ConfigViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: ", self.name())?;
        match self {
            ConfigViolation::Parse(msg)
            | ConfigViolation::InvalidKernel(msg)
            | ConfigViolation::InvalidGains(msg)
            | ConfigViolation::InvalidStream(msg)
            | ConfigViolation::InvalidGrid(msg)
            | ConfigViolation::InvalidTruth(msg)
            | ConfigViolation::InvalidFiniteDim(msg)
            | ConfigViolation::InvalidLogging(msg) => write!(f, "{msg}"),
            ConfigViolation::EdgeOutOfRange { edge, node, n_nodes } => {
                write!(f, "edge #{edge} references node {node} (nodes are 1..={n_nodes})")
            }
            ConfigViolation::SelfLoop { edge } => write!(f, "edge #{edge} is a self-loop"),
            ConfigViolation::NegativeWeight { edge, weight } => {
                write!(f, "edge #{edge} has weight {weight}")
            }
            ConfigViolation::ConflictingEdge { edge } => {
                write!(f, "edge #{edge} repeats a node pair with a different weight")
            }
            ConfigViolation::GraphDisconnected => write!(f, "graph is not connected"),
            ConfigViolation::GainConditionFailed(which) => write!(f, "{which} does not hold"),
            ConfigViolation::StreamOutsideKernelDomain { support, domain } => write!(
                f,
                "stream support [{}, {}] exceeds kernel domain [{}, {}]",
                support.0, support.1, domain.0, domain.1
            ),
            ConfigViolation::GridOutsideKernelDomain => {
                write!(f, "grid leaves the kernel domain")
            }
            ConfigViolation::GridMissesStreamSupport { support, grid } => write!(
                f,
                "stream support [{}, {}] not covered by grid hull [{}, {}]",
                support.0, support.1, grid.0, grid.1
            ),
            ConfigViolation::TruthOutsideDomain(c) => {
                write!(f, "truth center {c} outside kernel domain")
            }
            ConfigViolation::NoReplicates => write!(f, "replicates must be at least 1"),
        }
    }
}

/// Every violation found in one validation pass.
#[derive(Debug, Clone, PartialEq, Error)]
pub struct ConfigError {
    pub violations: Vec<ConfigViolation>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid config ({} violation(s))", self.violations.len())?;
        for v in &self.violations {
            write!(f, "\n  {v}")?;
        }
        Ok(())
    }
}
