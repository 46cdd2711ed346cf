use std::path::PathBuf;
use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::diagnostics::LoggingStride;
use crate::error::{ConfigError, ConfigViolation};
use crate::funcspace::{Grid, KernelExpansion};
use crate::graph::{Graph, BENCHMARK_EDGES};
use crate::kernel::{Domain, Kernel, KernelFamily};
use crate::learner::{validate_gains, GainSchedule};
use crate::streams::{InputRule, NoiseRule, StreamSpec};

/// How node estimates are represented.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Values on the grid knots, spline-interpolated between them.
    Grid,
    /// Exact kernel expansions with one new center per node and step.
    Expansion,
    /// Linear observations of a finite-dimensional vector.
    FiniteDim,
}

/// Raw experiment description. Every field defaults to the benchmark
/// experiment, so an empty file is a valid config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub master_seed: u64,
    pub steps: u64,
    pub replicates: u64,
    pub mode: Mode,
    /// Reject disconnected graphs.
    pub require_connected: bool,
    pub output_dir: Option<PathBuf>,
    pub graph: GraphConfig,
    pub kernel: KernelConfig,
    pub gains: GainsConfig,
    pub stream: StreamConfig,
    pub grid: GridConfig,
    pub truth: TruthConfig,
    pub log: LogConfig,
    pub finite_dim: FiniteDimConfig,
    pub probe: ProbeConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            master_seed: 0,
            steps: 100_000,
            replicates: 1,
            mode: Mode::Grid,
            require_connected: true,
            output_dir: None,
            graph: GraphConfig::default(),
            kernel: KernelConfig::default(),
            gains: GainsConfig::default(),
            stream: StreamConfig::default(),
            grid: GridConfig::default(),
            truth: TruthConfig::default(),
            log: LogConfig::default(),
            finite_dim: FiniteDimConfig::default(),
            probe: ProbeConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphConfig {
    pub nodes: usize,
    /// `[from, to, weight]` with one-based node numbers.
    pub edges: Vec<(usize, usize, f64)>,
}

impl Default for GraphConfig {
    fn default() -> Self {
        GraphConfig { nodes: 10, edges: BENCHMARK_EDGES.to_vec() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelKind {
    Gaussian,
    Laplace,
    Polynomial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelConfig {
    pub family: KernelKind,
    /// Gaussian `exp(-gamma (x-y)²)`.
    pub gamma: f64,
    /// Laplace `exp(-|x-y| / scale)`.
    pub scale: f64,
    /// Polynomial `(xy + offset)^degree`.
    pub degree: u32,
    pub offset: f64,
    pub lo: f64,
    pub hi: f64,
    /// Clamp out-of-domain inputs instead of rejecting them.
    pub lenient: bool,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig {
            family: KernelKind::Gaussian,
            gamma: 1.0,
            scale: 1.0,
            degree: 2,
            offset: 1.0,
            lo: -2.0,
            hi: 4.0,
            lenient: false,
        }
    }
}

impl KernelConfig {
    pub fn build(&self) -> crate::Result<Kernel> {
        let family = match self.family {
            KernelKind::Gaussian => KernelFamily::Gaussian { gamma: self.gamma },
            KernelKind::Laplace => KernelFamily::Laplace { scale: self.scale },
            KernelKind::Polynomial => KernelFamily::Polynomial { degree: self.degree, offset: self.offset },
        };
        Ok(Kernel::new(family, Domain::new(self.lo, self.hi)?)?.lenient(self.lenient))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GainsConfig {
    pub a_exponent: f64,
    pub b_exponent: f64,
    pub a_scale: f64,
    pub b_scale: f64,
}

impl Default for GainsConfig {
    fn default() -> Self {
        GainsConfig { a_exponent: 0.6, b_exponent: 1.0, a_scale: 1.0, b_scale: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputKind {
    /// Alternating supports `[lo, hi - shift/(k+1)]` and `[lo + shift/(k+1), hi]`.
    ShiftingUniform,
    IidUniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StreamConfig {
    pub input: InputKind,
    pub lo: f64,
    pub hi: f64,
    pub shift: f64,
    /// Gaussian noise variance; 0 means noiseless.
    pub noise_variance: f64,
}

impl Default for StreamConfig {
    fn default() -> Self {
        StreamConfig { input: InputKind::ShiftingUniform, lo: -2.0, hi: 4.0, shift: 3.0, noise_variance: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub count: usize,
    pub lo: f64,
    pub hi: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { count: 1001, lo: -2.0, hi: 4.0 }
    }
}

/// `f* = Σ coefficient K(·, center)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TruthConfig {
    pub centers: Vec<f64>,
    pub coefficients: Vec<f64>,
}

impl Default for TruthConfig {
    fn default() -> Self {
        TruthConfig { centers: vec![1.0], coefficients: vec![1.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogConfig {
    pub dense_until: u64,
    pub every: u64,
    /// Steps at which all node functions are written out.
    pub snapshots: Vec<u64>,
    /// Expansion mode merges coinciding centers every this many steps.
    pub compact_every: u64,
}

impl Default for LogConfig {
    fn default() -> Self {
        let s = LoggingStride::default();
        LogConfig { dense_until: s.dense_until, every: s.every, snapshots: Vec::new(), compact_every: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FiniteDimConfig {
    pub truth: Vec<f64>,
    /// Rows of every node's Gaussian observation matrix.
    pub obs_dim: usize,
}

impl Default for FiniteDimConfig {
    fn default() -> Self {
        FiniteDimConfig { truth: vec![1.0, -0.5, 0.25], obs_dim: 1 }
    }
}

/// Settings of `pe-check` and `stability-probe`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeConfig {
    pub window: u64,
    pub pe_windows: u64,
    pub pe_draws: u64,
    pub pe_dictionary: usize,
    pub lpq_dictionary: usize,
    pub lpq_starts: Vec<u64>,
    pub lpq_horizon: u64,
    pub lpq_replicates: u64,
    pub lpq_p: f64,
    pub lpq_q: f64,
    pub decay_fraction: f64,
    pub moment_horizon: u64,
    pub moment_replicates: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            window: 2,
            pe_windows: 200,
            pe_draws: 200,
            pe_dictionary: 25,
            lpq_dictionary: 6,
            lpq_starts: vec![0, 10, 100, 1000],
            lpq_horizon: 10_000,
            lpq_replicates: 20,
            lpq_p: 2.0,
            lpq_q: 2.0,
            decay_fraction: 0.1,
            moment_horizon: 10_000,
            moment_replicates: 10,
        }
    }
}

/// The gain conditions are asymptotic, so short runs are still certified
/// over this many steps.
pub const GAIN_CERTIFICATION_HORIZON: u64 = 100_000;

/// A validated experiment with every component constructed.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub graph: Graph,
    pub kernel: Kernel,
    pub gains: GainSchedule,
    pub stream: StreamSpec,
    pub grid: Arc<Grid>,
    pub truth: KernelExpansion,
    pub finite_truth: DVector<f64>,
    pub stride: LoggingStride,
}

impl ExperimentConfig {
    /// The benchmark experiment with the given seed.
    pub fn benchmark(master_seed: u64) -> Self {
        ExperimentConfig { master_seed, ..Self::default() }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text)
            .map_err(|e| ConfigError { violations: vec![ConfigViolation::Parse(e.message().to_string())] })
    }

    pub fn from_file(path: &std::path::Path) -> crate::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(Self::from_toml_str(&text)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    /// Builds every component, collecting all violations in one pass.
    pub fn build(&self) -> Result<Experiment, ConfigError> {
        let mut v = Vec::new();
        let graph = self.build_graph(&mut v);
        let kernel = self.kernel.build().map_err(|e| v.push(ConfigViolation::InvalidKernel(e.to_string()))).ok();

        let gains = match GainSchedule::with_scales(
            self.gains.a_exponent,
            self.gains.b_exponent,
            self.gains.a_scale,
            self.gains.b_scale,
        ) {
            Ok(g) => {
                match validate_gains(&g, self.steps.max(GAIN_CERTIFICATION_HORIZON)) {
                    Ok(r) => {
                        for (ok, name) in [
                            (r.cond1, "gains.cond1"),
                            (r.cond2, "gains.cond2"),
                            (r.cond3_sum, "gains.cond3_sum"),
                            (r.cond3_rate, "gains.cond3_rate"),
                        ] {
                            if !ok {
                                v.push(ConfigViolation::GainConditionFailed(name));
                            }
                        }
                    }
                    Err(e) => v.push(ConfigViolation::InvalidGains(e.to_string())),
                }
                Some(g)
            }
            Err(e) => {
                v.push(ConfigViolation::InvalidGains(e.to_string()));
                None
            }
        };

        let s = &self.stream;
        let input = match s.input {
            InputKind::ShiftingUniform => InputRule::ShiftingUniform { lo: s.lo, hi: s.hi, shift: s.shift },
            InputKind::IidUniform => InputRule::IidUniform { lo: s.lo, hi: s.hi },
        };
        let noise = if s.noise_variance == 0.0 {
            NoiseRule::Zero
        } else {
            NoiseRule::Gaussian { variance: s.noise_variance }
        };
        let stream = StreamSpec::new(input, noise, self.master_seed)
            .map_err(|e| v.push(ConfigViolation::InvalidStream(e.to_string())))
            .ok();
        let function_mode = self.mode != Mode::FiniteDim;

        if let (Some(k), Some(st)) = (&kernel, &stream) {
            let support = st.input_rule.support();
            let d = k.domain();
            if function_mode && !d.contains_interval(support.0, support.1) && !k.is_lenient() {
                v.push(ConfigViolation::StreamOutsideKernelDomain { support, domain: (d.lo, d.hi) });
            }
        }

        let grid = Grid::uniform(self.grid.lo, self.grid.hi, self.grid.count)
            .map_err(|e| v.push(ConfigViolation::InvalidGrid(e.to_string())))
            .ok();
        if let (Some(g), Some(k)) = (&grid, &kernel) {
            if function_mode && !k.domain().contains_interval(g.first(), g.last()) {
                v.push(ConfigViolation::GridOutsideKernelDomain);
            }
        }
        if let (Some(g), Some(st)) = (&grid, &stream) {
            let support = st.input_rule.support();
            if self.mode == Mode::Grid && (support.0 < g.first() || support.1 > g.last()) {
                v.push(ConfigViolation::GridMissesStreamSupport { support, grid: (g.first(), g.last()) });
            }
        }

        let truth = self.build_truth(kernel.as_ref(), function_mode, &mut v);

        if self.replicates == 0 {
            v.push(ConfigViolation::NoReplicates);
        }
        let stride = LoggingStride::new(self.log.dense_until, self.log.every)
            .map_err(|e| v.push(ConfigViolation::InvalidLogging(e.to_string())))
            .ok();
        if self.log.compact_every == 0 {
            v.push(ConfigViolation::InvalidLogging("compact_every must be positive".into()));
        }
        if self.mode == Mode::FiniteDim {
            if self.finite_dim.truth.is_empty() {
                v.push(ConfigViolation::InvalidFiniteDim("truth must be nonempty".into()));
            }
            if self.finite_dim.obs_dim == 0 {
                v.push(ConfigViolation::InvalidFiniteDim("obs_dim must be positive".into()));
            }
        }

        if !v.is_empty() {
            return Err(ConfigError { violations: v });
        }
        Ok(Experiment {
            config: self.clone(),
            graph: graph.expect("no violations"),
            kernel: kernel.expect("no violations"),
            gains: gains.expect("no violations"),
            stream: stream.expect("no violations"),
            grid: grid.expect("no violations"),
            truth: truth.expect("no violations"),
            finite_truth: DVector::from_vec(self.finite_dim.truth.clone()),
            stride: stride.expect("no violations"),
        })
    }

    fn build_graph(&self, v: &mut Vec<ConfigViolation>) -> Option<Graph> {
        let n = self.graph.nodes;
        let before = v.len();
        if n == 0 {
            v.push(ConfigViolation::EdgeOutOfRange { edge: 0, node: 0, n_nodes: 0 });
            return None;
        }
        let mut seen = std::collections::HashMap::new();
        let mut edges = Vec::new();
        for (idx, &(from, to, w)) in self.graph.edges.iter().enumerate() {
            let edge = idx + 1;
            let mut ok = true;
            for node in [from, to] {
                if node == 0 || node > n {
                    v.push(ConfigViolation::EdgeOutOfRange { edge, node, n_nodes: n });
                    ok = false;
                }
            }
            if from == to {
                v.push(ConfigViolation::SelfLoop { edge });
                ok = false;
            }
            if !(w >= 0.0 && w.is_finite()) {
                v.push(ConfigViolation::NegativeWeight { edge, weight: w });
                ok = false;
            }
            if ok {
                let key = (from.min(to), from.max(to));
                match seen.get(&key) {
                    Some(&prev) if prev != w => v.push(ConfigViolation::ConflictingEdge { edge }),
                    Some(_) => {}
                    None => {
                        seen.insert(key, w);
                        edges.push((from - 1, to - 1, w));
                    }
                }
            }
        }
        if v.len() > before {
            return None;
        }
        let g = Graph::from_edges(n, &edges).ok()?;
        if self.require_connected && !g.is_connected() {
            v.push(ConfigViolation::GraphDisconnected);
        }
        Some(g)
    }

    fn build_truth(
        &self,
        kernel: Option<&Kernel>,
        function_mode: bool,
        v: &mut Vec<ConfigViolation>,
    ) -> Option<KernelExpansion> {
        let kernel = kernel?;
        let t = &self.truth;
        if !function_mode {
            return Some(KernelExpansion::zero(*kernel));
        }
        if t.centers.len() != t.coefficients.len() {
            v.push(ConfigViolation::InvalidTruth(format!(
                "{} centers but {} coefficients",
                t.centers.len(),
                t.coefficients.len()
            )));
            return None;
        }
        let mut ok = true;
        for &c in &t.centers {
            if !kernel.domain().contains(c) {
                v.push(ConfigViolation::TruthOutsideDomain(c));
                ok = false;
            }
        }
        if !ok {
            return None;
        }
        KernelExpansion::new(*kernel, t.centers.clone(), t.coefficients.clone())
            .map_err(|e| v.push(ConfigViolation::InvalidTruth(e.to_string())))
            .ok()
    }
}
