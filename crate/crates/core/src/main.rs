use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use consensus_rkhs::learner::{validate_gains, GainSchedule};
use consensus_rkhs::runner::{self, ExperimentConfig, Mode};
use consensus_rkhs::Error;

/// Decentralized consensus + innovations learning over a graph.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a gain schedule a(k) = a_scale (k+1)^-a_exp, b(k) = b_scale (k+1)^-b_exp.
    ValidateGains {
        #[arg(long, default_value_t = 0.6)]
        a_exp: f64,
        #[arg(long, default_value_t = 1.0)]
        b_exp: f64,
        #[arg(long, default_value_t = 1.0)]
        a_scale: f64,
        #[arg(long, default_value_t = 1.0)]
        b_scale: f64,
        #[arg(long, default_value_t = 100_000)]
        horizon: u64,
    },
    /// Excitation spectrum of the input stream on an equispaced dictionary.
    PeCheck {
        #[command(flatten)]
        common: Common,
        /// Window indices to check.
        #[arg(long)]
        windows: Option<u64>,
        /// Monte-Carlo draws per window.
        #[arg(long)]
        draws: Option<u64>,
        /// Dictionary size.
        #[arg(long)]
        dictionary: Option<usize>,
    },
    /// L_p^q and fourth-moment probes of the restricted error recursion.
    StabilityProbe {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        horizon: Option<u64>,
        #[arg(long)]
        replicates: Option<u64>,
    },
    /// Run an experiment and write its CSV output.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        steps: Option<u64>,
        #[arg(long)]
        replicates: Option<u64>,
        #[arg(long, value_parser = parse_mode)]
        mode: Option<Mode>,
    },
    /// Write the k = 1000 and k = 100000 node estimates of the benchmark.
    ReproduceFig1 {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, env = "CONSENSUS_RKHS_OUT")]
        out: Option<PathBuf>,
    },
}

#[derive(clap::Args)]
struct Common {
    /// TOML experiment file; omitted fields take benchmark values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (falls back to the config's `output_dir`, then `out`).
    #[arg(long, env = "CONSENSUS_RKHS_OUT")]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.master_seed = seed;
        }
        Ok(cfg)
    }

    fn out_dir(&self, cfg: &ExperimentConfig) -> PathBuf {
        self.out.clone().or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| PathBuf::from("out"))
    }
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    match s {
        "grid" => Ok(Mode::Grid),
        "expansion" => Ok(Mode::Expansion),
        "finite-dim" => Ok(Mode::FiniteDim),
        _ => Err(format!("unknown mode {s:?} (grid, expansion, finite-dim)")),
    }
}

fn status(pass: bool) -> ExitCode {
    println!("status={}", if pass { "pass" } else { "fail" });
    if pass { ExitCode::SUCCESS } else { ExitCode::from(1) }
}

fn execute(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::ValidateGains { a_exp, b_exp, a_scale, b_scale, horizon } => {
            let schedule = GainSchedule::with_scales(a_exp, b_exp, a_scale, b_scale)?;
            let r = validate_gains(&schedule, horizon)?;
            println!("cond1={}", r.cond1);
            println!("cond2={}", r.cond2);
            println!("cond3_sum={}", r.cond3_sum);
            println!("cond3_rate={}", r.cond3_rate);
            println!("rate_sup={}", r.rate_sup);
            Ok(status(r.all_pass()))
        }
        Command::PeCheck { common, windows, draws, dictionary } => {
            let cfg = common.load()?;
            let exp = cfg.build()?;
            let p = &cfg.probe;
            let report = runner::pe_check(
                &exp,
                windows.unwrap_or(p.pe_windows),
                draws.unwrap_or(p.pe_draws),
                dictionary.unwrap_or(p.pe_dictionary),
            )?;
            println!("window,min_eig");
            for (w, e) in &report.rows {
                println!("{w},{e:e}");
            }
            if common.out.is_some() || cfg.output_dir.is_some() {
                let dir = common.out_dir(&cfg);
                std::fs::create_dir_all(&dir)?;
                report.write(&dir.join("pe_report.csv"))?;
            }
            println!("min_eig={:e}", report.min());
            Ok(status(report.all_positive))
        }
        Command::StabilityProbe { common, horizon, replicates } => {
            let mut cfg = common.load()?;
            if let Some(h) = horizon {
                cfg.probe.lpq_horizon = h;
                cfg.probe.moment_horizon = h;
                cfg.probe.lpq_starts.retain(|&n| n < h);
            }
            if let Some(r) = replicates {
                cfg.probe.lpq_replicates = r;
            }
            let exp = cfg.build()?;
            let dir = common.out_dir(&cfg);
            let report = runner::stability_probe(&exp, Some(&dir))?;
            println!("dim={}", report.dim);
            for row in &report.lpq.rows {
                println!("lpq.n={} ratio={:e} q_moment={:e}", row.n, row.ratio(), row.q_moment);
            }
            println!("lpq.pass={}", report.lpq.pass);
            println!("moment.partial_sum={:e}", report.moments.partial_sums.last().copied().unwrap_or(0.0));
            println!("moment.flat={}", report.moment_sum_flat);
            Ok(status(report.lpq.pass && report.moment_sum_flat))
        }
        Command::Run { common, steps, replicates, mode } => {
            let mut cfg = common.load()?;
            if let Some(s) = steps {
                cfg.steps = s;
            }
            if let Some(r) = replicates {
                cfg.replicates = r;
            }
            if let Some(m) = mode {
                cfg.mode = m;
            }
            let exp = cfg.build()?;
            let dir = common.out_dir(&cfg);
            let summary = runner::run_experiment(&exp, &dir)?;
            println!("out={}", dir.display());
            println!("max_sup_err={}", summary.max_sup_err());
            println!("max_consensus_gap={}", summary.max_consensus_gap());
            Ok(status(true))
        }
        Command::ReproduceFig1 { seed, out } => {
            let dir = out.unwrap_or_else(|| PathBuf::from("out"));
            let s = runner::reproduce_fig1(&dir, seed)?;
            println!("out={}", dir.display());
            for (i, (e, l)) in s.early_sup.iter().zip(&s.late_sup).enumerate() {
                println!("node_{}: sup_err k={}: {e} k={}: {l}", i + 1, s.early_k, s.late_k);
            }
            println!("consensus_gap={}", s.late_gap);
            Ok(status(true))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => code,
        Err(Error::Config(e)) => {
            println!("status=invalid-config");
            for v in &e.violations {
                println!("violation={} detail={v}", v.name());
            }
            ExitCode::from(2)
        }
        Err(e) => {
            println!("status=error");
            println!("error={e}");
            ExitCode::from(2)
        }
    }
}
