use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::DVector;
use rayon::prelude::*;

use crate::diagnostics::{consensus_gap, grid_consensus_gap, TrajectoryRecord, TrajectoryRow};
use crate::error::{Error, Result};
use crate::funcspace::slice_error_metrics;
use crate::learner::{finite_dim_step, network_step, Estimates, FiniteDimModel, NetworkState};
use crate::streams::{derive_rng, Channel};

use super::config::{Experiment, ExperimentConfig, Mode};

/// Node values at one step: grid values in the function modes, state
/// vectors in finite dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub k: u64,
    pub values: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateOutcome {
    pub replicate: u64,
    pub record: TrajectoryRecord,
    pub snapshots: Vec<Snapshot>,
    pub last: Snapshot,
}

impl ReplicateOutcome {
    /// Trajectory rows logged at step `k`.
    pub fn rows_at(&self, k: u64) -> Vec<TrajectoryRow> {
        self.record.rows().iter().filter(|r| r.k == k).copied().collect()
    }
}

/// Runs one replicate, keeping node values at the listed steps.
pub fn run_replicate(exp: &Experiment, replicate: u64, snapshot_steps: &[u64]) -> Result<ReplicateOutcome> {
    match exp.config.mode {
        Mode::Grid | Mode::Expansion => run_function_replicate(exp, replicate, snapshot_steps),
        Mode::FiniteDim => run_finite_replicate(exp, replicate, snapshot_steps),
    }
}

fn run_function_replicate(exp: &Experiment, replicate: u64, snapshot_steps: &[u64]) -> Result<ReplicateOutcome> {
    let n = exp.graph.n_nodes();
    let steps = exp.config.steps;
    let truth: Vec<f64> = exp.grid.points().iter().map(|&z| exp.truth.evaluate(z)).collect::<Result<_>>()?;
    let mut state = match exp.config.mode {
        Mode::Grid => NetworkState::zero_grid(exp.kernel, exp.grid.clone(), n)?,
        _ => NetworkState::zero_expansion(exp.kernel, n),
    };
    let mut record = TrajectoryRecord::new();
    let mut snapshots = Vec::new();
    let observe = |state: &NetworkState, record: &mut TrajectoryRecord, snapshots: &mut Vec<Snapshot>| {
        let k = state.step();
        let logged = exp.stride.is_logged(k, steps);
        let snap = snapshot_steps.contains(&k) || k == steps;
        if !logged && !snap {
            return Ok(None);
        }
        let values = state.values_on(&exp.grid)?;
        if logged {
            let gap = grid_consensus_gap(&values);
            let rows: Vec<TrajectoryRow> = values
                .iter()
                .enumerate()
                .map(|(node, v)| {
                    let m = slice_error_metrics(v, &truth);
                    TrajectoryRow {
                        k,
                        node,
                        sup_err: m.sup,
                        rmse: m.rmse,
                        consensus_gap: gap,
                        a_k: exp.gains.a(k),
                        b_k: exp.gains.b(k),
                    }
                })
                .collect();
            record.push_step(&rows)?;
        }
        if snapshot_steps.contains(&k) {
            snapshots.push(Snapshot { k, values: values.clone() });
        }
        Ok::<_, Error>((k == steps).then_some(Snapshot { k, values }))
    };

    let mut last = observe(&state, &mut record, &mut snapshots)?;
    let mut obs = vec![(0.0, 0.0); n];
    for t in 0..steps {
        for (i, o) in obs.iter_mut().enumerate() {
            let x = exp.stream.sample_input(replicate, i, t);
            let y = exp.truth.evaluate(x)? + exp.stream.sample_noise(replicate, i, t);
            *o = (x, y);
        }
        state = network_step(&state, &exp.graph, &exp.gains, &obs)?;
        if let Estimates::Expansion(shared) = state.estimates_mut() {
            if state_step_due(t + 1, exp.config.log.compact_every) {
                shared.compact();
            }
        }
        if let Some(s) = observe(&state, &mut record, &mut snapshots)? {
            last = Some(s);
        }
    }
    Ok(ReplicateOutcome { replicate, record, snapshots, last: last.expect("terminal step is always observed") })
}

fn state_step_due(k: u64, every: u64) -> bool {
    k.is_multiple_of(every)
}

fn run_finite_replicate(exp: &Experiment, replicate: u64, snapshot_steps: &[u64]) -> Result<ReplicateOutcome> {
    let n = exp.graph.n_nodes();
    let steps = exp.config.steps;
    let seed = exp.stream.master_seed;
    let obs_dim = exp.config.finite_dim.obs_dim;
    let truth = exp.finite_truth.clone();
    let dim = truth.len();
    let model = FiniteDimModel::gaussian(truth.clone(), vec![obs_dim; n]);
    let mut state = NetworkState::zero_finite_dim(dim, n);
    let mut record = TrajectoryRecord::new();
    let mut snapshots = Vec::new();
    let mut last = None;
    for t in 0..=steps {
        if t > 0 {
            let k = t - 1;
            let operators = model.sample_operators_seeded(seed, replicate, k)?;
            let noise: Vec<DVector<f64>> = (0..n)
                .map(|i| {
                    let mut rng = derive_rng(seed, replicate, i as u64, k, Channel::Noise);
                    DVector::from_fn(obs_dim, |_, _| exp.stream.noise_rule.sample(&mut rng))
                })
                .collect();
            state = finite_dim_step(&state, &exp.graph, &exp.gains, &model, &operators, &noise)?;
        }
        let vectors = state.node_vectors().expect("finite-dimensional state");
        if exp.stride.is_logged(t, steps) {
            let gap = consensus_gap(&state);
            let rows: Vec<TrajectoryRow> = vectors
                .iter()
                .enumerate()
                .map(|(node, f)| {
                    let e = f - &truth;
                    TrajectoryRow {
                        k: t,
                        node,
                        sup_err: e.amax(),
                        rmse: e.norm() / (dim as f64).sqrt(),
                        consensus_gap: gap,
                        a_k: exp.gains.a(t),
                        b_k: exp.gains.b(t),
                    }
                })
                .collect();
            record.push_step(&rows)?;
        }
        let values = || vectors.iter().map(|v| v.iter().copied().collect()).collect();
        if snapshot_steps.contains(&t) {
            snapshots.push(Snapshot { k: t, values: values() });
        }
        if t == steps {
            last = Some(Snapshot { k: t, values: values() });
        }
    }
    Ok(ReplicateOutcome { replicate, record, snapshots, last: last.expect("loop reaches steps") })
}

/// `x,node_1..node_N,f_star` (or `component,…,truth` in finite dimension).
pub fn write_grid_table<W: Write>(w: W, first: &str, xs: &[f64], nodes: &[Vec<f64>], last: &str, truth: &[f64]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    let mut header = vec![first.to_string()];
    header.extend((1..=nodes.len()).map(|i| format!("node_{i}")));
    header.push(last.to_string());
    csv.write_record(&header)?;
    for (l, x) in xs.iter().enumerate() {
        let mut rec = vec![x.to_string()];
        rec.extend(nodes.iter().map(|v| v[l].to_string()));
        rec.push(truth[l].to_string());
        csv.write_record(&rec)?;
    }
    csv.flush()?;
    Ok(())
}

fn write_values(exp: &Experiment, path: &Path, values: &[Vec<f64>]) -> Result<()> {
    let w = BufWriter::new(File::create(path)?);
    if exp.config.mode == Mode::FiniteDim {
        let xs: Vec<f64> = (0..exp.finite_truth.len()).map(|c| c as f64).collect();
        let truth: Vec<f64> = exp.finite_truth.iter().copied().collect();
        write_grid_table(w, "component", &xs, values, "truth", &truth)
    } else {
        let truth: Vec<f64> = exp.grid.points().iter().map(|&z| exp.truth.evaluate(z)).collect::<Result<_>>()?;
        write_grid_table(w, "x", exp.grid.points(), values, "f_star", &truth)
    }
}

/// Terminal rows of every replicate.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSummary {
    pub terminal: Vec<Vec<TrajectoryRow>>,
}

impl ExperimentSummary {
    pub fn max_sup_err(&self) -> f64 {
        self.terminal.iter().flatten().fold(0.0, |m, r| m.max(r.sup_err))
    }

    pub fn max_consensus_gap(&self) -> f64 {
        self.terminal.iter().flatten().fold(0.0, |m, r| m.max(r.consensus_gap))
    }

    /// `replicate,node,k,sup_err,rmse,consensus_gap`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(["replicate", "node", "k", "sup_err", "rmse", "consensus_gap"])?;
        for (r, rows) in self.terminal.iter().enumerate() {
            for row in rows {
                csv.write_record([
                    r.to_string(),
                    (row.node + 1).to_string(),
                    row.k.to_string(),
                    row.sup_err.to_string(),
                    row.rmse.to_string(),
                    row.consensus_gap.to_string(),
                ])?;
            }
        }
        csv.flush()?;
        Ok(())
    }
}

/// Runs every replicate (in parallel) and writes, under `out_dir`:
/// `config.toml`, `summary.csv`, and per replicate `replicate_<r>/` with
/// `trajectory.csv`, `final.csv` and one `snapshot_<k>.csv` per snapshot.
pub fn run_experiment(exp: &Experiment, out_dir: &Path) -> Result<ExperimentSummary> {
    fs::create_dir_all(out_dir)?;
    let echo = ExperimentConfig { output_dir: None, ..exp.config.clone() };
    fs::write(out_dir.join("config.toml"), echo.to_toml_string())?;
    let snapshot_steps = exp.config.log.snapshots.clone();
    let terminal: Vec<Vec<TrajectoryRow>> = (0..exp.config.replicates)
        .into_par_iter()
        .map(|r| {
            let outcome = run_replicate(exp, r, &snapshot_steps)?;
            let dir = out_dir.join(format!("replicate_{r}"));
            fs::create_dir_all(&dir)?;
            outcome.record.write_csv(BufWriter::new(File::create(dir.join("trajectory.csv"))?))?;
            write_values(exp, &dir.join("final.csv"), &outcome.last.values)?;
            for s in &outcome.snapshots {
                write_values(exp, &dir.join(format!("snapshot_{}.csv", s.k)), &s.values)?;
            }
            Ok(outcome.record.last_step().to_vec())
        })
        .collect::<Result<_>>()?;
    let summary = ExperimentSummary { terminal };
    summary.write_csv(BufWriter::new(File::create(out_dir.join("summary.csv"))?))?;
    Ok(summary)
}

/// Per-node sup errors of one figure run.
#[derive(Debug, Clone, PartialEq)]
pub struct Fig1Summary {
    pub master_seed: u64,
    pub early_k: u64,
    pub late_k: u64,
    pub early_sup: Vec<f64>,
    pub late_sup: Vec<f64>,
    pub late_gap: f64,
}

/// Benchmark run writing `fig1a.csv` (k = 1000), `fig1b.csv` (k = 100000)
/// and the trajectory.
pub fn reproduce_fig1(out_dir: &Path, master_seed: u64) -> Result<Fig1Summary> {
    reproduce_fig1_steps(out_dir, master_seed, 1000, 100_000)
}

/// [`reproduce_fig1`] with other snapshot steps.
pub fn reproduce_fig1_steps(out_dir: &Path, master_seed: u64, early: u64, late: u64) -> Result<Fig1Summary> {
    if early > late {
        return Err(Error::InvalidArgument(format!("early step {early} after late step {late}")));
    }
    let mut cfg = ExperimentConfig::benchmark(master_seed);
    cfg.steps = late;
    let exp = cfg.build()?;
    let outcome = run_replicate(&exp, 0, &[early])?;
    fs::create_dir_all(out_dir)?;
    let early_snap = outcome.snapshots.iter().find(|s| s.k == early).expect("snapshot requested");
    write_values(&exp, &out_dir.join("fig1a.csv"), &early_snap.values)?;
    write_values(&exp, &out_dir.join("fig1b.csv"), &outcome.last.values)?;
    outcome.record.write_csv(BufWriter::new(File::create(out_dir.join("trajectory.csv"))?))?;

    let truth: Vec<f64> = exp.grid.points().iter().map(|&z| exp.truth.evaluate(z)).collect::<Result<_>>()?;
    let sups = |values: &[Vec<f64>]| values.iter().map(|v| slice_error_metrics(v, &truth).sup).collect();
    Ok(Fig1Summary {
        master_seed,
        early_k: early,
        late_k: late,
        early_sup: sups(&early_snap.values),
        late_sup: sups(&outcome.last.values),
        late_gap: grid_consensus_gap(&outcome.last.values),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn short(mode: Mode, steps: u64) -> Experiment {
        let mut cfg = ExperimentConfig::benchmark(3);
        cfg.mode = mode;
        cfg.steps = steps;
        cfg.replicates = 2;
        cfg.log.compact_every = 7;
        cfg.build().unwrap()
    }

    #[test]
    fn zero_steps_reports_truth_norms() {
        let exp = short(Mode::Grid, 0);
        let out = run_replicate(&exp, 0, &[]).unwrap();
        let rows = out.record.rows();
        assert_eq!(rows.len(), 10);
        assert!(rows.iter().all(|r| r.k == 0 && r.sup_err == 1.0 && r.consensus_gap == 0.0));
        assert!(out.last.values.iter().all(|v| v.iter().all(|&x| x == 0.0)));
    }

    #[test]
    fn grid_and_expansion_agree_on_knots() {
        let g = run_replicate(&short(Mode::Grid, 30), 1, &[10]).unwrap();
        let e = run_replicate(&short(Mode::Expansion, 30), 1, &[10]).unwrap();
        // grid mode interpolates f_i(x) between knots, so the two drift apart slowly
        for (a, b) in g.last.values.iter().flatten().zip(e.last.values.iter().flatten()) {
            assert!((a - b).abs() < 1e-3, "{a} vs {b}");
        }
        assert_eq!(g.snapshots[0].k, 10);
        let ks: Vec<u64> = g.record.rows().iter().map(|r| r.k).step_by(10).collect();
        assert_eq!(ks, vec![0, 1, 10, 30]);
    }

    #[test]
    fn finite_dim_replicate_converges() {
        let exp = short(Mode::FiniteDim, 3000);
        let out = run_replicate(&exp, 0, &[]).unwrap();
        let first = out.rows_at(0);
        let last = out.record.last_step();
        assert_eq!(last[0].k, 3000);
        for (a, b) in first.iter().zip(last) {
            assert!(b.sup_err < 0.2 * a.sup_err, "{} -> {}", a.sup_err, b.sup_err);
        }
    }

    #[test]
    fn experiment_files_and_determinism() {
        let mut cfg = ExperimentConfig::benchmark(7);
        cfg.steps = 40;
        cfg.replicates = 3;
        cfg.log.snapshots = vec![5];
        let exp = cfg.build().unwrap();
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let sa = run_experiment(&exp, a.path()).unwrap();
        let sb = run_experiment(&exp, b.path()).unwrap();
        assert_eq!(sa, sb);
        for f in ["summary.csv", "config.toml", "replicate_0/trajectory.csv", "replicate_2/final.csv", "replicate_1/snapshot_5.csv"] {
            assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
        }
        let final_csv = fs::read_to_string(a.path().join("replicate_0/final.csv")).unwrap();
        assert_eq!(final_csv.lines().count(), 1002);
        assert!(final_csv.starts_with("x,node_1,node_2,node_3,node_4,node_5,node_6,node_7,node_8,node_9,node_10,f_star\n"));
        assert_ne!(
            fs::read(a.path().join("replicate_0/final.csv")).unwrap(),
            fs::read(a.path().join("replicate_1/final.csv")).unwrap()
        );
    }

    #[test]
    fn unwritable_output_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("occupied");
        fs::write(&file, "x").unwrap();
        assert!(run_experiment(&short(Mode::Grid, 1), &file).is_err());
    }

    #[test]
    fn fig1_schema() {
        let dir = tempfile::tempdir().unwrap();
        let s = reproduce_fig1_steps(dir.path(), 0, 5, 20).unwrap();
        assert_eq!(s.early_sup.len(), 10);
        let text = fs::read_to_string(dir.path().join("fig1a.csv")).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap().split(',').count(), 12);
        let mut rows = 0;
        for line in lines {
            let f: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
            assert!((f[11] - (-(f[0] - 1.0) * (f[0] - 1.0)).exp()).abs() < 1e-15);
            rows += 1;
        }
        assert_eq!(rows, 1001);
    }
}
