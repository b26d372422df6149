//! Subcommand implementations. Each writes its artifacts under the output
//! directory and returns a one-line summary for the terminal.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use tgf_core::diagnostics::{energy_residual, estimate1_check, stability_experiment, MIN_ESTIMATE_ENSEMBLE};
use tgf_core::measure::{chebyshev_check, ergodicity_divergence, theoretical_bounds, time_average, ObservableSet};
use tgf_core::noise::sample_increments;
use tgf_core::spectral::write_snapshot;
use tgf_core::stepper::{
    read_checkpoint, simulate_ensemble, trajectory_rng, write_checkpoint, Checkpoint, LedgerEntry, StateSample,
    Trajectory, TrajectoryRecord,
};

use crate::config::{normalized_random, RunConfig, Setup};
use crate::output::{create, csv_to_dat, fmt, write_ndjson, CsvSink, Metadata};
use crate::{suites, CliError};

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Default)]
pub struct GlobalOptions {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub out: PathBuf,
    pub resume: Option<PathBuf>,
    pub ensemble: Option<usize>,
}

/// Loads the configuration (or the reference one) and applies flag overrides
/// before anything is hashed.
pub fn resolve_config(opts: &GlobalOptions) -> Result<RunConfig, CliError> {
    let mut cfg = match &opts.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = opts.seed {
        cfg.seed = s;
    }
    if let Some(e) = opts.ensemble {
        cfg.experiment.ensemble = e;
    }
    if cfg.experiment.ensemble == 0 {
        return Err(CliError::Config { path: "experiment.ensemble".into(), message: "must be at least 1".into() });
    }
    Ok(cfg)
}

fn prepare(opts: &GlobalOptions) -> Result<(Setup, Metadata), CliError> {
    let cfg = resolve_config(opts)?;
    let setup = cfg.setup()?;
    let meta = Metadata::new(&setup.hash, cfg.seed, setup.constants);
    let path = opts.out.join("config.toml");
    let mut w = create(&path)?;
    w.write_all(cfg.to_toml().as_bytes()).map_err(|e| CliError::io(path.display(), e))?;
    w.flush().map_err(|e| CliError::io(path.display(), e))?;
    Ok((setup, meta))
}

fn sample_row(member: usize, s: &StateSample) -> Vec<String> {
    vec![
        member.to_string(),
        fmt(s.t),
        fmt(s.energy),
        fmt(s.grad_sq),
        fmt(s.a4),
        fmt(s.x_norm_pow4),
        fmt(s.grad_l3_sq),
        fmt(s.dual_norm),
        fmt(s.v_norm_sq()),
    ]
}

const SERIES_COLUMNS: [&str; 9] =
    ["member", "t", "energy", "grad_sq", "a4", "x_norm_pow4", "grad_l3_sq", "dual_norm", "v_norm_sq"];

fn write_series(path: &Path, meta: &Metadata, records: &[TrajectoryRecord], every: usize) -> Result<(), CliError> {
    let mut sink = CsvSink::create(path, meta, &SERIES_COLUMNS)?;
    for (m, r) in records.iter().enumerate() {
        for s in r.samples.iter().step_by(every) {
            sink.row(&sample_row(m, s))?;
        }
    }
    sink.finish()
}

fn write_ledger(path: &Path, meta: &Metadata, records: &[TrajectoryRecord]) -> Result<(), CliError> {
    let mut columns = vec!["member"];
    columns.extend(LedgerEntry::FIELDS);
    let mut sink = CsvSink::create(path, meta, &columns)?;
    for (m, r) in records.iter().enumerate() {
        for e in &r.ledger {
            let mut row = vec![m.to_string(), e.step.to_string()];
            row.extend(e.values().iter().map(|v| fmt(*v)));
            sink.row(&row)?;
        }
    }
    sink.finish()
}

#[derive(Debug, Clone, Serialize)]
struct SnapshotEntry {
    member: usize,
    step: u64,
    t: f64,
    file: String,
}

#[derive(Debug, Clone, Serialize)]
struct MemberSummary {
    record: &'static str,
    member: usize,
    steps: usize,
    final_time: f64,
    stopping_time: f64,
    final_energy: f64,
    residual_max_abs: f64,
    residual_mean_abs: f64,
    residual_mean_rate: f64,
}

/// Runs one member to the horizon, writing snapshots and checkpoints on the
/// configured cadence.
fn run_member(
    setup: &Setup,
    out: &Path,
    member: usize,
    resumed: Option<Trajectory>,
) -> Result<(TrajectoryRecord, Vec<SnapshotEntry>), CliError> {
    let integrator = setup.integrator();
    let sc = setup.config.stepper_config();
    let o = &setup.config.output;
    let fresh = resumed.is_none();
    let mut traj = match resumed {
        Some(t) => t,
        None => {
            Trajectory::start(&integrator, setup.y0.clone(), sc.dt, trajectory_rng(setup.config.seed, member as u64))?
        }
    };
    let mut snapshots = Vec::new();
    let mut snapshot = |traj: &Trajectory| -> Result<(), CliError> {
        let name = format!("snapshots/m{member:03}_s{:08}.bin", traj.step);
        let path = out.join(&name);
        let mut w = create(&path)?;
        write_snapshot(&mut w, &setup.ctx, &traj.state)?;
        w.flush().map_err(|e| CliError::io(path.display(), e))?;
        snapshots.push(SnapshotEntry { member, step: traj.step, t: traj.time(), file: name });
        Ok(())
    };
    if fresh && o.snapshot_every > 0 {
        snapshot(&traj)?;
    }
    let steps = sc.steps();
    while traj.step < steps {
        traj.advance(&integrator)?;
        if o.snapshot_every > 0 && traj.step % o.snapshot_every == 0 {
            snapshot(&traj)?;
        }
        if o.checkpoint_every > 0 && traj.step % o.checkpoint_every == 0 && traj.step < steps {
            let path = out.join(format!("checkpoints/m{member:03}_s{:08}.ckpt", traj.step));
            let mut w = create(&path)?;
            let cp = Checkpoint { config_hash: setup.hash.clone(), trajectory: traj.clone() };
            write_checkpoint(&mut w, &setup.ctx, &cp)?;
            w.flush().map_err(|e| CliError::io(path.display(), e))?;
        }
    }
    Ok((traj.into_record(sc.t_end), snapshots))
}

fn load_resume(path: &Path, setup: &Setup) -> Result<(usize, Trajectory), CliError> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path.display(), e))?;
    let (grid, cp) = read_checkpoint(&mut std::io::BufReader::new(file))?;
    let bad = |message: String| CliError::Config { path: "--resume".into(), message };
    if cp.config_hash != setup.hash {
        return Err(bad(format!("checkpoint belongs to config {}, not {}", cp.config_hash, setup.hash)));
    }
    if grid != *setup.ctx.grid() {
        return Err(bad("checkpoint grid differs from the configured grid".into()));
    }
    let member = cp.trajectory.rng.get_stream() as usize;
    if member >= setup.config.experiment.ensemble {
        return Err(bad(format!("checkpoint member {member} is outside the ensemble")));
    }
    Ok((member, cp.trajectory))
}

/// One trajectory per member with its energy ledger; with at least
/// `MIN_ESTIMATE_ENSEMBLE` members also the finite-horizon energy check.
pub fn simulate(opts: &GlobalOptions) -> Result<String, CliError> {
    let (setup, meta) = prepare(opts)?;
    let resumed = match &opts.resume {
        Some(p) => Some(load_resume(p, &setup)?),
        None => None,
    };
    let members = setup.config.experiment.ensemble;
    let results: Vec<(TrajectoryRecord, Vec<SnapshotEntry>)> = (0..members)
        .into_par_iter()
        .map(|m| {
            let start = resumed.as_ref().filter(|(rm, _)| *rm == m).map(|(_, t)| t.clone());
            run_member(&setup, &opts.out, m, start)
        })
        .collect::<Result<_, _>>()?;
    let (records, snaps): (Vec<_>, Vec<_>) = results.into_iter().unzip();

    write_ledger(&opts.out.join("ledger.csv"), &meta, &records)?;
    write_series(&opts.out.join("series.csv"), &meta, &records, setup.config.output.series_every)?;
    let snaps: Vec<SnapshotEntry> = snaps.into_iter().flatten().collect();
    if !snaps.is_empty() {
        let mut sink = CsvSink::create(&opts.out.join("snapshots.csv"), &meta, &["member", "step", "t", "file"])?;
        for s in &snaps {
            sink.row(&[s.member.to_string(), s.step.to_string(), fmt(s.t), s.file.clone()])?;
        }
        sink.finish()?;
    }

    let mut summary = Vec::new();
    let mut worst_rate = 0.0f64;
    for (m, r) in records.iter().enumerate() {
        let last = r.samples.last().expect("initial sample");
        let (max_abs, mean_abs, mean_rate) = match energy_residual(&r.ledger, &setup.params) {
            Ok(s) => (s.max_abs, s.mean_abs, s.mean_rate),
            Err(_) => (0.0, 0.0, 0.0),
        };
        worst_rate = worst_rate.max(mean_rate);
        summary.push(
            serde_json::to_value(MemberSummary {
                record: "member",
                member: m,
                steps: r.ledger.len(),
                final_time: last.t,
                stopping_time: r.stopping_time,
                final_energy: last.energy,
                residual_max_abs: max_abs,
                residual_mean_abs: mean_abs,
                residual_mean_rate: mean_rate,
            })
            .expect("serializes"),
        );
    }
    let mut line = format!("simulate: {members} member(s), worst residual rate {worst_rate:e}");
    if members >= MIN_ESTIMATE_ENSEMBLE {
        let rep = estimate1_check(&records, &setup.params, &setup.constants, setup.forcing.dual_norm)?;
        line.push_str(&format!(
            ", energy inequality ratio {:.4} ({})",
            rep.ratio,
            if rep.pass { "pass" } else { "FAIL" }
        ));
        let mut v = serde_json::to_value(&rep).expect("serializes");
        v["record"] = "estimate1".into();
        summary.push(v);
    }
    write_ndjson(&opts.out.join("summary.ndjson"), &meta, &summary)?;
    Ok(line)
}

/// Twin runs from `y0` and a perturbed copy with shared noise.
pub fn stability(opts: &GlobalOptions) -> Result<String, CliError> {
    let (setup, meta) = prepare(opts)?;
    let cfg = &setup.config;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.initial.seed.wrapping_add(1));
    let dy = normalized_random(&setup.ctx, &mut rng, cfg.experiment.perturbation);
    let y0_b = setup.y0.axpy(1.0, &dy);
    let integrator = setup.integrator();
    let rep = stability_experiment(
        &integrator,
        &cfg.stepper_config(),
        &setup.y0,
        &y0_b,
        &setup.constants,
        cfg.seed,
        cfg.experiment.ensemble,
    )?;
    let columns = ["t", "weighted_sup", "weighted_sup_se", "weighted_sup_swapped", "envelope"];
    let mut sink = CsvSink::create(&opts.out.join("stability.csv"), &meta, &columns)?;
    for i in (0..rep.times.len()).step_by(cfg.output.series_every) {
        sink.row(&[
            fmt(rep.times[i]),
            fmt(rep.weighted_sup[i]),
            fmt(rep.weighted_sup_se[i]),
            fmt(rep.weighted_sup_swapped[i]),
            fmt(rep.envelope[i]),
        ])?;
    }
    sink.finish()?;
    let summary = serde_json::json!({
        "record": "stability",
        "members": cfg.experiment.ensemble,
        "initial_gap": rep.initial_gap,
        "final_weight_trapezoid": rep.final_weight_trapezoid,
        "final_weight_midpoint": rep.final_weight_midpoint,
        "violations": rep.violations,
        "violations_swapped": rep.violations_swapped,
        "weight_rate": rep.weight_rate,
        "growth": rep.growth,
        "pass": rep.pass,
    });
    write_ndjson(&opts.out.join("stability.ndjson"), &meta, &[summary])?;
    Ok(format!(
        "stability: {} member(s), {} envelope violation(s) ({})",
        cfg.experiment.ensemble,
        rep.violations,
        if rep.pass { "pass" } else { "FAIL" }
    ))
}

/// Long-run time averages against the stationary bounds, tail checks and,
/// with several members, pairwise agreement of the averages.
pub fn invariant(opts: &GlobalOptions) -> Result<String, CliError> {
    let (setup, meta) = prepare(opts)?;
    let cfg = &setup.config;
    let integrator = setup.integrator();
    let records = simulate_ensemble(&integrator, &setup.y0, &cfg.stepper_config(), cfg.seed, cfg.experiment.ensemble)?;
    write_series(&opts.out.join("observables.csv"), &meta, &records, cfg.output.series_every)?;

    let burn_in = cfg.burn_in();
    let set = ObservableSet::standard(&cfg.experiment.truncations);
    let bounds = theoretical_bounds(&setup.params, &setup.constants, setup.ctx.grid(), setup.forcing.dual_norm);
    let mut out =
        vec![serde_json::json!({ "record": "bounds", "forcing_norm": setup.forcing.dual_norm, "bounds": bounds })];
    let mut estimates = Vec::new();
    let mut all_pass = true;
    for (m, r) in records.iter().enumerate() {
        let est = time_average(&r.samples, burn_in, &set, cfg.experiment.batches)?;
        let checks: Vec<_> =
            cfg.experiment.radii.iter().map(|&rad| chebyshev_check(&r.samples, burn_in, rad)).collect();
        let b2_holds = est.get("h_norm_sq").is_some_and(|a| a.mean <= bounds.b2);
        let b_x_holds = est.averages.iter().filter(|a| a.name.starts_with("f_")).all(|a| a.mean <= bounds.b_x);
        let chebyshev_holds = checks.iter().all(|c| c.holds);
        all_pass &= b2_holds && b_x_holds && chebyshev_holds;
        out.push(serde_json::json!({
            "record": "member",
            "member": m,
            "estimate": est,
            "chebyshev": checks,
            "b2_holds": b2_holds,
            "b_x_holds": b_x_holds,
            "chebyshev_holds": chebyshev_holds,
        }));
        estimates.push(est);
    }
    let mut disagreements = 0;
    for i in 0..estimates.len() {
        for j in i + 1..estimates.len() {
            let gaps = ergodicity_divergence(&estimates[i], &estimates[j], f64::MIN_POSITIVE)?;
            let agree = gaps.iter().all(|g| g.within_three_se);
            disagreements += usize::from(!agree);
            out.push(serde_json::json!({ "record": "ergodicity", "members": [i, j], "gaps": gaps, "agree": agree }));
        }
    }
    write_ndjson(&opts.out.join("measure.ndjson"), &meta, &out)?;
    Ok(format!(
        "invariant: {} member(s), bounds and tail checks {}, {disagreements} disagreeing pair(s)",
        records.len(),
        if all_pass { "pass" } else { "FAIL" }
    ))
}

/// Operator and noise property suites; exit status 4 if any fails.
pub fn verify(opts: &GlobalOptions) -> Result<String, CliError> {
    let (setup, meta) = prepare(opts)?;
    let cfg = &setup.config;
    let cases = cfg.experiment.verify_cases;
    let seed = cfg.seed;
    let mut results = vec![suites::monotonicity_suite(&setup.ctx, &setup.params, cases, seed)];
    results.extend(suites::lipschitz_suite(cfg.noise.modes, cfg.noise.lipschitz, cases, seed));
    results.push(suites::skew_suite(&setup.ctx, cases, seed));
    results.push(suites::witness_suite(&setup.ctx, &setup.constants, cases, seed));
    write_ndjson(&opts.out.join("verify.ndjson"), &meta, &results)?;
    let failed: Vec<&str> = results.iter().filter(|r| !r.pass).map(|r| r.name.as_str()).collect();
    if failed.is_empty() {
        Ok(format!("verify: {} suite(s) passed", results.len()))
    } else {
        Err(CliError::Acceptance(format!("failed suites: {}", failed.join(", "))))
    }
}

#[derive(Debug, Clone, Serialize)]
struct BenchRecord {
    record: &'static str,
    resolution: usize,
    steps: u64,
    seconds: f64,
    steps_per_second: f64,
    microseconds_per_step: f64,
}

/// Wall-clock throughput of the step kernel on the configured grid.
pub fn bench(opts: &GlobalOptions, steps: u64) -> Result<String, CliError> {
    let (setup, meta) = prepare(opts)?;
    let integrator = setup.integrator();
    let dt = setup.config.stepper.dt;
    let mut rng = trajectory_rng(setup.config.seed, 0);
    let mut y = setup.y0.clone();
    let start = Instant::now();
    for s in 0..steps {
        let inc = sample_increments(&mut rng, setup.noise.modes(), dt);
        y = integrator.advance(s as f64 * dt, &y, &inc)?.0;
    }
    let seconds = start.elapsed().as_secs_f64();
    let rec = BenchRecord {
        record: "bench",
        resolution: setup.ctx.n(),
        steps,
        seconds,
        steps_per_second: steps as f64 / seconds,
        microseconds_per_step: 1e6 * seconds / steps.max(1) as f64,
    };
    write_ndjson(&opts.out.join("bench.ndjson"), &meta, &[&rec])?;
    Ok(format!("bench: N = {}, {:.1} us/step", rec.resolution, rec.microseconds_per_step))
}

/// Gnuplot data files from CSV outputs; with no inputs, every `*.csv` in the
/// output directory.
pub fn plot_data(opts: &GlobalOptions, inputs: &[PathBuf]) -> Result<String, CliError> {
    let mut files = inputs.to_vec();
    if files.is_empty() {
        let dir = std::fs::read_dir(&opts.out).map_err(|e| CliError::io(opts.out.display(), e))?;
        for entry in dir {
            let p = entry.map_err(|e| CliError::io(opts.out.display(), e))?.path();
            if p.extension().is_some_and(|x| x == "csv") {
                files.push(p);
            }
        }
        files.sort();
    }
    for f in &files {
        let stem = f.file_stem().ok_or_else(|| CliError::Other(format!("{}: no file name", f.display())))?;
        let target = opts.out.join(stem).with_extension("dat");
        csv_to_dat(f, &target)?;
    }
    Ok(format!("plot-data: wrote {} file(s)", files.len()))
}

/// The resolved configuration as TOML.
pub fn print_config(opts: &GlobalOptions) -> Result<String, CliError> {
    Ok(resolve_config(opts)?.to_toml())
}
