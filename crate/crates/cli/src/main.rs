//! `pdrvpr`: run the fusion pipeline, generate synthetic datasets, score trajectories.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde_json::json;

use pdrvpr_core::deadreck::ThresholdMode;
use pdrvpr_core::fusion::{self, Selection};
use pdrvpr_core::sensors::{self, GeoOrigin};
use pdrvpr_core::synth::{self, Scenario};
use pdrvpr_core::{beacons, evalkit, Position2D, RunConfig};

#[derive(Parser)]
#[command(name = "pdrvpr", version, about = "PDR and visual beacon fusion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the pipeline on an IMU stream, optionally fusing retrieval matches.
    Run(RunArgs),
    /// Generate a synthetic dataset from a named profile or a scenario file.
    Synth(SynthArgs),
    /// Score a trajectory CSV against ground truth.
    Eval(EvalArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    imu: PathBuf,
    /// Match JSONL. Requires --beacons.
    #[arg(long, requires = "beacons")]
    matches: Option<PathBuf>,
    #[arg(long)]
    beacons: Option<PathBuf>,
    /// Local origin `lat,lon` for beacon files with geographic coordinates.
    #[arg(long)]
    origin: Option<GeoOrigin>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Config override `dotted.key=value`, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    out: PathBuf,
    /// Ground truth CSV; enables metrics.json and cdf.csv.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Beacon events CSV for recognition counts.
    #[arg(long)]
    events: Option<PathBuf>,
    /// Disable gross error suppression.
    #[arg(long)]
    no_ges: bool,
    /// Disable magnetic disturbance rejection.
    #[arg(long)]
    no_mdr: bool,
    /// Take the highest-similarity gate survivor instead of voting.
    #[arg(long)]
    first_pass: bool,
    /// Threshold from the summed per-step variances.
    #[arg(long)]
    literal_sum: bool,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, conflicts_with = "scenario", required_unless_present = "scenario")]
    profile: Option<String>,
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    /// Generate N datasets with seeds seed, seed+1, ... into out/run-XXXX.
    #[arg(long, value_name = "N")]
    monte_carlo: Option<usize>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    traj: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    #[arg(long)]
    events: Option<PathBuf>,
    /// Which trajectory columns to score.
    #[arg(long, value_parser = ["fused", "pdr"], default_value = "fused")]
    column: String,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Eval(a) => cmd_eval(a),
    }
}

fn resolve_config(a: &RunArgs) -> Result<RunConfig> {
    let base = match &a.config {
        Some(p) => load(p, RunConfig::load)?,
        None => RunConfig::default(),
    };
    let mut cfg = base.with_overrides(&a.overrides).context("applying --set")?;
    if a.no_ges {
        cfg = cfg.without_ges();
    }
    if a.no_mdr {
        cfg = cfg.without_mdr();
    }
    if a.first_pass {
        cfg.fusion.selection = Selection::FirstPass;
    }
    if a.literal_sum {
        cfg.drift.threshold_mode = ThresholdMode::LiteralSum;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Names the file for parse and validation errors; I/O errors already carry the path.
fn load<'a, T>(path: &'a Path, f: impl FnOnce(&'a Path) -> pdrvpr_core::Result<T>) -> Result<T> {
    f(path).map_err(|e| match e {
        pdrvpr_core::Error::Io { .. } => anyhow::Error::new(e),
        other => anyhow::Error::new(other).context(format!("reading {}", path.display())),
    })
}

fn create_dir(p: &Path) -> Result<()> {
    fs::create_dir_all(p).with_context(|| format!("creating {}", p.display()))
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn write_metrics(out: &Path, errors: &[f64], rec: evalkit::RecognitionStats) -> Result<evalkit::Metrics> {
    let m = evalkit::metrics(errors, rec)?;
    write_json(&out.join("metrics.json"), &serde_json::to_value(m)?)?;
    evalkit::cdf_export(errors, out.join("cdf.csv"))?;
    Ok(m)
}

fn cmd_run(a: RunArgs) -> Result<()> {
    let cfg = resolve_config(&a)?;
    let imu = load(&a.imu, sensors::load_imu_stream)?;
    let db = a
        .beacons
        .as_ref()
        .map(|p| load(p, |p| sensors::load_beacons(p, a.origin)))
        .transpose()?;
    let matches = a
        .matches
        .as_ref()
        .map(|p| load(p, |p| beacons::load_matches(p, db.as_ref())))
        .transpose()?;
    let truth = a
        .truth
        .as_ref()
        .map(|p| load(p, synth::load_truth))
        .transpose()?;
    let events = a
        .events
        .as_ref()
        .map(|p| load(p, synth::load_events))
        .transpose()?;

    let out = fusion::run_pipeline(&imu, matches.as_ref(), db.as_ref(), &cfg)?;
    create_dir(&a.out)?;
    fusion::save_trajectory(a.out.join("trajectory.csv"), &out.records)?;

    let recognition = evalkit::recognition_stats(&out.records, events.as_deref().unwrap_or(&[]));
    let metrics = match &truth {
        Some(t) => {
            let est: Vec<Position2D> = out.records.iter().map(|r| r.x_fused).collect();
            let errors = evalkit::horizontal_error(&est, &t.positions()).context("comparing with truth")?;
            Some(write_metrics(&a.out, &errors, recognition)?)
        }
        None => None,
    };

    let path_str = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
    let manifest = json!({
        "inputs": {
            "imu": a.imu.display().to_string(),
            "matches": path_str(&a.matches),
            "beacons": path_str(&a.beacons),
            "origin": a.origin.map(|o| [o.lat, o.lon]),
            "truth": path_str(&a.truth),
            "events": path_str(&a.events),
            "config": path_str(&a.config),
            "overrides": a.overrides,
        },
        "config": serde_json::to_value(&cfg)?,
        "resolved": {
            "gamma": out.gamma,
            "q": [[out.q[(0, 0)], out.q[(0, 1)]], [out.q[(1, 0)], out.q[(1, 1)]]],
            "r": [[out.r[(0, 0)], out.r[(0, 1)]], [out.r[(1, 0)], out.r[(1, 1)]]],
            "bin_radius": out.bin_radius,
        },
        "summary": {
            "samples": imu.len(),
            "steps": out.records.len(),
            "updates": out.records.iter().filter(|r| r.update_applied).count(),
            "recognition": recognition,
            "metrics": metrics,
        },
    });
    write_json(&a.out.join("run.json"), &manifest)?;
    Ok(())
}

fn cmd_synth(a: SynthArgs) -> Result<()> {
    let mut scenario = match (&a.profile, &a.scenario) {
        (Some(p), _) => synth::closed_loop_scenario(p)?,
        (None, Some(path)) => load(path, Scenario::load)?,
        (None, None) => bail!("one of --profile or --scenario is required"),
    };
    if let Some(seed) = a.seed {
        scenario.rng_seed = seed;
    }
    match a.monte_carlo {
        None => {
            let data = synth::generate(&scenario)?;
            synth::write_dataset(&a.out, &scenario, &data)?;
        }
        Some(0) => bail!("--monte-carlo needs at least one run"),
        Some(n) => {
            create_dir(&a.out)?;
            (0..n).into_par_iter().try_for_each(|i| -> Result<()> {
                let mut s = scenario.clone();
                s.rng_seed = scenario.rng_seed.wrapping_add(i as u64);
                let data = synth::generate(&s)?;
                synth::write_dataset(a.out.join(format!("run-{i:04}")), &s, &data)?;
                Ok(())
            })?;
        }
    }
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> Result<()> {
    let rows = load(&a.traj, fusion::load_trajectory)?;
    let truth = load(&a.truth, synth::load_truth)?;
    let events = a
        .events
        .as_ref()
        .map(|p| load(p, synth::load_events))
        .transpose()?
        .unwrap_or_default();
    let est: Vec<Position2D> = rows
        .iter()
        .map(|r| if a.column == "pdr" { r.pdr } else { r.fused })
        .collect();
    let errors = evalkit::horizontal_error(&est, &truth.positions()).context("comparing with truth")?;
    let recognized = events
        .iter()
        .filter(|e| {
            rows.iter()
                .any(|r| r.step == e.step && r.updated && r.beacon.as_deref() == Some(e.beacon.as_str()))
        })
        .count();
    create_dir(&a.out)?;
    write_metrics(&a.out, &errors, evalkit::recognition_from_counts(recognized, events.len()))?;
    Ok(())
}
