//! Browser bindings for the demo page in `www/`.
//!
//! Each export returns a JSON string. The `*_json` functions hold the logic and run natively
//! so tests do not need a JS host.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use pdrvpr_core::deadreck::{self, DriftModel, NoiseConfig, ThresholdMode};
use pdrvpr_core::stride::{self, StrideConfig};
use pdrvpr_core::synth::{self, Scenario};
use pdrvpr_core::{evalkit, fusion, Position2D, RunConfig};

fn xy(points: impl IntoIterator<Item = Position2D>) -> Value {
    points.into_iter().map(|p| [p.x, p.y]).collect::<Vec<_>>().into()
}

fn summary(est: &[Position2D], truth: &[Position2D]) -> Result<Value, String> {
    let n = est.len().min(truth.len());
    let errors = evalkit::horizontal_error(&est[..n], &truth[..n]).map_err(|e| e.to_string())?;
    let p = |q| evalkit::percentile(&errors, q).map_err(|e| e.to_string());
    Ok(json!({ "p50": p(50.0)?, "p75": p(75.0)?, "p95": p(95.0)?, "steps": n }))
}

/// Generates a named profile and runs the pipeline with the chosen switches.
pub fn simulate_json(profile: &str, seed: u64, ges: bool, mdr: bool) -> Result<String, String> {
    let mut scenario = synth::closed_loop_scenario(profile).map_err(|e| e.to_string())?;
    scenario.rng_seed = seed;
    let data = synth::generate(&scenario).map_err(|e| e.to_string())?;
    let mut cfg = RunConfig::default();
    if !ges {
        cfg = cfg.without_ges();
    }
    if !mdr {
        cfg = cfg.without_mdr();
    }
    let out = fusion::run_pipeline(&data.imu, Some(&data.matches), Some(&data.beacons), &cfg)
        .map_err(|e| e.to_string())?;

    let truth = data.truth.positions();
    let pdr: Vec<Position2D> = out.records.iter().map(|r| r.x_pdr).collect();
    let fused: Vec<Position2D> = out.records.iter().map(|r| r.x_fused).collect();
    let updates: Vec<Value> = out
        .records
        .iter()
        .filter(|r| r.update_applied)
        .map(|r| {
            let z = r.observation.expect("applied updates carry an observation");
            json!({ "step": r.step, "beacon": r.accepted_beacon, "z": [z.x, z.y] })
        })
        .collect();
    let beacons: Vec<Value> = data
        .beacons
        .beacons()
        .iter()
        .map(|b| json!({ "id": b.id, "p": [b.position.x, b.position.y] }))
        .collect();
    let rec = evalkit::recognition_stats(&out.records, &data.events);

    Ok(json!({
        "truth": xy(std::iter::once(data.truth.start).chain(truth.iter().copied())),
        "pdr": xy(pdr.iter().copied()),
        "fused": xy(fused.iter().copied()),
        "beacons": beacons,
        "updates": updates,
        "gamma": out.gamma,
        "pdr_error": summary(&pdr, &truth)?,
        "fused_error": summary(&fused, &truth)?,
        "recognized": rec.recognized,
        "events": rec.total,
    })
    .to_string())
}

/// Runs the step detector on a short straight walk with adjustable detector settings.
pub fn step_explorer_json(
    peak_threshold: f64,
    window: usize,
    min_interval: f64,
    accel_noise: f64,
    seed: u64,
) -> Result<String, String> {
    let cfg = StrideConfig { window, peak_threshold, min_interval, ..StrideConfig::default() };
    cfg.validate().map_err(|e| e.to_string())?;
    let mut scenario = Scenario {
        waypoints: vec![[0.0, 0.0], [7.0, 0.0]],
        rng_seed: seed,
        ..Scenario::default()
    };
    scenario.noise.sigma_accel = accel_noise;
    let data = synth::generate(&scenario).map_err(|e| e.to_string())?;

    let t: Vec<f64> = data.imu.iter().map(|s| s.t).collect();
    let magnitude: Vec<f64> = data.imu.iter().map(stride::accel_magnitude).collect();
    let filtered = stride::sliding_mean(&magnitude, cfg.window);
    let steps = stride::detect_steps_in_signal(&t, &magnitude, &cfg);
    let peaks: Vec<Value> = steps
        .iter()
        .map(|s| json!({ "t": s.t_peak, "i": s.sample_index, "length": s.length }))
        .collect();
    Ok(json!({
        "t": t,
        "magnitude": magnitude,
        "filtered": filtered,
        "threshold": peak_threshold,
        "peaks": peaks,
        "true_steps": data.truth.steps.len(),
    })
    .to_string())
}

/// Gate threshold per step for both accumulation modes, gyro-only heading, no resets.
pub fn drift_curve_json(
    step_length: f64,
    steps: usize,
    step_period: f64,
    sigma_step_rel: f64,
    sigma_gyro: f64,
    gamma: f64,
) -> Result<String, String> {
    let finite_pos = |v: f64| v.is_finite() && v > 0.0;
    if !finite_pos(step_length) || !finite_pos(step_period) {
        return Err("step length and period must be > 0".into());
    }
    if !(gamma.is_finite() && gamma >= 0.0) {
        return Err("gamma must be >= 0".into());
    }
    let noise = NoiseConfig { sigma_step_rel, sigma_gyro, ..NoiseConfig::default() };
    noise.validate().map_err(|e| e.to_string())?;

    let curve = |mode| {
        let mut m = DriftModel::new(gamma, mode);
        (0..steps)
            .map(|_| {
                m = deadreck::accumulate_heading_variance(&m, 0, step_period, &noise, 0.0);
                m = deadreck::accumulate_position_variance(&m, step_length, &noise);
                deadreck::ges_threshold(&m)
            })
            .collect::<Vec<f64>>()
    };
    Ok(json!({
        "recursive": curve(ThresholdMode::Recursive),
        "literal_sum": curve(ThresholdMode::LiteralSum),
    })
    .to_string())
}

#[wasm_bindgen]
pub fn simulate(profile: &str, seed: u32, ges: bool, mdr: bool) -> Result<String, JsError> {
    simulate_json(profile, seed.into(), ges, mdr).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn step_explorer(
    peak_threshold: f64,
    window: u32,
    min_interval: f64,
    accel_noise: f64,
    seed: u32,
) -> Result<String, JsError> {
    step_explorer_json(peak_threshold, window as usize, min_interval, accel_noise, seed.into())
        .map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn drift_curve(
    step_length: f64,
    steps: u32,
    step_period: f64,
    sigma_step_rel: f64,
    sigma_gyro: f64,
    gamma: f64,
) -> Result<String, JsError> {
    drift_curve_json(step_length, steps as usize, step_period, sigma_step_rel, sigma_gyro, gamma)
        .map_err(|e| JsError::new(&e))
}
