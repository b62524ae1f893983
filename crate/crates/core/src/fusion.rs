//! Position-only Kalman filter fusing dead reckoning with gated retrieval fixes.
//!
//! Per step: predict with the dead-reckoning displacement, grow the drift model, gate the
//! top-25 retrieval candidates against `T`, vote among the survivors, update, low-pass the
//! corrected position and re-seed the drift model. `A = H = I₂`.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::beacons::{consistency_vote, MatchCandidate, MatchList, MatchMap, QueryKey};
use crate::config::RunConfig;
use crate::deadreck::{self, DriftModel};
use crate::error::{Error, Result};
use crate::orientation::{self, AlphaMode};
use crate::sensors::{BeaconDb, ImuSample, Position2D};
use crate::stride::{self, StepEvent};

/// How one observation is picked from the candidates that pass the gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Selection {
    /// Consistency vote among the survivors.
    #[default]
    Vote,
    /// Highest-similarity survivor.
    FirstPass,
}

/// What the low-pass filter blends the corrected position with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SmoothingReference {
    /// The filter state entering the step (before prediction).
    #[default]
    PreviousState,
    /// The predicted state of the current step.
    Predicted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FusionConfig {
    /// Gross error suppression. When off every candidate passes the gate.
    pub ges: bool,
    pub selection: Selection,
    /// Low-pass weight on the corrected position, in `[0, 1]`.
    pub smooth_a: f64,
    pub smoothing_reference: SmoothingReference,
    /// Per-step process noise, m². Defaults to `(σ_L,rel · mean step length)² I`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<[[f64; 2]; 2]>,
    /// Measurement noise, m². Defaults to `γ²/4 I`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<[[f64; 2]; 2]>,
    pub p0: [[f64; 2]; 2],
    pub start: [f64; 2],
    /// Clustering radius of the vote, m. Defaults to `γ`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bin_radius: Option<f64>,
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig {
            ges: true,
            selection: Selection::Vote,
            smooth_a: 0.7,
            smoothing_reference: SmoothingReference::PreviousState,
            q: None,
            r: None,
            p0: [[0.0; 2]; 2],
            start: [0.0; 2],
            bin_radius: None,
        }
    }
}

pub(crate) fn matrix(m: &[[f64; 2]; 2]) -> Matrix2<f64> {
    Matrix2::new(m[0][0], m[0][1], m[1][0], m[1][1])
}

/// Symmetric with eigenvalues `>= -tol`.
pub fn is_symmetric_psd(m: &Matrix2<f64>, tol: f64) -> bool {
    if m.iter().any(|v| !v.is_finite()) {
        return false;
    }
    let scale = m.abs().max().max(1.0);
    if (m[(0, 1)] - m[(1, 0)]).abs() > 1e-12 * scale {
        return false;
    }
    m.symmetric_eigenvalues().iter().all(|&e| e >= -tol)
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.smooth_a) {
            return Err(Error::Config("fusion.smooth_a must be in [0, 1]".into()));
        }
        for (name, m) in [("q", self.q), ("r", self.r), ("p0", Some(self.p0))] {
            if let Some(m) = m {
                if !is_symmetric_psd(&matrix(&m), 0.0) {
                    return Err(Error::Config(format!(
                        "fusion.{name} must be symmetric positive semi-definite"
                    )));
                }
            }
        }
        if let Some(b) = self.bin_radius {
            if !(b.is_finite() && b >= 0.0) {
                return Err(Error::Config("fusion.bin_radius must be >= 0".into()));
            }
        }
        if self.start.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("fusion.start must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterState {
    pub x: Position2D,
    pub p: Matrix2<f64>,
}

impl FilterState {
    pub fn new(x: Position2D, p: Matrix2<f64>) -> Self {
        FilterState { x, p }
    }
}

fn vec2(p: &Position2D) -> Vector2<f64> {
    Vector2::new(p.x, p.y)
}

pub fn predict(state: &FilterState, length: f64, heading: f64, q: &Matrix2<f64>) -> FilterState {
    FilterState {
        x: deadreck::propagate(state.x, length, heading),
        p: state.p + q,
    }
}

/// Gated observation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Observation {
    pub position: Position2D,
    pub beacon_id: String,
    pub support: usize,
}

/// Keeps candidates strictly closer than `threshold` to `x`, then selects one of them.
pub fn ges_gate(
    list: &MatchList,
    x: &Position2D,
    threshold: f64,
    db: &BeaconDb,
    bin_radius: f64,
    selection: Selection,
) -> Option<Observation> {
    let survivors: Vec<MatchCandidate> = list
        .candidates
        .iter()
        .filter(|c| db.get(&c.beacon_id).is_some_and(|b| b.position.distance(x) < threshold))
        .cloned()
        .collect();
    if survivors.is_empty() {
        return None;
    }
    match selection {
        Selection::Vote => consistency_vote(&survivors, db, bin_radius).map(|v| Observation {
            position: v.position,
            beacon_id: v.beacon_id,
            support: v.support,
        }),
        Selection::FirstPass => {
            let best = &survivors[0];
            let b = db.get(&best.beacon_id)?;
            Some(Observation {
                position: b.position,
                beacon_id: b.id.clone(),
                support: 1,
            })
        }
    }
}

/// Standard update with `H = I`. The covariance is re-symmetrized.
pub fn kf_update(state: &FilterState, z: &Position2D, r: &Matrix2<f64>) -> Result<FilterState> {
    let y = vec2(z) - vec2(&state.x);
    let s = state.p + r;
    let s_inv = s
        .try_inverse()
        .ok_or_else(|| Error::Numerical("innovation covariance is singular".into()))?;
    let k = state.p * s_inv;
    let x = vec2(&state.x) + k * y;
    let p = (Matrix2::identity() - k) * state.p;
    let p = 0.5 * (p + p.transpose());
    Ok(FilterState {
        x: Position2D::new(x.x, x.y),
        p,
    })
}

pub fn smooth(x_new: &Position2D, x_prev: &Position2D, a: f64) -> Position2D {
    Position2D::new(
        a * x_new.x + (1.0 - a) * x_prev.x,
        a * x_new.y + (1.0 - a) * x_prev.y,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FusedStepRecord {
    /// 1-based step index.
    pub step: usize,
    pub t: f64,
    /// Pure dead-reckoning position, never corrected.
    pub x_pdr: Position2D,
    /// Filter prediction this step was gated against.
    pub x_pred: Position2D,
    pub x_fused: Position2D,
    pub update_applied: bool,
    pub accepted_beacon: Option<String>,
    pub observation: Option<Position2D>,
    /// Gate threshold at this step, m.
    pub threshold: f64,
    pub heading: f64,
    pub length: f64,
    pub alpha: u8,
    pub p_trace: f64,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub records: Vec<FusedStepRecord>,
    pub steps: Vec<StepEvent>,
    /// Effective settings after defaults were resolved.
    pub gamma: f64,
    pub q: Matrix2<f64>,
    pub r: Matrix2<f64>,
    pub bin_radius: f64,
}

/// Resolves the margin: explicit config first, then half the beacon spacing.
pub fn resolve_gamma(cfg: &RunConfig, db: Option<&BeaconDb>) -> Option<f64> {
    cfg.gamma
        .or_else(|| db.and_then(BeaconDb::min_spacing).map(deadreck::gamma_from_spacing))
}

/// Assigns every list to a 1-based step: step keys directly, time keys to the first step
/// peaking at or after the timestamp. On collisions the first list wins.
fn lists_by_step<'a>(matches: &'a MatchMap, steps: &[StepEvent]) -> Vec<Option<&'a MatchList>> {
    let mut by_step: Vec<Option<&MatchList>> = vec![None; steps.len() + 1];
    for (key, list) in matches {
        let step = match *key {
            QueryKey::Step(s) => usize::try_from(s).ok(),
            QueryKey::Time(t) => steps.iter().position(|e| e.t_peak >= t).map(|i| i + 1),
        };
        if let Some(slot) = step.and_then(|s| by_step.get_mut(s)) {
            slot.get_or_insert(list);
        }
    }
    by_step
}

pub fn run_pipeline(
    stream: &[ImuSample],
    matches: Option<&MatchMap>,
    db: Option<&BeaconDb>,
    cfg: &RunConfig,
) -> Result<PipelineOutput> {
    cfg.validate()?;
    let matches = matches.filter(|m| !m.is_empty());
    if matches.is_some() && db.is_none() {
        return Err(Error::Config("match lists need a beacon database".into()));
    }
    let gamma = match (resolve_gamma(cfg, db), matches) {
        (Some(g), _) => g,
        (None, None) => 0.0,
        (None, Some(_)) => {
            return Err(Error::Config(
                "gamma is undefined: the beacon database has fewer than two beacons; set `gamma`".into(),
            ))
        }
    };

    let steps = stride::detect_steps(stream, &cfg.stride);
    let attitude = orientation::track(stream, &cfg.orientation);

    let mean_length = if steps.is_empty() {
        0.0
    } else {
        steps.iter().map(|s| s.length).sum::<f64>() / steps.len() as f64
    };
    let q = cfg
        .fusion
        .q
        .map(|m| matrix(&m))
        .unwrap_or_else(|| Matrix2::identity() * (cfg.noise.sigma_step_rel * mean_length).powi(2));
    let r = cfg
        .fusion
        .r
        .map(|m| matrix(&m))
        .unwrap_or_else(|| Matrix2::identity() * (gamma * gamma / 4.0));
    let bin_radius = cfg.fusion.bin_radius.unwrap_or(gamma);
    let by_step = matches.map(|m| lists_by_step(m, &steps));

    let start = Position2D::new(cfg.fusion.start[0], cfg.fusion.start[1]);
    let mut state = FilterState::new(start, matrix(&cfg.fusion.p0));
    let mut x_pdr = start;
    let mut drift = DriftModel::new(gamma, cfg.drift.threshold_mode);
    let mut prev_t = stream.first().map_or(0.0, |s| s.t);
    let beta = match cfg.orientation.alpha_mode {
        AlphaMode::Never => 0.0,
        _ => cfg.orientation.beta,
    };

    let mut records = Vec::with_capacity(steps.len());
    for (i, ev) in steps.iter().enumerate() {
        let step = i + 1;
        let heading = attitude.yaw(ev.sample_index);
        let alpha = attitude.alphas[ev.sample_index];

        x_pdr = deadreck::propagate(x_pdr, ev.length, heading);
        let x_prev = state.x;
        state = predict(&state, ev.length, heading, &q);
        let x_pred = state.x;

        let dt_step = (ev.t_peak - prev_t).max(f64::MIN_POSITIVE);
        prev_t = ev.t_peak;
        drift = deadreck::accumulate_heading_variance(&drift, alpha, dt_step, &cfg.noise, beta);
        drift = deadreck::accumulate_position_variance(&drift, ev.length, &cfg.noise);
        let threshold = deadreck::ges_threshold(&drift);

        let list = by_step.as_ref().and_then(|v| v[step]);
        let gate = if cfg.fusion.ges { threshold } else { f64::INFINITY };
        let observation = match (list, db) {
            (Some(list), Some(db)) => {
                ges_gate(list, &state.x, gate, db, bin_radius, cfg.fusion.selection)
            }
            _ => None,
        };

        if let Some(obs) = &observation {
            let corrected = kf_update(&state, &obs.position, &r)?;
            let reference = match cfg.fusion.smoothing_reference {
                SmoothingReference::PreviousState => x_prev,
                SmoothingReference::Predicted => x_pred,
            };
            state = FilterState::new(smooth(&corrected.x, &reference, cfg.fusion.smooth_a), corrected.p);
            drift = deadreck::reset_after_update(&drift, r.trace());
        }

        records.push(FusedStepRecord {
            step,
            t: ev.t_peak,
            x_pdr,
            x_pred,
            x_fused: state.x,
            update_applied: observation.is_some(),
            accepted_beacon: observation.as_ref().map(|o| o.beacon_id.clone()),
            observation: observation.as_ref().map(|o| o.position),
            threshold,
            heading,
            length: ev.length,
            alpha,
            p_trace: state.p.trace(),
        });
    }

    Ok(PipelineOutput {
        records,
        steps,
        gamma,
        q,
        r,
        bin_radius,
    })
}

pub const TRAJECTORY_HEADER: &str = "step,t,x_pdr,y_pdr,x_fused,y_fused,updated,beacon,T";

/// Writes the trajectory CSV with fixed six-decimal formatting.
pub fn write_trajectory_csv<W: Write>(mut w: W, records: &[FusedStepRecord]) -> Result<()> {
    let io = |e| Error::io("<trajectory writer>", e);
    writeln!(w, "{TRAJECTORY_HEADER}").map_err(io)?;
    for r in records {
        writeln!(
            w,
            "{},{:.6},{:.6},{:.6},{:.6},{:.6},{},{},{:.6}",
            r.step,
            r.t,
            r.x_pdr.x,
            r.x_pdr.y,
            r.x_fused.x,
            r.x_fused.y,
            u8::from(r.update_applied),
            r.accepted_beacon.as_deref().unwrap_or(""),
            r.threshold,
        )
        .map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn save_trajectory(path: impl AsRef<Path>, records: &[FusedStepRecord]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_trajectory_csv(std::io::BufWriter::new(file), records)
}

/// One row of a trajectory CSV as read back.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub step: usize,
    pub t: f64,
    pub pdr: Position2D,
    pub fused: Position2D,
    pub updated: bool,
    pub beacon: Option<String>,
    pub threshold: f64,
}

pub fn read_trajectory_csv<R: Read>(reader: R) -> Result<Vec<TrajectoryRow>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::parse(1, e.to_string()))?;
    if headers.iter().collect::<Vec<_>>().join(",") != TRAJECTORY_HEADER {
        return Err(Error::parse(1, format!("expected header `{TRAJECTORY_HEADER}`")));
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::parse(line, e.to_string()))?;
        let num = |k: usize| -> Result<f64> {
            rec[k]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::parse(line, format!("bad number `{}`", &rec[k])))
        };
        rows.push(TrajectoryRow {
            step: rec[0]
                .parse()
                .map_err(|_| Error::parse(line, format!("bad step `{}`", &rec[0])))?,
            t: num(1)?,
            pdr: Position2D::new(num(2)?, num(3)?),
            fused: Position2D::new(num(4)?, num(5)?),
            updated: match &rec[6] {
                "1" => true,
                "0" => false,
                other => return Err(Error::parse(line, format!("bad flag `{other}`"))),
            },
            beacon: Some(rec[7].to_string()).filter(|s| !s.is_empty()),
            threshold: num(8)?,
        });
    }
    Ok(rows)
}

pub fn load_trajectory(path: impl AsRef<Path>) -> Result<Vec<TrajectoryRow>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_trajectory_csv(file)
}
