//! Synthetic walks with ground truth: IMU stream, beacon database and retrieval lists.
//!
//! The device is held level and points along the walking direction. Each step is one
//! period of a raised-cosine vertical acceleration with its trough at the step boundary
//! and its peak mid-step, span `(L_encoded / K)⁴`, so the step-length model returns
//! `L_encoded` exactly when the samples hit the trough and the peak. Heading changes
//! happen in the first 30% of a step. Retrieval lists put each event's top-1 at the
//! beacon position plus the event's offset; a nonzero offset adds an aliased beacon to
//! the database.

use std::f64::consts::PI;
use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::Vector3;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::beacons::{self, MatchCandidate, MatchList, MatchMap, QueryKey, TOP_K};
use crate::config::RunConfig;
use crate::deadreck::NoiseConfig;
use crate::error::{Error, Result};
use crate::sensors::{self, Beacon, BeaconDb, ImuSample, Position2D, GRAVITY};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MagZone {
    pub center: [f64; 2],
    pub radius: f64,
    /// Added to the earth-frame field, µT.
    pub offset: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeaconEvent {
    /// 1-based step at which the beacon is seen.
    pub step: usize,
    pub beacon: String,
    /// Displacement of the retrieved position from the true one, m.
    #[serde(default)]
    pub offset: [f64; 2],
    /// Marks an event that should not count as recognized.
    #[serde(default)]
    pub gross: bool,
}

impl BeaconEvent {
    /// Id of the aliased beacon retrieved instead of the true one.
    pub fn alias_id(&self) -> String {
        format!("{}~alias", self.beacon)
    }

    fn has_alias(&self) -> bool {
        self.offset != [0.0, 0.0]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtraBeacon {
    pub id: String,
    pub position: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Scenario {
    pub waypoints: Vec<[f64; 2]>,
    pub step_length_true: f64,
    /// Steps per second.
    pub cadence: f64,
    /// Hz.
    pub sample_rate: f64,
    /// Step-length gain used to encode the acceleration span.
    pub k_gain: f64,
    /// Ratio of the encoded step length to the true one.
    pub stride_scale: f64,
    /// Relative standard deviation of the encoded step length, per step.
    pub stride_jitter: f64,
    /// Seconds of standing still before and after the walk.
    pub standstill: f64,
    /// Constant gyroscope bias, rad/s.
    pub gyro_bias: [f64; 3],
    /// Undisturbed earth-frame field, µT.
    pub mag_reference: [f64; 3],
    /// Sensor noise. `sigma_step_rel` is not used by the generator.
    pub noise: NoiseConfig,
    pub mag_zones: Vec<MagZone>,
    pub beacon_events: Vec<BeaconEvent>,
    pub extra_beacons: Vec<ExtraBeacon>,
    /// Decoys in ranks 2 to 25 are at least this far from the true position, m.
    pub decoy_min_distance: f64,
    pub rng_seed: u64,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            waypoints: vec![[0.0, 0.0], [70.0, 0.0]],
            step_length_true: 0.7,
            cadence: 2.0,
            sample_rate: 100.0,
            k_gain: 0.5,
            stride_scale: 1.0,
            stride_jitter: 0.0,
            standstill: 1.0,
            gyro_bias: [0.0; 3],
            mag_reference: [0.0, 20.0, -40.0],
            noise: NoiseConfig::default(),
            mag_zones: Vec::new(),
            beacon_events: Vec::new(),
            extra_beacons: Vec::new(),
            decoy_min_distance: 60.0,
            rng_seed: 0,
        }
    }
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(text).map_err(|e| Error::Scenario(e.message().to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario always encodes")
    }

    /// Same scenario without any sensor noise, stride error or bias.
    pub fn noiseless(mut self) -> Self {
        self.noise = NoiseConfig::ZERO;
        self.stride_scale = 1.0;
        self.stride_jitter = 0.0;
        self.gyro_bias = [0.0; 3];
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Scenario(m.to_string()));
        if self.waypoints.len() < 2 {
            return bad("need at least two waypoints");
        }
        if self.waypoints.iter().flatten().any(|v| !v.is_finite()) {
            return bad("waypoints must be finite");
        }
        for (name, v) in [
            ("step_length_true", self.step_length_true),
            ("cadence", self.cadence),
            ("sample_rate", self.sample_rate),
            ("k_gain", self.k_gain),
            ("stride_scale", self.stride_scale),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Scenario(format!("{name} must be > 0")));
            }
        }
        if self.sample_rate < 8.0 * self.cadence {
            return bad("sample_rate must be at least 8 x cadence");
        }
        if !(self.stride_jitter.is_finite() && (0.0..0.5).contains(&self.stride_jitter)) {
            return bad("stride_jitter must be in [0, 0.5)");
        }
        if !(self.standstill.is_finite() && self.standstill >= 0.0) {
            return bad("standstill must be >= 0");
        }
        if self.gyro_bias.iter().chain(&self.mag_reference).any(|v| !v.is_finite()) {
            return bad("gyro_bias and mag_reference must be finite");
        }
        self.noise.validate().map_err(|e| Error::Scenario(e.to_string()))?;
        for z in &self.mag_zones {
            if !(z.radius.is_finite() && z.radius > 0.0)
                || z.center.iter().chain(&z.offset).any(|v| !v.is_finite())
            {
                return bad("mag zones need a finite center, offset and radius > 0");
            }
        }
        for e in &self.beacon_events {
            if e.step == 0 || e.beacon.is_empty() || e.offset.iter().any(|v| !v.is_finite()) {
                return bad("beacon events need a step >= 1, an id and a finite offset");
            }
        }
        if !(self.decoy_min_distance.is_finite() && self.decoy_min_distance >= 0.0) {
            return bad("decoy_min_distance must be >= 0");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruthStep {
    pub step: usize,
    /// Mid-step time, s.
    pub t: f64,
    /// Position at the end of the step.
    pub position: Position2D,
    pub heading: f64,
    pub in_disturbance: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroundTruth {
    pub start: Position2D,
    pub steps: Vec<TruthStep>,
}

impl GroundTruth {
    pub fn positions(&self) -> Vec<Position2D> {
        self.steps.iter().map(|s| s.position).collect()
    }

    pub fn path_length(&self) -> f64 {
        let mut prev = self.start;
        let mut total = 0.0;
        for s in &self.steps {
            total += s.position.distance(&prev);
            prev = s.position;
        }
        total
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub imu: Vec<ImuSample>,
    pub truth: GroundTruth,
    pub matches: MatchMap,
    pub beacons: BeaconDb,
    pub events: Vec<BeaconEvent>,
}

fn wrap_angle(a: f64) -> f64 {
    let a = (a + PI).rem_euclid(2.0 * PI) - PI;
    if a <= -PI {
        a + 2.0 * PI
    } else {
        a
    }
}

/// Per-step true displacements: `(heading, end position)`.
fn plan_steps(s: &Scenario) -> Result<Vec<(f64, Position2D)>> {
    let l = s.step_length_true;
    let mut pos = Position2D::new(s.waypoints[0][0], s.waypoints[0][1]);
    let mut out = Vec::new();
    for (i, w) in s.waypoints.iter().enumerate().skip(1) {
        let target = Position2D::new(w[0], w[1]);
        let d = target - pos;
        let n = (d.norm() / l).round();
        if n < 1.0 {
            return Err(Error::Scenario(format!(
                "waypoint {i} is {:.3} m away, shorter than one {l} m step",
                d.norm()
            )));
        }
        let heading = d.y.atan2(d.x);
        for _ in 0..n as usize {
            pos = crate::deadreck::propagate(pos, l, heading);
            out.push((heading, pos));
        }
    }
    Ok(out)
}

fn zone_offset(zones: &[MagZone], p: &Position2D) -> (Vector3<f64>, bool) {
    let mut off = Vector3::zeros();
    let mut inside = false;
    for z in zones {
        if p.distance(&Position2D::new(z.center[0], z.center[1])) <= z.radius {
            off += Vector3::from(z.offset);
            inside = true;
        }
    }
    (off, inside)
}

fn normal3(rng: &mut ChaCha8Rng, sigma: f64) -> Vector3<f64> {
    let mut draw = || {
        let z: f64 = rng.sample(StandardNormal);
        z * sigma
    };
    Vector3::new(draw(), draw(), draw())
}

/// Generates a full dataset. Pure given the scenario (including its seed).
pub fn generate(s: &Scenario) -> Result<Dataset> {
    s.validate()?;
    let plan = plan_steps(s)?;
    let m = plan.len();
    let mut rng = ChaCha8Rng::seed_from_u64(s.rng_seed);

    let encoded: Vec<f64> = (0..m)
        .map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            let jitter = (s.stride_jitter * z).clamp(-0.9, 0.9);
            s.step_length_true * s.stride_scale * (1.0 + jitter)
        })
        .collect();
    let spans: Vec<f64> = encoded.iter().map(|l| (l / s.k_gain).powi(4)).collect();

    let start = Position2D::new(s.waypoints[0][0], s.waypoints[0][1]);
    let headings: Vec<f64> = plan.iter().map(|p| p.0).collect();
    let starts: Vec<Position2D> = std::iter::once(start).chain(plan.iter().map(|p| p.1)).collect();

    let dt = 1.0 / s.sample_rate;
    let step_period = 1.0 / s.cadence;
    let t_walk = (s.standstill * s.sample_rate).round() * dt;
    let t_end_walk = t_walk + m as f64 * step_period;
    let n_samples = ((t_end_walk + s.standstill) * s.sample_rate).ceil() as usize + 1;

    // step index and phase of each sample, None while standing
    let phase_of = |j: usize| -> Option<(usize, f64)> {
        let mut u = (j as f64 * dt - t_walk) * s.cadence;
        if (u - u.round()).abs() < 1e-9 {
            u = u.round();
        }
        if u < 0.0 || u >= m as f64 {
            return None;
        }
        let k = u.floor() as usize;
        Some((k, u - k as f64))
    };

    // turn profile: raised-cosine rate over the samples in phase [0, 0.3)
    let mut yaw_rate = vec![0.0; n_samples];
    let mut samples_of_step: Vec<Vec<usize>> = vec![Vec::new(); m];
    for j in 0..n_samples {
        if let Some((k, phi)) = phase_of(j) {
            if phi < 0.3 {
                samples_of_step[k].push(j);
            }
        }
    }
    for k in 0..m {
        let prev = if k == 0 { headings[0] } else { headings[k - 1] };
        let delta = wrap_angle(headings[k] - prev);
        if delta == 0.0 {
            continue;
        }
        let idx = &samples_of_step[k];
        let n = idx.len();
        if n < 2 {
            return Err(Error::Scenario("sample rate too low to resolve a turn".into()));
        }
        for (i, &j) in idx.iter().enumerate() {
            let w = 1.0 - (2.0 * PI * (i as f64 + 0.5) / n as f64).cos();
            yaw_rate[j] = delta / (n as f64 * dt) * w;
        }
    }

    let m_ref = Vector3::from(s.mag_reference);
    let bias = Vector3::from(s.gyro_bias);
    let mut yaw = headings.first().copied().unwrap_or(0.0);
    let mut imu = Vec::with_capacity(n_samples);
    for (j, &rate) in yaw_rate.iter().enumerate() {
        let t = j as f64 * dt;
        // the gyro sample at j carries the rotation from j-1 to j
        yaw += rate * dt;
        let (vertical, pos) = match phase_of(j) {
            Some((k, phi)) => (
                GRAVITY - 0.5 * spans[k] * (2.0 * PI * phi).cos(),
                starts[k] + (starts[k + 1] - starts[k]).scale(phi),
            ),
            None if t < t_walk => (GRAVITY, start),
            None => (GRAVITY, starts[m]),
        };
        let (offset, _) = zone_offset(&s.mag_zones, &pos);
        let (sy, cy) = yaw.sin_cos();
        let field = m_ref + offset;
        // earth to body for a level device rotated by `yaw` about the vertical
        let mag_body = Vector3::new(cy * field.x + sy * field.y, -sy * field.x + cy * field.y, field.z);
        let accel = Vector3::new(0.0, 0.0, vertical) + normal3(&mut rng, s.noise.sigma_accel);
        let gyro = Vector3::new(0.0, 0.0, rate) + bias + normal3(&mut rng, s.noise.sigma_gyro);
        let mag = mag_body + normal3(&mut rng, s.noise.sigma_mag);
        imu.push(ImuSample::new(t, accel, gyro, mag));
    }

    let truth = GroundTruth {
        start,
        steps: (0..m)
            .map(|k| TruthStep {
                step: k + 1,
                t: t_walk + (k as f64 + 0.5) * step_period,
                position: starts[k + 1],
                heading: headings[k],
                in_disturbance: zone_offset(&s.mag_zones, &starts[k + 1]).1,
            })
            .collect(),
    };

    let beacons = build_beacon_db(s, &truth)?;
    let matches = build_matches(s, &truth, &beacons, &mut rng)?;
    Ok(Dataset {
        imu,
        truth,
        matches,
        beacons,
        events: s.beacon_events.clone(),
    })
}

fn event_position(e: &BeaconEvent, truth: &GroundTruth) -> Result<Position2D> {
    truth
        .steps
        .get(e.step - 1)
        .map(|t| t.position)
        .ok_or_else(|| {
            Error::Scenario(format!(
                "beacon event `{}` at step {} is past the last step {}",
                e.beacon,
                e.step,
                truth.steps.len()
            ))
        })
}

fn build_beacon_db(s: &Scenario, truth: &GroundTruth) -> Result<BeaconDb> {
    let mut list = Vec::new();
    for e in &s.beacon_events {
        let p = event_position(e, truth)?;
        list.push(Beacon::new(e.beacon.clone(), p));
        if e.has_alias() {
            list.push(Beacon::new(e.alias_id(), p + Position2D::new(e.offset[0], e.offset[1])));
        }
    }
    for x in &s.extra_beacons {
        list.push(Beacon::new(x.id.clone(), Position2D::new(x.position[0], x.position[1])));
    }
    BeaconDb::new(list).map_err(|e| Error::Scenario(e.to_string()))
}

fn build_matches(
    s: &Scenario,
    truth: &GroundTruth,
    db: &BeaconDb,
    rng: &mut ChaCha8Rng,
) -> Result<MatchMap> {
    let mut map = MatchMap::new();
    for e in &s.beacon_events {
        let p = event_position(e, truth)?;
        let top = if e.has_alias() { e.alias_id() } else { e.beacon.clone() };
        let mut decoys: Vec<&Beacon> = db
            .iter()
            .filter(|b| b.id != top && b.id != e.beacon && b.position.distance(&p) >= s.decoy_min_distance)
            .collect();
        decoys.shuffle(rng);
        decoys.truncate(TOP_K - 1);
        let mut candidates = vec![MatchCandidate::new(top, 0.9 + 0.1 * rng.gen::<f64>())];
        let mut sim = candidates[0].similarity;
        for d in decoys {
            sim *= 0.8 + 0.15 * rng.gen::<f64>();
            candidates.push(MatchCandidate::new(d.id.clone(), sim));
        }
        let key = QueryKey::Step(e.step as u64);
        if map.insert(key, MatchList::new(key, candidates)).is_some() {
            return Err(Error::Scenario(format!("two beacon events at step {}", e.step)));
        }
    }
    Ok(map)
}

/// Named closed-loop profiles: `dense` (12 events, 1 gross) and `sparse` (11 events, 4 gross).
pub fn closed_loop_scenario(profile: &str) -> Result<Scenario> {
    let gross_steps: &[usize] = match profile {
        "dense" => &[7],
        "sparse" => &[2, 5, 8, 10],
        other => {
            return Err(Error::Scenario(format!(
                "unknown profile `{other}` (expected `sparse` or `dense`)"
            )))
        }
    };
    let n_events = if profile == "dense" { 12 } else { 11 };
    let waypoints = vec![[0.0, 0.0], [420.0, 0.0], [420.0, 280.0], [0.0, 280.0], [0.0, 0.0]];
    let l = 0.7;
    let total_steps = 2000;
    let beacon_events = (0..n_events)
        .map(|i| {
            let step = (i + 1) * total_steps / (n_events + 1);
            let gross = gross_steps.contains(&(i + 1));
            BeaconEvent {
                step,
                beacon: format!("B{:02}", i + 1),
                offset: if gross { outward(&waypoints, step as f64 * l, 50.0) } else { [0.0, 0.0] },
                gross,
            }
        })
        .collect();
    Ok(Scenario {
        waypoints,
        step_length_true: l,
        stride_scale: 0.975,
        stride_jitter: 0.015,
        gyro_bias: [0.0, 0.0, 0.0035],
        mag_zones: vec![
            MagZone { center: [420.0, 140.0], radius: 30.0, offset: [40.0, -30.0, -70.0] },
            MagZone { center: [150.0, 280.0], radius: 30.0, offset: [-40.0, 30.0, -70.0] },
        ],
        beacon_events,
        extra_beacons: filler_grid([210.0, 140.0], 12.0, 33 - n_events - gross_steps.len()),
        rng_seed: 7,
        ..Scenario::default()
    })
}

/// Outward normal of the rectangular loop at arc length `s`, scaled to `len`.
fn outward(waypoints: &[[f64; 2]], s: f64, len: f64) -> [f64; 2] {
    let mut acc = 0.0;
    for w in waypoints.windows(2) {
        let d = Position2D::new(w[1][0] - w[0][0], w[1][1] - w[0][1]);
        let seg = d.norm();
        if s <= acc + seg {
            // counterclockwise loop: outward is the right-hand normal
            return [d.y / seg * len, -d.x / seg * len];
        }
        acc += seg;
    }
    [0.0, -len]
}

/// `n` beacons on a square grid with the given spacing, centered on `center`.
pub fn filler_grid(center: [f64; 2], spacing: f64, n: usize) -> Vec<ExtraBeacon> {
    let side = (n as f64).sqrt().ceil() as usize;
    let half = (side as f64 - 1.0) / 2.0;
    (0..n)
        .map(|i| ExtraBeacon {
            id: format!("F{:02}", i + 1),
            position: [
                center[0] + (((i % side) as f64) - half) * spacing,
                center[1] + (((i / side) as f64) - half) * spacing,
            ],
        })
        .collect()
}

pub const TRUTH_HEADER: &str = "step,t,x,y,heading,in_disturbance";
pub const EVENTS_HEADER: &str = "step,beacon,dx,dy,gross";

pub fn write_truth_csv<W: Write>(mut w: W, truth: &GroundTruth) -> Result<()> {
    let io = |e| Error::io("<truth writer>", e);
    writeln!(w, "{TRUTH_HEADER}").map_err(io)?;
    writeln!(w, "0,0,{},{},,0", truth.start.x, truth.start.y).map_err(io)?;
    for s in &truth.steps {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            s.step,
            s.t,
            s.position.x,
            s.position.y,
            s.heading,
            u8::from(s.in_disturbance)
        )
        .map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_truth_csv<R: std::io::Read>(reader: R) -> Result<GroundTruth> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(|e| Error::parse(1, e.to_string()))?;
    if header.iter().collect::<Vec<_>>().join(",") != TRUTH_HEADER {
        return Err(Error::parse(1, format!("expected header `{TRUTH_HEADER}`")));
    }
    let mut start = None;
    let mut steps = Vec::new();
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
        let step: usize = rec[0]
            .parse()
            .map_err(|_| Error::parse(line, format!("bad step `{}`", &rec[0])))?;
        let position = Position2D::new(num(2)?, num(3)?);
        if step == 0 {
            start = Some(position);
            continue;
        }
        if step != steps.len() + 1 {
            return Err(Error::parse(line, format!("expected step {}", steps.len() + 1)));
        }
        steps.push(TruthStep {
            step,
            t: num(1)?,
            position,
            heading: num(4)?,
            in_disturbance: &rec[5] == "1",
        });
    }
    Ok(GroundTruth {
        start: start.unwrap_or(Position2D::ORIGIN),
        steps,
    })
}

pub fn load_truth(path: impl AsRef<Path>) -> Result<GroundTruth> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_truth_csv(file)
}

pub fn write_events_csv<W: Write>(mut w: W, events: &[BeaconEvent]) -> Result<()> {
    let io = |e| Error::io("<events writer>", e);
    writeln!(w, "{EVENTS_HEADER}").map_err(io)?;
    for e in events {
        writeln!(w, "{},{},{},{},{}", e.step, e.beacon, e.offset[0], e.offset[1], u8::from(e.gross))
            .map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_events_csv<R: std::io::Read>(reader: R) -> Result<Vec<BeaconEvent>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(|e| Error::parse(1, e.to_string()))?;
    if header.iter().collect::<Vec<_>>().join(",") != EVENTS_HEADER {
        return Err(Error::parse(1, format!("expected header `{EVENTS_HEADER}`")));
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::parse(line, e.to_string()))?;
        let bad = |k: usize| Error::parse(line, format!("bad value `{}`", &rec[k]));
        out.push(BeaconEvent {
            step: rec[0].parse().map_err(|_| bad(0))?,
            beacon: rec[1].to_string(),
            offset: [rec[2].parse().map_err(|_| bad(2))?, rec[3].parse().map_err(|_| bad(3))?],
            gross: match &rec[4] {
                "1" => true,
                "0" => false,
                _ => return Err(bad(4)),
            },
        });
    }
    Ok(out)
}

pub fn load_events(path: impl AsRef<Path>) -> Result<Vec<BeaconEvent>> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_events_csv(file)
}

/// File names inside a dataset directory.
pub mod files {
    pub const IMU: &str = "imu.csv";
    pub const MATCHES: &str = "matches.jsonl";
    pub const BEACONS: &str = "beacons.csv";
    pub const TRUTH: &str = "truth.csv";
    pub const EVENTS: &str = "events.csv";
    pub const SCENARIO: &str = "scenario.toml";
    pub const CONFIG: &str = "config.toml";
}

/// Writes every dataset file plus a run config whose start matches the walk.
pub fn write_dataset(dir: impl AsRef<Path>, scenario: &Scenario, data: &Dataset) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let create = |name: &str| {
        let p = dir.join(name);
        fs::File::create(&p)
            .map(std::io::BufWriter::new)
            .map_err(|e| Error::io(&p, e))
    };
    sensors::write_imu_csv(create(files::IMU)?, &data.imu)?;
    beacons::write_matches_jsonl(create(files::MATCHES)?, data.matches.values())?;
    sensors::write_beacons_csv(create(files::BEACONS)?, &data.beacons)?;
    write_truth_csv(create(files::TRUTH)?, &data.truth)?;
    write_events_csv(create(files::EVENTS)?, &data.events)?;
    let write_text = |name: &str, text: String| {
        let p = dir.join(name);
        fs::write(&p, text).map_err(|e| Error::io(&p, e))
    };
    write_text(files::SCENARIO, scenario.to_toml_string())?;
    let mut cfg = RunConfig::default();
    cfg.fusion.start = [data.truth.start.x, data.truth.start.y];
    write_text(files::CONFIG, cfg.to_toml_string())
}
