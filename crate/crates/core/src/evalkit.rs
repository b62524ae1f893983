//! Trajectory and recognition metrics.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::FusedStepRecord;
use crate::sensors::Position2D;
use crate::synth::BeaconEvent;

/// Per-step `‖estimate − truth‖`.
pub fn horizontal_error(traj: &[Position2D], truth: &[Position2D]) -> Result<Vec<f64>> {
    if traj.len() != truth.len() {
        return Err(Error::Validation(format!(
            "trajectory has {} steps but truth has {}",
            traj.len(),
            truth.len()
        )));
    }
    Ok(traj.iter().zip(truth).map(|(a, b)| a.distance(b)).collect())
}

/// Linear-interpolation percentile with inclusive endpoints: rank `q/100 · (n − 1)` into
/// the sorted series.
pub fn percentile(series: &[f64], q: f64) -> Result<f64> {
    if series.is_empty() {
        return Err(Error::Validation("percentile of an empty series".into()));
    }
    if !(0.0..=100.0).contains(&q) {
        return Err(Error::Validation(format!("percentile {q} is outside [0, 100]")));
    }
    let mut sorted = series.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = q / 100.0 * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    Ok(sorted[lo] + (sorted[hi] - sorted[lo]) * (rank - lo as f64))
}

/// Sorted `(error, i / n)` pairs.
pub fn cdf(series: &[f64]) -> Vec<(f64, f64)> {
    let mut sorted = series.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .into_iter()
        .enumerate()
        .map(|(i, e)| (e, (i + 1) as f64 / n))
        .collect()
}

pub const CDF_HEADER: &str = "error_m,fraction";

pub fn write_cdf_csv<W: Write>(mut w: W, series: &[f64]) -> Result<()> {
    if series.is_empty() {
        return Err(Error::Validation("CDF of an empty series".into()));
    }
    let io = |e| Error::io("<cdf writer>", e);
    writeln!(w, "{CDF_HEADER}").map_err(io)?;
    for (e, f) in cdf(series) {
        writeln!(w, "{e:.6},{f:.6}").map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn cdf_export(series: &[f64], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_cdf_csv(std::io::BufWriter::new(file), series)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecognitionStats {
    pub recognized: usize,
    pub total: usize,
    /// Percent; absent without events.
    pub accuracy: Option<f64>,
}

/// An event counts as recognized when its step applied an update with the event's beacon.
pub fn recognition_stats(records: &[FusedStepRecord], events: &[BeaconEvent]) -> RecognitionStats {
    let recognized = events
        .iter()
        .filter(|e| {
            records.iter().any(|r| {
                r.step == e.step && r.update_applied && r.accepted_beacon.as_deref() == Some(&e.beacon)
            })
        })
        .count();
    recognition_from_counts(recognized, events.len())
}

pub fn recognition_from_counts(recognized: usize, total: usize) -> RecognitionStats {
    RecognitionStats {
        recognized,
        total,
        accuracy: (total > 0).then(|| 100.0 * recognized as f64 / total as f64),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub p50: f64,
    pub p75: f64,
    pub p95: f64,
    pub mean: f64,
    pub recognized: usize,
    pub total: usize,
}

pub fn metrics(errors: &[f64], recognition: RecognitionStats) -> Result<Metrics> {
    Ok(Metrics {
        p50: percentile(errors, 50.0)?,
        p75: percentile(errors, 75.0)?,
        p95: percentile(errors, 95.0)?,
        mean: errors.iter().sum::<f64>() / errors.len() as f64,
        recognized: recognition.recognized,
        total: recognition.total,
    })
}
