//! Step detection on the smoothed acceleration magnitude and Weinberg step length.
//!
//! A step is a strict local maximum of the sliding-mean magnitude that exceeds
//! `peak_threshold` and comes more than `min_interval` seconds after the previously accepted
//! step. Step length uses the span of the gravity-removed raw magnitude between consecutive
//! accepted peaks: `L = K (acc_max - acc_min)^(1/4)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sensors::{ImuSample, GRAVITY};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StrideConfig {
    /// Sliding-mean window, samples.
    pub window: usize,
    /// Minimum smoothed magnitude of a step peak, m/s².
    pub peak_threshold: f64,
    /// Minimum spacing between accepted peaks, seconds.
    pub min_interval: f64,
    /// Weinberg gain.
    pub k_gain: f64,
}

impl Default for StrideConfig {
    /// Tuned for 100 Hz handheld data; none of these come from a reference dataset.
    fn default() -> Self {
        StrideConfig {
            window: 15,
            peak_threshold: 10.8,
            min_interval: 0.3,
            k_gain: 0.5,
        }
    }
}

impl StrideConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window < 1 {
            return Err(Error::Config("stride.window must be >= 1".into()));
        }
        if !(self.min_interval > 0.0 && self.min_interval.is_finite()) {
            return Err(Error::Config("stride.min_interval must be > 0".into()));
        }
        if !(self.k_gain > 0.0 && self.k_gain.is_finite()) {
            return Err(Error::Config("stride.k_gain must be > 0".into()));
        }
        if !self.peak_threshold.is_finite() {
            return Err(Error::Config("stride.peak_threshold must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepEvent {
    /// Index of the peak sample in the input stream.
    pub sample_index: usize,
    pub t_peak: f64,
    /// Estimated step length, meters.
    pub length: f64,
    pub acc_max: f64,
    pub acc_min: f64,
}

pub fn accel_magnitude(sample: &ImuSample) -> f64 {
    sample.accel.norm()
}

/// Trailing mean over the last `min(k + 1, window)` inputs.
pub fn sliding_mean(signal: &[f64], window: usize) -> Vec<f64> {
    assert!(window >= 1, "window must be >= 1");
    (0..signal.len())
        .map(|k| {
            let start = (k + 1).saturating_sub(window);
            let slice = &signal[start..=k];
            slice.iter().sum::<f64>() / slice.len() as f64
        })
        .collect()
}

/// True when `k` starts a strict maximum: higher than its predecessor and higher than the
/// first differing value after any plateau. Endpoints are never peaks.
pub(crate) fn is_strict_peak(f: &[f64], k: usize) -> bool {
    if k == 0 || k + 1 >= f.len() || f[k] <= f[k - 1] {
        return false;
    }
    match f[k + 1..].iter().find(|&&v| v != f[k]) {
        Some(&next) => next < f[k],
        None => false,
    }
}

pub fn step_length(acc_max: f64, acc_min: f64, k_gain: f64) -> f64 {
    assert!(
        acc_max >= acc_min,
        "step_length: acc_max ({acc_max}) < acc_min ({acc_min})"
    );
    k_gain * (acc_max - acc_min).powf(0.25)
}

/// Detects steps in a magnitude signal sampled at `times`.
pub fn detect_steps_in_signal(times: &[f64], magnitude: &[f64], cfg: &StrideConfig) -> Vec<StepEvent> {
    assert_eq!(times.len(), magnitude.len());
    let filtered = sliding_mean(magnitude, cfg.window);
    let mut events: Vec<StepEvent> = Vec::new();
    let mut segment_start = 0usize;

    for k in 1..filtered.len().saturating_sub(1) {
        if filtered[k] <= cfg.peak_threshold || !is_strict_peak(&filtered, k) {
            continue;
        }
        if let Some(prev) = events.last() {
            if times[k] - prev.t_peak <= cfg.min_interval {
                continue;
            }
        }
        let (acc_min, acc_max) = magnitude[segment_start..=k]
            .iter()
            .map(|m| m - GRAVITY)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            });
        events.push(StepEvent {
            sample_index: k,
            t_peak: times[k],
            length: step_length(acc_max, acc_min, cfg.k_gain),
            acc_max,
            acc_min,
        });
        segment_start = k;
    }
    events
}

pub fn detect_steps(stream: &[ImuSample], cfg: &StrideConfig) -> Vec<StepEvent> {
    let times: Vec<f64> = stream.iter().map(|s| s.t).collect();
    let magnitude: Vec<f64> = stream.iter().map(accel_magnitude).collect();
    detect_steps_in_signal(&times, &magnitude, cfg)
}
