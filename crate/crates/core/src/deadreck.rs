//! Step-wise position propagation and the drift model that sizes the gross-error gate.
//!
//! Per step the heading variance grows by `0.25 σ_gy² Δt² + α β² (σ_a² + σ_m²)` and the
//! position-magnitude variance by `(σ_L,rel L)² + σ_ψ² L²`. The gate threshold is
//! `T = sqrt(σ_p²) + γ`; [`ThresholdMode::LiteralSum`] instead sums the per-step cumulative
//! variances under the root.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sensors::Position2D;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    /// Accelerometer noise std, m/s².
    pub sigma_accel: f64,
    /// Gyroscope noise std, rad/s.
    pub sigma_gyro: f64,
    /// Magnetometer noise std, µT.
    pub sigma_mag: f64,
    /// Step-length std as a fraction of the step length.
    pub sigma_step_rel: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            sigma_accel: 0.05,
            sigma_gyro: 0.005,
            sigma_mag: 0.2,
            sigma_step_rel: 0.15,
        }
    }
}

impl NoiseConfig {
    pub const ZERO: NoiseConfig = NoiseConfig {
        sigma_accel: 0.0,
        sigma_gyro: 0.0,
        sigma_mag: 0.0,
        sigma_step_rel: 0.0,
    };

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.sigma_accel,
            self.sigma_gyro,
            self.sigma_mag,
            self.sigma_step_rel,
        ];
        if all.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Config("noise std values must be finite and >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ThresholdMode {
    /// `T = sqrt(σ_p²) + γ`: the recursion already accumulates.
    #[default]
    Recursive,
    /// `T = sqrt(Σ_i σ_p,i²) + γ` over the cumulative per-step variances since the last reset.
    LiteralSum,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DriftModel {
    /// Accumulated heading variance, rad².
    pub sigma2_psi: f64,
    /// Accumulated position-magnitude variance, m².
    pub sigma2_p: f64,
    /// Sum of `sigma2_p` after each step since the last reset, m².
    pub sigma2_p_sum: f64,
    /// Beacon adjacency margin, m.
    pub gamma: f64,
    pub steps_since_reset: usize,
    pub mode: ThresholdMode,
}

impl DriftModel {
    pub fn new(gamma: f64, mode: ThresholdMode) -> Self {
        assert!(gamma >= 0.0, "gamma must be >= 0");
        DriftModel {
            sigma2_psi: 0.0,
            sigma2_p: 0.0,
            sigma2_p_sum: 0.0,
            gamma,
            steps_since_reset: 0,
            mode,
        }
    }
}

/// Default margin: half of the smallest nearest-neighbor beacon spacing.
pub fn gamma_from_spacing(min_spacing: f64) -> f64 {
    0.5 * min_spacing
}

pub fn propagate(p: Position2D, length: f64, heading: f64) -> Position2D {
    debug_assert!(length >= 0.0);
    let (s, c) = heading.sin_cos();
    Position2D::new(p.x + length * c, p.y + length * s)
}

pub fn accumulate_heading_variance(
    model: &DriftModel,
    alpha: u8,
    dt_step: f64,
    noise: &NoiseConfig,
    beta: f64,
) -> DriftModel {
    assert!(dt_step > 0.0, "dt_step must be > 0");
    let gyro_term = 0.25 * noise.sigma_gyro.powi(2) * dt_step.powi(2);
    let correction_term = f64::from(alpha)
        * beta.powi(2)
        * (noise.sigma_accel.powi(2) + noise.sigma_mag.powi(2));
    DriftModel {
        sigma2_psi: model.sigma2_psi + gyro_term + correction_term,
        ..*model
    }
}

pub fn accumulate_position_variance(model: &DriftModel, length: f64, noise: &NoiseConfig) -> DriftModel {
    assert!(length >= 0.0, "step length must be >= 0");
    let sigma2_p = model.sigma2_p
        + (noise.sigma_step_rel * length).powi(2)
        + model.sigma2_psi * length.powi(2);
    DriftModel {
        sigma2_p,
        sigma2_p_sum: model.sigma2_p_sum + sigma2_p,
        steps_since_reset: model.steps_since_reset + 1,
        ..*model
    }
}

pub fn ges_threshold(model: &DriftModel) -> f64 {
    let accumulated = match model.mode {
        ThresholdMode::Recursive => model.sigma2_p,
        ThresholdMode::LiteralSum => model.sigma2_p_sum,
    };
    accumulated.sqrt() + model.gamma
}

/// Re-seeds the position variance with the accepted observation's variance
/// (`trace(R) / 2`). Heading variance is kept: a position fix does not observe heading.
pub fn reset_after_update(model: &DriftModel, r_trace: f64) -> DriftModel {
    let residual = 0.5 * r_trace;
    DriftModel {
        sigma2_p: residual,
        sigma2_p_sum: residual,
        steps_since_reset: 0,
        ..*model
    }
}
