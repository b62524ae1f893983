//! Run configuration: every module's settings in one TOML document.
//!
//! ```toml
//! gamma = 12.5                 # optional; defaults to half the min beacon spacing
//!
//! [stride]
//! window = 15
//! peak_threshold = 10.8
//!
//! [orientation]
//! alpha_mode = "detect"        # "always" disables disturbance rejection
//!
//! [drift]
//! threshold_mode = "recursive" # or "literal-sum"
//!
//! [fusion]
//! ges = true
//! selection = "vote"           # or "first-pass"
//! smooth_a = 0.7
//! ```
//!
//! Unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::deadreck::{NoiseConfig, ThresholdMode};
use crate::error::{Error, Result};
use crate::fusion::FusionConfig;
use crate::orientation::{AlphaMode, MdrConfig};
use crate::stride::StrideConfig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct DriftConfig {
    pub threshold_mode: ThresholdMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Beacon adjacency margin, m. Derived from the beacon database when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    pub stride: StrideConfig,
    pub orientation: MdrConfig,
    pub noise: NoiseConfig,
    pub drift: DriftConfig,
    pub fusion: FusionConfig,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    /// Applies `dotted.key=value` overrides, where `value` is parsed as a TOML value and
    /// falls back to a plain string.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self> {
        if overrides.is_empty() {
            return Ok(self.clone());
        }
        let mut doc = toml::Value::try_from(self)
            .map_err(|e| Error::Config(format!("cannot encode config: {e}")))?;
        for o in overrides {
            let o = o.as_ref();
            let (key, raw) = o
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override `{o}` is not key=value")))?;
            let value = parse_override_value(raw.trim());
            let mut cursor = &mut doc;
            let parts: Vec<&str> = key.trim().split('.').collect();
            for (i, part) in parts.iter().enumerate() {
                let table = cursor
                    .as_table_mut()
                    .ok_or_else(|| Error::Config(format!("`{key}` does not name a table entry")))?;
                if i + 1 == parts.len() {
                    table.insert(part.to_string(), value.clone());
                    break;
                }
                cursor = table
                    .entry(part.to_string())
                    .or_insert_with(|| toml::Value::Table(Default::default()));
            }
        }
        let text = toml::to_string(&doc).map_err(|e| Error::Config(e.to_string()))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.stride.validate()?;
        self.orientation.validate()?;
        self.noise.validate()?;
        self.fusion.validate()?;
        if let Some(g) = self.gamma {
            if !(g.is_finite() && g >= 0.0) {
                return Err(Error::Config("gamma must be finite and >= 0".into()));
            }
        }
        Ok(())
    }

    /// Gating disabled: every retrieval candidate is eligible.
    pub fn without_ges(mut self) -> Self {
        self.fusion.ges = false;
        self
    }

    /// Disturbance rejection disabled: field corrections always applied.
    pub fn without_mdr(mut self) -> Self {
        self.orientation.alpha_mode = AlphaMode::Always;
        self
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("run config always encodes")
    }
}

fn parse_override_value(raw: &str) -> toml::Value {
    let wrapped = format!("v = {raw}");
    match toml::from_str::<toml::Table>(&wrapped) {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}
