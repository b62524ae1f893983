//! Pedestrian dead reckoning fused with visual beacon retrieval.
//!
//! Pipeline: [`stride`] detects steps and their lengths, [`orientation`] tracks heading with
//! magnetic disturbance rejection, [`deadreck`] integrates position and models drift, and
//! [`fusion`] gates retrieval candidates against that drift before a Kalman update.
//! [`synth`] generates scenarios with ground truth and [`evalkit`] scores them.

pub mod beacons;
pub mod config;
pub mod deadreck;
pub mod error;
pub mod evalkit;
pub mod fusion;
pub mod orientation;
pub mod sensors;
pub mod stride;
pub mod synth;

pub use config::RunConfig;
pub use error::{Error, Result};
pub use fusion::{run_pipeline, FusedStepRecord, PipelineOutput};
pub use sensors::{Beacon, BeaconDb, ImuSample, Position2D, Quaternion};
