//! Sensor and beacon domain types, plus validated ingestion of the IMU and beacon files.

mod beacon;
mod imu;
mod quaternion;

pub use beacon::{
    load_beacons, read_beacons_csv, save_beacons, write_beacons_csv, Beacon, BeaconDb, GeoOrigin,
    Position2D,
};
pub use imu::{
    load_imu_stream, read_imu_csv, save_imu_stream, validate_stream, write_imu_csv, ImuSample,
    IMU_HEADER,
};
pub use quaternion::Quaternion;

/// Standard gravity, m/s².
pub const GRAVITY: f64 = 9.81;
