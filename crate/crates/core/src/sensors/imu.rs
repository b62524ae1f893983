use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const IMU_HEADER: [&str; 10] = ["t", "ax", "ay", "az", "gx", "gy", "gz", "mx", "my", "mz"];

/// One timestamped accelerometer / gyroscope / magnetometer reading.
///
/// Units: seconds, m/s², rad/s and µT.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImuSample {
    pub t: f64,
    pub accel: Vector3<f64>,
    pub gyro: Vector3<f64>,
    pub mag: Vector3<f64>,
}

impl ImuSample {
    pub fn new(t: f64, accel: Vector3<f64>, gyro: Vector3<f64>, mag: Vector3<f64>) -> Self {
        ImuSample {
            t,
            accel,
            gyro,
            mag,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite()
            && self.accel.iter().all(|v| v.is_finite())
            && self.gyro.iter().all(|v| v.is_finite())
            && self.mag.iter().all(|v| v.is_finite())
    }

    fn to_fields(self) -> [f64; 10] {
        [
            self.t,
            self.accel.x,
            self.accel.y,
            self.accel.z,
            self.gyro.x,
            self.gyro.y,
            self.gyro.z,
            self.mag.x,
            self.mag.y,
            self.mag.z,
        ]
    }
}

/// Checks finiteness and strict time monotonicity. `first_line` is the file line of
/// `samples[0]`, used in error messages.
pub fn validate_stream(samples: &[ImuSample], first_line: usize) -> Result<()> {
    for (i, s) in samples.iter().enumerate() {
        if !s.is_finite() {
            return Err(Error::Validation(format!(
                "non-finite value in sample at line {}",
                first_line + i
            )));
        }
        if i > 0 && s.t <= samples[i - 1].t {
            return Err(Error::Validation(format!(
                "time not strictly increasing at line {}: {} after {}",
                first_line + i,
                s.t,
                samples[i - 1].t
            )));
        }
    }
    Ok(())
}

pub fn load_imu_stream(path: impl AsRef<Path>) -> Result<Vec<ImuSample>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_imu_csv(file)
}

/// Parses the IMU CSV schema (`t,ax,ay,az,gx,gy,gz,mx,my,mz`).
pub fn read_imu_csv<R: Read>(reader: R) -> Result<Vec<ImuSample>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let headers = rdr.headers().map_err(|e| Error::parse(1, e.to_string()))?;
    if headers.iter().ne(IMU_HEADER.iter().copied()) {
        return Err(Error::parse(
            1,
            format!(
                "expected header `{}`, found `{}`",
                IMU_HEADER.join(","),
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }

    let mut samples = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| Error::parse(line, e.to_string()))?;
        if record.len() != IMU_HEADER.len() {
            return Err(Error::parse(
                line,
                format!("expected {} fields, found {}", IMU_HEADER.len(), record.len()),
            ));
        }
        let mut v = [0.0; 10];
        for (slot, (field, name)) in v.iter_mut().zip(record.iter().zip(IMU_HEADER)) {
            *slot = field
                .parse::<f64>()
                .map_err(|e| Error::parse(line, format!("column `{name}`: {e}")))?;
            if !slot.is_finite() {
                return Err(Error::parse(
                    line,
                    format!("column `{name}`: non-finite value `{field}`"),
                ));
            }
        }
        samples.push(ImuSample::new(
            v[0],
            Vector3::new(v[1], v[2], v[3]),
            Vector3::new(v[4], v[5], v[6]),
            Vector3::new(v[7], v[8], v[9]),
        ));
    }
    validate_stream(&samples, 2)?;
    Ok(samples)
}

/// Writes samples in the IMU CSV schema. Values use the shortest representation that parses
/// back to the same `f64`, so a write/read cycle is lossless.
pub fn write_imu_csv<W: Write>(writer: W, samples: &[ImuSample]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let wrap = |e: csv::Error| Error::Validation(format!("csv write failed: {e}"));
    wtr.write_record(IMU_HEADER).map_err(wrap)?;
    for s in samples {
        wtr.write_record(s.to_fields().iter().map(|v| v.to_string()))
            .map_err(wrap)?;
    }
    wtr.flush()
        .map_err(|e| Error::io("<imu csv writer>", e))?;
    Ok(())
}

pub fn save_imu_stream(path: impl AsRef<Path>, samples: &[ImuSample]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_imu_csv(std::io::BufWriter::new(file), samples)
}
