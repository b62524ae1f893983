use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::ops::{Add, Sub};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean Earth radius used by the equirectangular projection, meters.
const EARTH_RADIUS_M: f64 = 6_371_008.8;

/// Planar position in a local East-North frame, meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Position2D {
    pub x: f64,
    pub y: f64,
}

impl Position2D {
    pub const ORIGIN: Position2D = Position2D { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Position2D { x, y }
    }

    pub fn distance(&self, other: &Position2D) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn scale(&self, s: f64) -> Position2D {
        Position2D::new(self.x * s, self.y * s)
    }
}

impl Add for Position2D {
    type Output = Position2D;
    fn add(self, r: Position2D) -> Position2D {
        Position2D::new(self.x + r.x, self.y + r.y)
    }
}

impl Sub for Position2D {
    type Output = Position2D;
    fn sub(self, r: Position2D) -> Position2D {
        Position2D::new(self.x - r.x, self.y - r.y)
    }
}

/// Geodetic anchor of the local frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoOrigin {
    pub lat: f64,
    pub lon: f64,
}

impl GeoOrigin {
    /// Equirectangular projection about the origin latitude. Adequate at campus scale
    /// (a few km); it is not a geodesic.
    pub fn to_local(&self, lat: f64, lon: f64) -> Position2D {
        let lat0 = self.lat.to_radians();
        Position2D::new(
            EARTH_RADIUS_M * (lon - self.lon).to_radians() * lat0.cos(),
            EARTH_RADIUS_M * (lat - self.lat).to_radians(),
        )
    }
}

impl std::str::FromStr for GeoOrigin {
    type Err = Error;

    /// Parses `lat,lon` in decimal degrees.
    fn from_str(s: &str) -> Result<Self> {
        let (lat, lon) = s
            .split_once(',')
            .ok_or_else(|| Error::Config(format!("origin `{s}` is not `lat,lon`")))?;
        let parse = |v: &str| {
            v.trim()
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| Error::Config(format!("origin `{s}` is not `lat,lon`")))
        };
        let origin = GeoOrigin {
            lat: parse(lat)?,
            lon: parse(lon)?,
        };
        if origin.lat.abs() > 90.0 || origin.lon.abs() > 180.0 {
            return Err(Error::Config(format!("origin `{s}` out of range")));
        }
        Ok(origin)
    }
}

/// A geo-tagged reference image, reduced to its id and position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Beacon {
    pub id: String,
    pub position: Position2D,
    pub label: Option<String>,
}

impl Beacon {
    pub fn new(id: impl Into<String>, position: Position2D) -> Self {
        Beacon {
            id: id.into(),
            position,
            label: None,
        }
    }
}

/// Beacon database with unique ids.
#[derive(Debug, Clone, Default)]
pub struct BeaconDb {
    beacons: Vec<Beacon>,
    index: HashMap<String, usize>,
    min_spacing: Option<f64>,
}

impl BeaconDb {
    pub fn new(beacons: Vec<Beacon>) -> Result<Self> {
        let mut index = HashMap::with_capacity(beacons.len());
        for (i, b) in beacons.iter().enumerate() {
            if !b.position.is_finite() {
                return Err(Error::Validation(format!(
                    "beacon `{}` has a non-finite position",
                    b.id
                )));
            }
            if index.insert(b.id.clone(), i).is_some() {
                return Err(Error::Validation(format!("duplicate beacon id `{}`", b.id)));
            }
        }
        let min_spacing = min_nearest_neighbor_distance(&beacons);
        Ok(BeaconDb {
            beacons,
            index,
            min_spacing,
        })
    }

    pub fn get(&self, id: &str) -> Option<&Beacon> {
        self.index.get(id).map(|&i| &self.beacons[i])
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn len(&self) -> usize {
        self.beacons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beacons.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Beacon> {
        self.beacons.iter()
    }

    pub fn beacons(&self) -> &[Beacon] {
        &self.beacons
    }

    /// Smallest nearest-neighbor distance; `None` with fewer than two beacons.
    pub fn min_spacing(&self) -> Option<f64> {
        self.min_spacing
    }
}

fn min_nearest_neighbor_distance(beacons: &[Beacon]) -> Option<f64> {
    let mut best: Option<f64> = None;
    for (i, a) in beacons.iter().enumerate() {
        for b in &beacons[i + 1..] {
            let d = a.position.distance(&b.position);
            best = Some(best.map_or(d, |m| m.min(d)));
        }
    }
    best
}

pub fn load_beacons(path: impl AsRef<Path>, origin: Option<GeoOrigin>) -> Result<BeaconDb> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_beacons_csv(file, origin)
}

enum Layout {
    Local,
    Geo,
}

/// Parses `id,x,y[,label]` (local frame) or `id,lat,lon[,label]` (requires an origin).
pub fn read_beacons_csv<R: Read>(reader: R, origin: Option<GeoOrigin>) -> Result<BeaconDb> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::parse(1, e.to_string()))?;
    let cols: Vec<&str> = headers.iter().collect();
    let has_label = cols.len() == 4 && cols[3] == "label";
    let layout = match &cols[..cols.len().min(3)] {
        ["id", "x", "y"] if cols.len() == 3 || has_label => Layout::Local,
        ["id", "lat", "lon"] if cols.len() == 3 || has_label => Layout::Geo,
        _ => {
            return Err(Error::parse(
                1,
                format!(
                    "expected header `id,x,y[,label]` or `id,lat,lon[,label]`, found `{}`",
                    cols.join(",")
                ),
            ))
        }
    };
    let origin = match (&layout, origin) {
        (Layout::Geo, None) => {
            return Err(Error::Config(
                "beacon file uses lat/lon; an origin is required".into(),
            ))
        }
        (_, o) => o,
    };

    let mut beacons = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| Error::parse(line, e.to_string()))?;
        let expected = if has_label { 3..=4 } else { 3..=3 };
        if !expected.contains(&record.len()) {
            return Err(Error::parse(
                line,
                format!("unexpected field count {}", record.len()),
            ));
        }
        let id = record[0].to_string();
        if id.is_empty() {
            return Err(Error::parse(line, "empty beacon id"));
        }
        let num = |k: usize| -> Result<f64> {
            record[k]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::parse(line, format!("bad number `{}`", &record[k])))
        };
        let (a, b) = (num(1)?, num(2)?);
        let position = match layout {
            Layout::Local => Position2D::new(a, b),
            Layout::Geo => origin.expect("checked above").to_local(a, b),
        };
        let label = record
            .get(3)
            .filter(|s| !s.is_empty())
            .map(str::to_string);
        beacons.push(Beacon {
            id,
            position,
            label,
        });
    }
    BeaconDb::new(beacons)
}

/// Writes the local-frame beacon CSV.
pub fn write_beacons_csv<W: Write>(writer: W, db: &BeaconDb) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let wrap = |e: csv::Error| Error::Validation(format!("csv write failed: {e}"));
    wtr.write_record(["id", "x", "y", "label"]).map_err(wrap)?;
    for b in db.iter() {
        wtr.write_record([
            b.id.clone(),
            b.position.x.to_string(),
            b.position.y.to_string(),
            b.label.clone().unwrap_or_default(),
        ])
        .map_err(wrap)?;
    }
    wtr.flush().map_err(|e| Error::io("<beacon csv writer>", e))?;
    Ok(())
}

pub fn save_beacons(path: impl AsRef<Path>, db: &BeaconDb) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_beacons_csv(std::io::BufWriter::new(file), db)
}
