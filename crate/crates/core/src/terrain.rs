//! DSM point-cloud ingest, terrain reclassification and the uniform-grid
//! index used by the line-of-sight kernels.
//!
//! Altitudes arrive in feet and are stored in meters. Local coordinates are
//! an equirectangular projection about the cloud centroid; `z` stays the
//! absolute altitude above sea level so sites and aircraft can be placed in
//! the same frame without an extra datum.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const FEET_TO_METERS: f64 = 0.3048;
pub const METERS_PER_DEG_LAT: f64 = 111_320.0;
pub const DEFAULT_CELL_SIZE: f64 = 50.0;
pub const DEFAULT_GROUND_RADIUS: f64 = 30.0;

const CACHE_MAGIC: &[u8; 8] = b"SAM3RTC1";
const CACHE_VERSION: u32 = 1;
const EARTH_RADIUS_M: f64 = 6_371_008.8;

#[derive(Debug, Error)]
pub enum TerrainError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("empty DSM file")]
    Empty,
    #[error("no ground reference: cloud contains no class-2 points")]
    NoGroundReference,
    #[error("invalid coordinate: {0}")]
    InvalidCoordinate(String),
    #[error("grid cell size must be positive, got {0}")]
    InvalidCellSize(f64),
    #[error("cache: {0}")]
    Cache(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Longitude/latitude in degrees, altitude in meters above sea level.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub longitude: f64,
    pub latitude: f64,
    pub altitude: f64,
}

impl GeoPoint {
    pub fn new(longitude: f64, latitude: f64, altitude: f64) -> Result<Self, TerrainError> {
        let p = GeoPoint {
            longitude,
            latitude,
            altitude,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), TerrainError> {
        if !(-180.0..=180.0).contains(&self.longitude) {
            return Err(TerrainError::InvalidCoordinate(format!(
                "longitude {} outside [-180, 180]",
                self.longitude
            )));
        }
        if !(-90.0..=90.0).contains(&self.latitude) {
            return Err(TerrainError::InvalidCoordinate(format!(
                "latitude {} outside [-90, 90]",
                self.latitude
            )));
        }
        if !self.altitude.is_finite() {
            return Err(TerrainError::InvalidCoordinate(format!(
                "altitude {} is not finite",
                self.altitude
            )));
        }
        Ok(())
    }

    /// Great-circle surface distance in meters (altitude ignored).
    pub fn haversine_distance(&self, other: &GeoPoint) -> f64 {
        let (lat1, lat2) = (self.latitude.to_radians(), other.latitude.to_radians());
        let dlat = lat2 - lat1;
        let dlon = (other.longitude - self.longitude).to_radians();
        let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
        2.0 * EARTH_RADIUS_M * h.sqrt().asin()
    }
}

/// LAS classification codes that occur in the corridor datasets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerrainClass {
    Unclassified = 1,
    Ground = 2,
    LowVegetation = 3,
    MediumVegetation = 4,
    HighVegetation = 5,
    Building = 6,
}

impl TerrainClass {
    pub const ALL: [TerrainClass; 6] = [
        TerrainClass::Unclassified,
        TerrainClass::Ground,
        TerrainClass::LowVegetation,
        TerrainClass::MediumVegetation,
        TerrainClass::HighVegetation,
        TerrainClass::Building,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.iter().copied().find(|c| c.code() == code)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TerrainPoint {
    pub position: GeoPoint,
    pub class: TerrainClass,
}

/// A point in the local metric frame (meters east, meters north, meters ASL).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Point3 { x, y, z }
    }

    pub fn distance(&self, other: &Point3) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2) + (self.z - other.z).powi(2))
            .sqrt()
    }

    pub fn horizontal_distance(&self, other: &Point3) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Equirectangular projection about `origin`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalFrame {
    pub origin: GeoPoint,
    pub meters_per_deg_lat: f64,
    pub meters_per_deg_lon: f64,
}

impl LocalFrame {
    pub fn new(origin: GeoPoint) -> Self {
        LocalFrame {
            origin,
            meters_per_deg_lat: METERS_PER_DEG_LAT,
            meters_per_deg_lon: METERS_PER_DEG_LAT * origin.latitude.to_radians().cos(),
        }
    }

    /// Frame centred on the mean longitude/latitude/altitude of `points`.
    pub fn centered_on<'a>(points: impl IntoIterator<Item = &'a GeoPoint>) -> Option<Self> {
        let (mut lon, mut lat, mut alt, mut n) = (0.0, 0.0, 0.0, 0usize);
        for p in points {
            lon += p.longitude;
            lat += p.latitude;
            alt += p.altitude;
            n += 1;
        }
        if n == 0 {
            return None;
        }
        let n = n as f64;
        Some(LocalFrame::new(GeoPoint {
            longitude: lon / n,
            latitude: lat / n,
            altitude: alt / n,
        }))
    }

    pub fn to_local(&self, p: &GeoPoint) -> Point3 {
        Point3 {
            x: (p.longitude - self.origin.longitude) * self.meters_per_deg_lon,
            y: (p.latitude - self.origin.latitude) * self.meters_per_deg_lat,
            z: p.altitude,
        }
    }

    pub fn to_geo(&self, p: &Point3) -> GeoPoint {
        GeoPoint {
            longitude: self.origin.longitude + p.x / self.meters_per_deg_lon,
            latitude: self.origin.latitude + p.y / self.meters_per_deg_lat,
            altitude: p.z,
        }
    }
}

/// Uniform 2D grid of point-id buckets stored in compressed row form.
#[derive(Clone, Debug)]
pub struct GridIndex {
    min_x: f64,
    min_y: f64,
    cell_size: f64,
    cols: usize,
    rows: usize,
    cell_start: Vec<u32>,
    ids: Vec<u32>,
}

impl GridIndex {
    pub fn build(points: &[Point3], cell_size: f64) -> Result<Self, TerrainError> {
        if !(cell_size > 0.0 && cell_size.is_finite()) {
            return Err(TerrainError::InvalidCellSize(cell_size));
        }
        if points.is_empty() {
            return Ok(GridIndex {
                min_x: 0.0,
                min_y: 0.0,
                cell_size,
                cols: 0,
                rows: 0,
                cell_start: vec![0],
                ids: Vec::new(),
            });
        }
        let (mut min_x, mut min_y) = (f64::INFINITY, f64::INFINITY);
        let (mut max_x, mut max_y) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in points {
            min_x = min_x.min(p.x);
            min_y = min_y.min(p.y);
            max_x = max_x.max(p.x);
            max_y = max_y.max(p.y);
        }
        let cols = ((max_x - min_x) / cell_size).floor() as usize + 1;
        let rows = ((max_y - min_y) / cell_size).floor() as usize + 1;
        let mut grid = GridIndex {
            min_x,
            min_y,
            cell_size,
            cols,
            rows,
            cell_start: Vec::new(),
            ids: Vec::new(),
        };
        let cell_of: Vec<usize> = points
            .iter()
            .map(|p| {
                let (c, r) = grid.cell_coords(p.x, p.y);
                r * cols + c
            })
            .collect();
        let mut counts = vec![0u32; cols * rows + 1];
        for &c in &cell_of {
            counts[c + 1] += 1;
        }
        for i in 1..counts.len() {
            counts[i] += counts[i - 1];
        }
        let mut fill = counts.clone();
        let mut ids = vec![0u32; points.len()];
        for (id, &c) in cell_of.iter().enumerate() {
            ids[fill[c] as usize] = id as u32;
            fill[c] += 1;
        }
        grid.cell_start = counts;
        grid.ids = ids;
        Ok(grid)
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn num_cells(&self) -> usize {
        self.cols * self.rows
    }

    fn cell_coords(&self, x: f64, y: f64) -> (usize, usize) {
        let c = ((x - self.min_x) / self.cell_size).floor().max(0.0) as usize;
        let r = ((y - self.min_y) / self.cell_size).floor().max(0.0) as usize;
        (c.min(self.cols.saturating_sub(1)), r.min(self.rows.saturating_sub(1)))
    }

    pub fn cell(&self, col: usize, row: usize) -> &[u32] {
        let idx = row * self.cols + col;
        &self.ids[self.cell_start[idx] as usize..self.cell_start[idx + 1] as usize]
    }

    fn col_range(&self, lo: f64, hi: f64) -> Option<(usize, usize)> {
        Self::axis_range(lo, hi, self.min_x, self.cell_size, self.cols)
    }

    fn row_range(&self, lo: f64, hi: f64) -> Option<(usize, usize)> {
        Self::axis_range(lo, hi, self.min_y, self.cell_size, self.rows)
    }

    fn axis_range(lo: f64, hi: f64, min: f64, size: f64, n: usize) -> Option<(usize, usize)> {
        if n == 0 {
            return None;
        }
        let a = ((lo - min) / size).floor();
        let b = ((hi - min) / size).floor();
        if b < 0.0 || a > (n - 1) as f64 {
            return None;
        }
        Some((a.max(0.0) as usize, (b as usize).min(n - 1)))
    }

    /// Ids in every cell that may hold a point within `radius` (horizontally)
    /// of segment `a`-`b`. Over-approximates; never omits a qualifying point.
    pub fn segment_candidates(&self, a: &Point3, b: &Point3, radius: f64, out: &mut Vec<u32>) {
        let Some((c0, c1)) = self.col_range(a.x.min(b.x) - radius, a.x.max(b.x) + radius) else {
            return;
        };
        let dx = b.x - a.x;
        let (sx_min, sx_max) = (a.x.min(b.x), a.x.max(b.x));
        for col in c0..=c1 {
            let cx0 = self.min_x + col as f64 * self.cell_size;
            let cx1 = cx0 + self.cell_size;
            // x-range of segment points that can be the closest point for
            // anything inside this column
            // (non-empty because the column range was padded by `radius`)
            let lo = (cx0 - radius).max(sx_min);
            let hi = (cx1 + radius).min(sx_max).max(lo);
            let (ylo, yhi) = if dx.abs() < 1e-12 {
                (a.y.min(b.y), a.y.max(b.y))
            } else {
                let y_at = |x: f64| a.y + (x - a.x) / dx * (b.y - a.y);
                let (y1, y2) = (y_at(lo), y_at(hi));
                (y1.min(y2), y1.max(y2))
            };
            let Some((r0, r1)) = self.row_range(ylo - radius, yhi + radius) else {
                continue;
            };
            for row in r0..=r1 {
                out.extend_from_slice(self.cell(col, row));
            }
        }
    }

    /// Ids in every cell intersecting the square of half-width `radius`
    /// around (x, y).
    pub fn radius_candidates(&self, x: f64, y: f64, radius: f64, out: &mut Vec<u32>) {
        let Some((c0, c1)) = self.col_range(x - radius, x + radius) else {
            return;
        };
        let Some((r0, r1)) = self.row_range(y - radius, y + radius) else {
            return;
        };
        for row in r0..=r1 {
            for col in c0..=c1 {
                out.extend_from_slice(self.cell(col, row));
            }
        }
    }
}

/// Classified point cloud with its local projection and grid index.
/// Immutable after construction.
#[derive(Clone, Debug)]
pub struct TerrainCloud {
    points: Vec<TerrainPoint>,
    local: Vec<Point3>,
    frame: LocalFrame,
    index: GridIndex,
    ground_ids: Vec<u32>,
}

impl TerrainCloud {
    /// Builds a cloud whose frame is centred on the points' centroid.
    pub fn from_points(points: Vec<TerrainPoint>, cell_size: f64) -> Result<Self, TerrainError> {
        let frame =
            LocalFrame::centered_on(points.iter().map(|p| &p.position)).ok_or(TerrainError::Empty)?;
        Self::with_frame(points, frame, cell_size)
    }

    pub fn with_frame(
        points: Vec<TerrainPoint>,
        frame: LocalFrame,
        cell_size: f64,
    ) -> Result<Self, TerrainError> {
        let local: Vec<Point3> = points.iter().map(|p| frame.to_local(&p.position)).collect();
        let index = GridIndex::build(&local, cell_size)?;
        let ground_ids = points
            .iter()
            .enumerate()
            .filter(|(_, p)| p.class == TerrainClass::Ground)
            .map(|(i, _)| i as u32)
            .collect();
        Ok(TerrainCloud {
            points,
            local,
            frame,
            index,
            ground_ids,
        })
    }

    /// A cloud with no terrain at all (flat, unobstructed world).
    pub fn empty(frame: LocalFrame) -> Self {
        Self::with_frame(Vec::new(), frame, DEFAULT_CELL_SIZE).expect("default cell size is valid")
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[TerrainPoint] {
        &self.points
    }

    pub fn local_points(&self) -> &[Point3] {
        &self.local
    }

    pub fn frame(&self) -> &LocalFrame {
        &self.frame
    }

    pub fn index(&self) -> &GridIndex {
        &self.index
    }

    pub fn class_of(&self, id: usize) -> TerrainClass {
        self.points[id].class
    }

    /// Superset of the points whose horizontal projection lies within
    /// `radius` of segment `a`-`b`. Callers re-filter exactly.
    pub fn query_cylinder(&self, a: &Point3, b: &Point3, radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        self.index.segment_candidates(a, b, radius, &mut out);
        out.into_iter().map(|i| i as usize).collect()
    }

    /// Minimum class-2 altitude within `radius` of (x, y), falling back to the
    /// nearest class-2 point. `None` when the cloud has no ground points.
    pub fn ground_elevation_at(&self, x: f64, y: f64, radius: f64) -> Option<f64> {
        if self.ground_ids.is_empty() {
            return None;
        }
        let mut buf = Vec::new();
        self.index.radius_candidates(x, y, radius, &mut buf);
        let r2 = radius * radius;
        let local_min = buf
            .iter()
            .map(|&i| i as usize)
            .filter(|&i| self.points[i].class == TerrainClass::Ground)
            .filter(|&i| {
                let p = &self.local[i];
                (p.x - x).powi(2) + (p.y - y).powi(2) <= r2
            })
            .map(|i| self.local[i].z)
            .fold(None, |acc: Option<f64>, z| Some(acc.map_or(z, |a| a.min(z))));
        local_min.or_else(|| {
            let nearest = self
                .ground_ids
                .iter()
                .map(|&i| i as usize)
                .min_by(|&i, &j| {
                    let di = (self.local[i].x - x).powi(2) + (self.local[i].y - y).powi(2);
                    let dj = (self.local[j].x - x).powi(2) + (self.local[j].y - y).powi(2);
                    di.total_cmp(&dj).then(i.cmp(&j))
                })?;
            Some(self.local[nearest].z)
        })
    }

    /// Infers classes 3, 4 and 6 for unclassified points from their height
    /// above the local ground estimate. Height thresholds: `h < 0.5` low
    /// vegetation, `0.5 <= h <= 5` medium vegetation, `h > 5` building.
    pub fn reclassify(&self, neighborhood_radius: f64) -> Result<TerrainCloud, TerrainError> {
        if self.ground_ids.is_empty() {
            return Err(TerrainError::NoGroundReference);
        }
        let mut points = self.points.clone();
        for (i, p) in points.iter_mut().enumerate() {
            if p.class != TerrainClass::Unclassified {
                continue;
            }
            let local = &self.local[i];
            let ground = self
                .ground_elevation_at(local.x, local.y, neighborhood_radius)
                .ok_or(TerrainError::NoGroundReference)?;
            p.class = class_for_height(local.z - ground);
        }
        Ok(TerrainCloud {
            points,
            local: self.local.clone(),
            frame: self.frame,
            index: self.index.clone(),
            ground_ids: self.ground_ids.clone(),
        })
    }

    pub fn write_dsm_csv<W: Write>(&self, writer: W) -> Result<(), TerrainError> {
        write_dsm_csv(&self.points, writer)
    }

    /// Binary cache: magic, version, cell size, frame origin, then one
    /// (lon, lat, alt_m, class) record per point, all little-endian.
    pub fn write_cache<W: Write>(&self, mut w: W) -> Result<(), TerrainError> {
        w.write_all(CACHE_MAGIC)?;
        w.write_all(&CACHE_VERSION.to_le_bytes())?;
        w.write_all(&self.index.cell_size.to_le_bytes())?;
        for v in [
            self.frame.origin.longitude,
            self.frame.origin.latitude,
            self.frame.origin.altitude,
        ] {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&(self.points.len() as u64).to_le_bytes())?;
        for p in &self.points {
            for v in [p.position.longitude, p.position.latitude, p.position.altitude] {
                w.write_all(&v.to_le_bytes())?;
            }
            w.write_all(&[p.class.code()])?;
        }
        Ok(())
    }

    pub fn read_cache<R: Read>(mut r: R) -> Result<TerrainCloud, TerrainError> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != CACHE_MAGIC {
            return Err(TerrainError::Cache("bad magic".into()));
        }
        let mut u32buf = [0u8; 4];
        r.read_exact(&mut u32buf)?;
        let version = u32::from_le_bytes(u32buf);
        if version != CACHE_VERSION {
            return Err(TerrainError::Cache(format!("unsupported version {version}")));
        }
        let mut f = [0u8; 8];
        let mut read_f64 = |r: &mut R| -> Result<f64, TerrainError> {
            r.read_exact(&mut f)?;
            Ok(f64::from_le_bytes(f))
        };
        let cell_size = read_f64(&mut r)?;
        let origin = GeoPoint::new(read_f64(&mut r)?, read_f64(&mut r)?, read_f64(&mut r)?)?;
        let mut u64buf = [0u8; 8];
        r.read_exact(&mut u64buf)?;
        let n = u64::from_le_bytes(u64buf) as usize;
        let mut points = Vec::with_capacity(n.min(1 << 24));
        for _ in 0..n {
            let position = GeoPoint::new(read_f64(&mut r)?, read_f64(&mut r)?, read_f64(&mut r)?)?;
            let mut code = [0u8; 1];
            r.read_exact(&mut code)?;
            let class = TerrainClass::from_code(code[0])
                .ok_or_else(|| TerrainError::Cache(format!("unknown class {}", code[0])))?;
            points.push(TerrainPoint { position, class });
        }
        TerrainCloud::with_frame(points, LocalFrame::new(origin), cell_size)
    }
}

pub fn class_for_height(h: f64) -> TerrainClass {
    if h < 0.5 {
        TerrainClass::LowVegetation
    } else if h <= 5.0 {
        TerrainClass::MediumVegetation
    } else {
        TerrainClass::Building
    }
}

/// Reads `Longitude,Latitude,Altitude_ft,Classification` rows.
pub fn parse_dsm_csv<R: Read>(reader: R) -> Result<Vec<TerrainPoint>, TerrainError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let mut records = rdr.records();
    let header = match records.next() {
        None => return Err(TerrainError::Empty),
        Some(h) => h?,
    };
    let expected = ["longitude", "latitude", "altitude", "classification"];
    let header_ok = header.len() == 4
        && header
            .iter()
            .zip(expected)
            .all(|(h, e)| h.to_ascii_lowercase().starts_with(e));
    if !header_ok {
        return Err(TerrainError::Parse {
            line: 1,
            message: "expected header Longitude,Latitude,Altitude_ft,Classification".into(),
        });
    }
    let mut points = Vec::new();
    for (i, rec) in records.enumerate() {
        let line = i + 2;
        let rec = rec?;
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        if rec.len() != 4 {
            return Err(TerrainError::Parse {
                line,
                message: format!("expected 4 fields, found {}", rec.len()),
            });
        }
        let num = |idx: usize, what: &str| -> Result<f64, TerrainError> {
            rec[idx].parse::<f64>().map_err(|_| TerrainError::Parse {
                line,
                message: format!("{what} '{}' is not a number", &rec[idx]),
            })
        };
        let (lon, lat, alt_ft) = (num(0, "longitude")?, num(1, "latitude")?, num(2, "altitude")?);
        let code: u8 = rec[3].parse().map_err(|_| TerrainError::Parse {
            line,
            message: format!("classification '{}' is not an integer code", &rec[3]),
        })?;
        let class = TerrainClass::from_code(code).ok_or_else(|| TerrainError::Parse {
            line,
            message: format!("unknown classification code {code}"),
        })?;
        let position = GeoPoint::new(lon, lat, alt_ft * FEET_TO_METERS).map_err(|e| {
            TerrainError::Parse {
                line,
                message: e.to_string(),
            }
        })?;
        points.push(TerrainPoint { position, class });
    }
    if points.is_empty() {
        return Err(TerrainError::Empty);
    }
    Ok(points)
}

pub fn write_dsm_csv<W: Write>(points: &[TerrainPoint], writer: W) -> Result<(), TerrainError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["Longitude", "Latitude", "Altitude_ft", "Classification"])?;
    for p in points {
        w.write_record([
            format!("{:.10}", p.position.longitude),
            format!("{:.10}", p.position.latitude),
            format!("{:.6}", p.position.altitude / FEET_TO_METERS),
            p.class.code().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Parses a DSM CSV and builds the indexed cloud.
pub fn load_dsm<R: Read>(reader: R, cell_size: f64) -> Result<TerrainCloud, TerrainError> {
    TerrainCloud::from_points(parse_dsm_csv(reader)?, cell_size)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "Longitude,Latitude,Altitude_ft,Classification
-81.02885608, 40.06759534, 1193.69, 1
-81.02883988, 40.06836594, 1191.92, 2
-81.02876972, 40.06903201, 1215.71, 2
-81.02863442, 40.07030448, 1271.38, 5
";

    fn pt(lon: f64, lat: f64, alt_m: f64, class: TerrainClass) -> TerrainPoint {
        TerrainPoint {
            position: GeoPoint::new(lon, lat, alt_m).unwrap(),
            class,
        }
    }

    #[test]
    fn parses_sample_rows_and_converts_feet() {
        let pts = parse_dsm_csv(SAMPLE.as_bytes()).unwrap();
        assert_eq!(pts.len(), 4);
        assert!((pts[0].position.altitude - 363.836_712).abs() < 1e-9);
        assert_eq!(pts[0].class, TerrainClass::Unclassified);
        assert_eq!(pts[1].class, TerrainClass::Ground);
        assert_eq!(pts[3].class, TerrainClass::HighVegetation);
    }

    #[test]
    fn parse_errors_name_the_line() {
        let text = "Longitude,Latitude,Altitude_ft,Classification\n-81,40,100,2\na,b,c,d\n";
        match parse_dsm_csv(text.as_bytes()) {
            Err(TerrainError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let bad_class = "Longitude,Latitude,Altitude_ft,Classification\n-81,40,100,9\n";
        assert!(matches!(
            parse_dsm_csv(bad_class.as_bytes()),
            Err(TerrainError::Parse { line: 2, .. })
        ));
        assert!(matches!(parse_dsm_csv("".as_bytes()), Err(TerrainError::Empty)));
        assert!(matches!(
            parse_dsm_csv("Longitude,Latitude,Altitude_ft,Classification\n".as_bytes()),
            Err(TerrainError::Empty)
        ));
        assert!(matches!(
            parse_dsm_csv("1,2,3,4\n".as_bytes()),
            Err(TerrainError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn reclassifies_by_height_above_ground() {
        let g = 300.0;
        let pts = vec![
            pt(-81.0, 40.0, g, TerrainClass::Ground),
            pt(-81.00001, 40.0, g + 0.3, TerrainClass::Unclassified),
            pt(-81.0, 40.00001, g + 7.0, TerrainClass::Unclassified),
            pt(-81.00001, 40.00001, g + 2.0, TerrainClass::Unclassified),
            pt(-81.00002, 40.0, g + 9.0, TerrainClass::HighVegetation),
            pt(-81.0, 40.00002, g + 5.0, TerrainClass::Unclassified),
            pt(-81.00002, 40.00002, g + 0.5, TerrainClass::Unclassified),
        ];
        let cloud = TerrainCloud::from_points(pts, DEFAULT_CELL_SIZE).unwrap();
        let out = cloud.reclassify(DEFAULT_GROUND_RADIUS).unwrap();
        let classes: Vec<_> = out.points().iter().map(|p| p.class).collect();
        assert_eq!(
            classes,
            vec![
                TerrainClass::Ground,
                TerrainClass::LowVegetation,
                TerrainClass::Building,
                TerrainClass::MediumVegetation,
                TerrainClass::HighVegetation,
                TerrainClass::MediumVegetation,
                TerrainClass::MediumVegetation,
            ]
        );
    }

    #[test]
    fn reclassify_falls_back_to_nearest_ground() {
        let pts = vec![
            pt(-81.0, 40.0, 100.0, TerrainClass::Ground),
            pt(-81.01, 40.0, 120.0, TerrainClass::Unclassified),
        ];
        let cloud = TerrainCloud::from_points(pts, DEFAULT_CELL_SIZE).unwrap();
        let out = cloud.reclassify(30.0).unwrap();
        assert_eq!(out.points()[1].class, TerrainClass::Building);
    }

    #[test]
    fn reclassify_requires_ground() {
        let pts = vec![pt(-81.0, 40.0, 100.0, TerrainClass::Unclassified)];
        let cloud = TerrainCloud::from_points(pts, DEFAULT_CELL_SIZE).unwrap();
        assert!(matches!(cloud.reclassify(30.0), Err(TerrainError::NoGroundReference)));
    }

    #[test]
    fn cylinder_query_on_empty_and_single_point() {
        let frame = LocalFrame::new(GeoPoint::new(-81.0, 40.0, 0.0).unwrap());
        let empty = TerrainCloud::empty(frame);
        let a = Point3::new(0.0, 0.0, 0.0);
        let b = Point3::new(100.0, 0.0, 0.0);
        assert!(empty.query_cylinder(&a, &b, 5.0).is_empty());

        let mid = frame.to_geo(&Point3::new(50.0, 0.0, 10.0));
        let one = TerrainCloud::with_frame(
            vec![TerrainPoint {
                position: mid,
                class: TerrainClass::Ground,
            }],
            frame,
            DEFAULT_CELL_SIZE,
        )
        .unwrap();
        assert_eq!(one.query_cylinder(&a, &b, 5.0), vec![0]);
    }

    #[test]
    fn cache_round_trip() {
        let cloud = load_dsm(SAMPLE.as_bytes(), 25.0).unwrap();
        let mut buf = Vec::new();
        cloud.write_cache(&mut buf).unwrap();
        assert_eq!(&buf[..8], b"SAM3RTC1");
        let back = TerrainCloud::read_cache(buf.as_slice()).unwrap();
        assert_eq!(back.points(), cloud.points());
        assert_eq!(back.frame(), cloud.frame());
        assert_eq!(back.index().cell_size(), 25.0);
        buf[0] = b'X';
        assert!(TerrainCloud::read_cache(buf.as_slice()).is_err());
    }

    #[test]
    fn invalid_geo_points_rejected() {
        assert!(GeoPoint::new(181.0, 0.0, 0.0).is_err());
        assert!(GeoPoint::new(0.0, -91.0, 0.0).is_err());
        assert!(GeoPoint::new(0.0, 0.0, f64::NAN).is_err());
    }
}
