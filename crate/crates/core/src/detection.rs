//! Detection-probability chain and the (site, sensor, aircraft, step)
//! tensor consumed by the planners.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::los::{
    acoustic_los, range_check, sightline_obstruction, AcousticParams, LosError, LosParams,
    RangeDecayParams,
};
use crate::schedule::{CorridorPath, FlightSchedule};
use crate::terrain::{GeoPoint, Point3, TerrainCloud, DEFAULT_GROUND_RADIUS};

pub const DEFAULT_EPSILON: f64 = 1e-6;
pub const DEFAULT_LINK_FAILURE_RATE: f64 = 1e-5;
pub const DEFAULT_SERVER_FAILURE_RATE: f64 = 1e-5;
pub const DEFAULT_MAST_HEIGHT: f64 = 10.0;
pub const DEFAULT_SITE_CAPACITY: u32 = 6;
pub const DEFAULT_SITE_SPACING: f64 = 500.0;

const BUNDLED_CATALOG: &str = include_str!("../data/sensors.json");

#[derive(Debug, Error)]
pub enum DetectionError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid sensor '{id}': {message}")]
    InvalidSensor { id: String, message: String },
    #[error("invalid site {id}: {message}")]
    InvalidSite { id: usize, message: String },
    #[error("invalid tensor: {0}")]
    InvalidTensor(String),
    #[error("catalog: {0}")]
    Catalog(#[from] serde_json::Error),
    #[error(transparent)]
    Los(#[from] LosError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LosModel {
    Geometric,
    Acoustic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensorSpec {
    pub id: String,
    #[serde(default)]
    pub model: String,
    pub unit_cost: f64,
    pub set_size: u32,
    /// Metres.
    pub range: f64,
    /// Failures per hour.
    pub failure_rate: f64,
    pub vert: u32,
    pub max_sets: u32,
    /// Informational only; `None` means unlimited.
    pub tracking_capacity: Option<u32>,
    /// Azimuth x elevation in degrees. Informational only.
    pub fov_deg: Option<[f64; 2]>,
    pub los_model: LosModel,
}

impl SensorSpec {
    pub fn validate(&self) -> Result<(), DetectionError> {
        let fail = |message: &str| {
            Err(DetectionError::InvalidSensor {
                id: self.id.clone(),
                message: message.to_string(),
            })
        };
        if !(self.unit_cost >= 0.0) {
            return fail("unit_cost must be >= 0");
        }
        if self.set_size < 1 {
            return fail("set_size must be >= 1");
        }
        if !(self.range > 0.0) || !self.range.is_finite() {
            return fail("range must be positive");
        }
        if !(self.failure_rate >= 0.0) {
            return fail("failure_rate must be >= 0");
        }
        if self.vert < 1 {
            return fail("vert must be >= 1");
        }
        if self.max_sets < 1 {
            return fail("max_sets must be >= 1");
        }
        Ok(())
    }

    /// Cost of one set, `c_s * C_s`.
    pub fn set_cost(&self) -> f64 {
        self.unit_cost * self.set_size as f64
    }
}

/// On-disk catalog row; ranges are in kilometres.
#[derive(Clone, Debug, Serialize, Deserialize)]
struct CatalogEntry {
    id: String,
    #[serde(default)]
    model: String,
    unit_cost: f64,
    #[serde(default = "one")]
    set_size: u32,
    range_km: f64,
    failure_rate: f64,
    #[serde(default = "one")]
    vert: u32,
    #[serde(default = "default_max_sets")]
    max_sets: u32,
    #[serde(default)]
    tracking_capacity: Option<u32>,
    #[serde(default)]
    fov_deg: Option<[f64; 2]>,
    #[serde(default = "geometric")]
    los_model: LosModel,
}

fn one() -> u32 {
    1
}

fn default_max_sets() -> u32 {
    3
}

fn geometric() -> LosModel {
    LosModel::Geometric
}

pub fn parse_catalog(json: &str) -> Result<Vec<SensorSpec>, DetectionError> {
    let entries: Vec<CatalogEntry> = serde_json::from_str(json)?;
    let specs: Vec<SensorSpec> = entries
        .into_iter()
        .map(|e| SensorSpec {
            id: e.id,
            model: e.model,
            unit_cost: e.unit_cost,
            set_size: e.set_size,
            range: e.range_km * 1000.0,
            failure_rate: e.failure_rate,
            vert: e.vert,
            max_sets: e.max_sets,
            tracking_capacity: e.tracking_capacity,
            fov_deg: e.fov_deg,
            los_model: e.los_model,
        })
        .collect();
    for (i, s) in specs.iter().enumerate() {
        s.validate()?;
        if specs[..i].iter().any(|o| o.id == s.id) {
            return Err(DetectionError::InvalidSensor {
                id: s.id.clone(),
                message: "duplicate id".into(),
            });
        }
    }
    Ok(specs)
}

pub fn catalog_to_json(specs: &[SensorSpec]) -> String {
    let entries: Vec<CatalogEntry> = specs
        .iter()
        .map(|s| CatalogEntry {
            id: s.id.clone(),
            model: s.model.clone(),
            unit_cost: s.unit_cost,
            set_size: s.set_size,
            range_km: s.range / 1000.0,
            failure_rate: s.failure_rate,
            vert: s.vert,
            max_sets: s.max_sets,
            tracking_capacity: s.tracking_capacity,
            fov_deg: s.fov_deg,
            los_model: s.los_model,
        })
        .collect();
    serde_json::to_string_pretty(&entries).expect("catalog serialises")
}

/// The six primary sensor types shipped with the crate. Span ranges use the
/// lower bound (radar small-UAV range, optical 1.4 km).
pub fn bundled_catalog() -> Vec<SensorSpec> {
    parse_catalog(BUNDLED_CATALOG).expect("bundled catalog is valid")
}

/// Edge width and decay shape applied to every sensor, with the edge width
/// expressed as a fraction of the sensor range.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RangeDecaySettings {
    pub edge_fraction: f64,
    pub a: f64,
    pub b: f64,
}

impl Default for RangeDecaySettings {
    fn default() -> Self {
        RangeDecaySettings {
            edge_fraction: 0.05,
            a: 0.01,
            b: 1.0,
        }
    }
}

impl RangeDecaySettings {
    pub fn for_sensor(&self, sensor: &SensorSpec) -> Result<RangeDecayParams, LosError> {
        RangeDecayParams::new(sensor.range, self.edge_fraction * sensor.range, self.a, self.b)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetworkReliabilityParams {
    /// Link failures per hour.
    pub link_failure_rate: f64,
    /// Server failures per hour.
    pub server_failure_rate: f64,
    pub epsilon: f64,
}

impl Default for NetworkReliabilityParams {
    fn default() -> Self {
        NetworkReliabilityParams {
            link_failure_rate: DEFAULT_LINK_FAILURE_RATE,
            server_failure_rate: DEFAULT_SERVER_FAILURE_RATE,
            epsilon: DEFAULT_EPSILON,
        }
    }
}

impl NetworkReliabilityParams {
    pub fn validate(&self) -> Result<(), DetectionError> {
        if !(self.link_failure_rate >= 0.0) || !(self.server_failure_rate >= 0.0) {
            return Err(DetectionError::Domain("failure rates must be >= 0".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(DetectionError::Domain("epsilon must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// Component age in hours at a step; age is zero at the schedule start.
pub fn step_to_hours(step: usize, step_seconds: u32) -> f64 {
    step as f64 * step_seconds as f64 / 3600.0
}

pub fn component_reliability(failure_rate: f64, hours: f64) -> Result<f64, DetectionError> {
    if !(failure_rate >= 0.0) {
        return Err(DetectionError::Domain(format!("failure rate {failure_rate} < 0")));
    }
    if !(hours >= 0.0) {
        return Err(DetectionError::Domain(format!("time {hours} h < 0")));
    }
    Ok((-failure_rate * hours).exp())
}

pub fn intrinsic_detection(reliability: f64, range_factor: f64, los_factor: f64) -> f64 {
    reliability * range_factor * los_factor
}

pub fn end_to_end(p: f64, link_reliability: f64) -> f64 {
    p * link_reliability
}

pub fn miss_probability(q: f64, epsilon: f64) -> f64 {
    (1.0 - q).max(epsilon)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateSite {
    pub id: usize,
    /// Ground position; the altitude is the terrain elevation (m).
    pub position: GeoPoint,
    pub mast_height: f64,
    pub capacity: u32,
}

impl CandidateSite {
    pub fn validate(&self) -> Result<(), DetectionError> {
        if self.capacity < 1 {
            return Err(DetectionError::InvalidSite {
                id: self.id,
                message: "capacity must be >= 1".into(),
            });
        }
        if !(self.mast_height >= 0.0) {
            return Err(DetectionError::InvalidSite {
                id: self.id,
                message: "mast_height must be >= 0".into(),
            });
        }
        Ok(())
    }

    /// Sensor position (top of the mast) in the cloud's local frame.
    pub fn sensor_point(&self, cloud: &TerrainCloud) -> Point3 {
        let mut p = cloud.frame().to_local(&self.position);
        p.z += self.mast_height;
        p
    }
}

/// Sites every `spacing` metres along the corridor (both ends included),
/// each placed on the local ground elevation.
pub fn candidate_sites_along(
    corridor: &CorridorPath,
    cloud: &TerrainCloud,
    spacing: f64,
    mast_height: f64,
    capacity: u32,
) -> Result<Vec<CandidateSite>, DetectionError> {
    if !(spacing > 0.0) {
        return Err(DetectionError::Domain("site spacing must be positive".into()));
    }
    let sites: Vec<CandidateSite> = corridor
        .sample(spacing)
        .into_iter()
        .enumerate()
        .map(|(id, s)| {
            let g = corridor.point_at(s, 0.0);
            let local = cloud.frame().to_local(&g);
            let ground = cloud
                .ground_elevation_at(local.x, local.y, DEFAULT_GROUND_RADIUS)
                .unwrap_or(0.0);
            CandidateSite {
                id,
                position: GeoPoint {
                    altitude: ground,
                    ..g
                },
                mast_height,
                capacity,
            }
        })
        .collect();
    for s in &sites {
        s.validate()?;
    }
    Ok(sites)
}

/// Settings for tensor assembly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectionParams {
    pub los: LosParams,
    pub range_decay: RangeDecaySettings,
    pub acoustic: AcousticParams,
    pub reliability: NetworkReliabilityParams,
    /// Treat schedule altitudes as height above the local ground.
    pub altitude_above_ground: bool,
}

impl Default for DetectionParams {
    fn default() -> Self {
        DetectionParams {
            los: LosParams::default(),
            range_decay: RangeDecaySettings::default(),
            acoustic: AcousticParams::default(),
            reliability: NetworkReliabilityParams::default(),
            altitude_above_ground: true,
        }
    }
}

/// Probabilities indexed by (site i, sensor s, aircraft k, step t).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TensorRepr")]
pub struct DetectionTensor {
    num_sites: usize,
    num_sensors: usize,
    num_aircraft: usize,
    num_steps: usize,
    epsilon: f64,
    p: Vec<f64>,
    q: Vec<f64>,
    m: Vec<f64>,
    /// `present[k * T + t]`.
    present: Vec<bool>,
    rho_l: Vec<f64>,
    rho_u: Vec<f64>,
    #[serde(skip)]
    alpha: Vec<Vec<u32>>,
}

#[derive(Deserialize)]
struct TensorRepr {
    num_sites: usize,
    num_sensors: usize,
    num_aircraft: usize,
    num_steps: usize,
    epsilon: f64,
    p: Vec<f64>,
    q: Vec<f64>,
    m: Vec<f64>,
    present: Vec<bool>,
    rho_l: Vec<f64>,
    rho_u: Vec<f64>,
}

impl TryFrom<TensorRepr> for DetectionTensor {
    type Error = DetectionError;

    fn try_from(r: TensorRepr) -> Result<Self, DetectionError> {
        let (ni, ns, nk, nt) = (r.num_sites, r.num_sensors, r.num_aircraft, r.num_steps);
        let n = ni * ns * nk * nt;
        if r.p.len() != n || r.q.len() != n || r.m.len() != n || r.present.len() != nk * nt {
            return Err(DetectionError::InvalidTensor("array sizes do not match dims".into()));
        }
        if r.rho_l.len() != nt || r.rho_u.len() != nt {
            return Err(DetectionError::InvalidTensor("reliability vectors must have |T| entries".into()));
        }
        let mut t = DetectionTensor {
            num_sites: ni,
            num_sensors: ns,
            num_aircraft: nk,
            num_steps: nt,
            epsilon: r.epsilon,
            p: r.p,
            q: r.q,
            m: r.m,
            present: r.present,
            rho_l: r.rho_l,
            rho_u: r.rho_u,
            alpha: Vec::new(),
        };
        t.rebuild_alpha();
        Ok(t)
    }
}

impl DetectionTensor {
    /// Assembles a tensor from intrinsic probabilities `p` (flat, in
    /// (i, s, k, t) order) and per-step link and server reliabilities.
    /// Absent aircraft get `p = q = 0` whatever was supplied.
    pub fn from_parts(
        dims: (usize, usize, usize, usize),
        mut p: Vec<f64>,
        present: Vec<bool>,
        rho_l: Vec<f64>,
        rho_u: Vec<f64>,
        epsilon: f64,
    ) -> Result<Self, DetectionError> {
        let (ni, ns, nk, nt) = dims;
        if p.len() != ni * ns * nk * nt || present.len() != nk * nt {
            return Err(DetectionError::InvalidTensor("array sizes do not match dims".into()));
        }
        if rho_l.len() != nt || rho_u.len() != nt {
            return Err(DetectionError::InvalidTensor("reliability vectors must have |T| entries".into()));
        }
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(DetectionError::Domain("epsilon must lie in (0, 1)".into()));
        }
        let unit = |v: &f64| (0.0..=1.0).contains(v);
        if !p.iter().all(unit) || !rho_l.iter().all(unit) || !rho_u.iter().all(unit) {
            return Err(DetectionError::InvalidTensor("probabilities must lie in [0, 1]".into()));
        }
        for (idx, v) in p.iter_mut().enumerate() {
            let kt = idx % (nk * nt);
            if !present[kt] {
                *v = 0.0;
            }
        }
        let q: Vec<f64> = p
            .iter()
            .enumerate()
            .map(|(idx, &v)| end_to_end(v, rho_l[idx % nt]))
            .collect();
        let m = q.iter().map(|&v| miss_probability(v, epsilon)).collect();
        let mut tensor = DetectionTensor {
            num_sites: ni,
            num_sensors: ns,
            num_aircraft: nk,
            num_steps: nt,
            epsilon,
            p,
            q,
            m,
            present,
            rho_l,
            rho_u,
            alpha: Vec::new(),
        };
        tensor.rebuild_alpha();
        Ok(tensor)
    }

    fn rebuild_alpha(&mut self) {
        let (ni, ns, nk, nt) = self.dims();
        let mut alpha = vec![Vec::new(); nt * ni * ns];
        for i in 0..ni {
            for s in 0..ns {
                for k in 0..nk {
                    for t in 0..nt {
                        if self.q[self.idx(i, s, k, t)] > 0.0 {
                            alpha[(t * ni + i) * ns + s].push(k as u32);
                        }
                    }
                }
            }
        }
        self.alpha = alpha;
    }

    pub fn from_json(json: &str) -> Result<Self, DetectionError> {
        Ok(serde_json::from_str(json)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("tensor serialises")
    }

    /// (|sites|, |sensors|, |aircraft|, |steps|).
    pub fn dims(&self) -> (usize, usize, usize, usize) {
        (self.num_sites, self.num_sensors, self.num_aircraft, self.num_steps)
    }

    #[inline]
    fn idx(&self, i: usize, s: usize, k: usize, t: usize) -> usize {
        ((i * self.num_sensors + s) * self.num_aircraft + k) * self.num_steps + t
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn p(&self, i: usize, s: usize, k: usize, t: usize) -> f64 {
        self.p[self.idx(i, s, k, t)]
    }

    pub fn q(&self, i: usize, s: usize, k: usize, t: usize) -> f64 {
        self.q[self.idx(i, s, k, t)]
    }

    pub fn m(&self, i: usize, s: usize, k: usize, t: usize) -> f64 {
        self.m[self.idx(i, s, k, t)]
    }

    /// Aircraft detected with positive probability by sensor `s` at site `i`
    /// at step `t`, in increasing order.
    pub fn alpha(&self, t: usize, i: usize, s: usize) -> &[u32] {
        &self.alpha[(t * self.num_sites + i) * self.num_sensors + s]
    }

    pub fn present(&self, k: usize, t: usize) -> bool {
        self.present[k * self.num_steps + t]
    }

    pub fn any_present(&self, t: usize) -> bool {
        (0..self.num_aircraft).any(|k| self.present(k, t))
    }

    pub fn rho_l(&self, t: usize) -> f64 {
        self.rho_l[t]
    }

    pub fn rho_u(&self, t: usize) -> f64 {
        self.rho_u[t]
    }
}

/// Evaluates the detection chain for every (site, sensor, aircraft, step).
/// Sites and schedule positions are projected into the cloud's frame.
pub fn build_tensor(
    sites: &[CandidateSite],
    catalog: &[SensorSpec],
    schedule: &FlightSchedule,
    cloud: &TerrainCloud,
    params: &DetectionParams,
) -> Result<DetectionTensor, DetectionError> {
    params.reliability.validate()?;
    params.los.validate()?;
    if catalog.iter().any(|s| s.los_model == LosModel::Acoustic) {
        params.acoustic.validate()?;
    }
    for s in catalog {
        s.validate()?;
    }
    for s in sites {
        s.validate()?;
    }
    let decay: Vec<RangeDecayParams> = catalog
        .iter()
        .map(|s| params.range_decay.for_sensor(s))
        .collect::<Result<_, _>>()?;

    let (ni, ns, nk, nt) = (sites.len(), catalog.len(), schedule.num_aircraft(), schedule.num_steps());
    let hours: Vec<f64> = (0..nt).map(|t| step_to_hours(t, schedule.step_seconds)).collect();
    let rel = &params.reliability;
    let rho_l: Vec<f64> = hours.iter().map(|&h| (-rel.link_failure_rate * h).exp()).collect();
    let rho_u: Vec<f64> = hours.iter().map(|&h| (-rel.server_failure_rate * h).exp()).collect();
    let rho_s: Vec<Vec<f64>> = catalog
        .iter()
        .map(|s| hours.iter().map(|&h| (-s.failure_rate * h).exp()).collect())
        .collect();

    let mut present = vec![false; nk * nt];
    let mut targets = vec![Point3::new(0.0, 0.0, 0.0); nk * nt];
    for k in 0..nk {
        for t in 0..nt {
            if let Some(g) = schedule.position(k, t) {
                let mut p = cloud.frame().to_local(g);
                if params.altitude_above_ground {
                    p.z = cloud
                        .ground_elevation_at(p.x, p.y, DEFAULT_GROUND_RADIUS)
                        .unwrap_or(0.0)
                        + g.altitude;
                }
                present[k * nt + t] = true;
                targets[k * nt + t] = p;
            }
        }
    }

    let blocks: Vec<Result<Vec<f64>, DetectionError>> = sites
        .par_iter()
        .map(|site| {
            let sensor = site.sensor_point(cloud);
            let mut block = vec![0.0; ns * nk * nt];
            let mut chi = vec![0.0; ns];
            for k in 0..nk {
                for t in 0..nt {
                    if !present[k * nt + t] {
                        continue;
                    }
                    let target = &targets[k * nt + t];
                    for (s, d) in decay.iter().enumerate() {
                        chi[s] = range_check(&sensor, target, d);
                    }
                    let needs = |model: LosModel| {
                        catalog
                            .iter()
                            .zip(&chi)
                            .any(|(spec, &c)| spec.los_model == model && c > 0.0)
                    };
                    let geo = if needs(LosModel::Geometric) {
                        sightline_obstruction(&sensor, target, cloud, &params.los).clear_fraction()
                    } else {
                        0.0
                    };
                    let acoustic = if needs(LosModel::Acoustic) {
                        acoustic_los(&sensor, target, cloud, &params.acoustic)?.factor
                    } else {
                        0.0
                    };
                    for s in 0..ns {
                        let ell = match catalog[s].los_model {
                            LosModel::Geometric => geo,
                            LosModel::Acoustic => acoustic,
                        };
                        block[(s * nk + k) * nt + t] = intrinsic_detection(rho_s[s][t], chi[s], ell);
                    }
                }
            }
            Ok(block)
        })
        .collect();
    let mut p = Vec::with_capacity(ni * ns * nk * nt);
    for b in blocks {
        p.extend(b?);
    }
    DetectionTensor::from_parts((ni, ns, nk, nt), p, present, rho_l, rho_u, rel.epsilon)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reliability_curve() {
        assert_eq!(component_reliability(3.0, 0.0).unwrap(), 1.0);
        assert_eq!(component_reliability(0.0, 1e6).unwrap(), 1.0);
        let r = component_reliability(1.203e-5, 100.0).unwrap();
        assert!((r - 0.9987977233144218).abs() < 1e-15);
        assert!(matches!(
            component_reliability(1e-5, -1.0),
            Err(DetectionError::Domain(_))
        ));
    }

    #[test]
    fn scalar_chain_examples() {
        assert_eq!(intrinsic_detection(0.9, 0.0, 1.0), 0.0);
        assert_eq!(intrinsic_detection(1.0, 1.0, 1.0), 1.0);
        assert!((intrinsic_detection(0.9988, 1.0, 0.5) - 0.4994).abs() < 1e-12);
        assert_eq!(end_to_end(0.0, 0.7), 0.0);
        assert_eq!(end_to_end(0.3, 1.0), 0.3);
        assert!((end_to_end(0.4994, 0.999) - 0.4989006).abs() < 1e-12);
        assert_eq!(miss_probability(0.0, 1e-6), 1.0);
        assert_eq!(miss_probability(1.0, 1e-6), 1e-6);
        assert!((miss_probability(0.4989, 1e-6) - 0.5011).abs() < 1e-12);
    }

    #[test]
    fn bundled_catalog_contents() {
        let cat = bundled_catalog();
        let ids: Vec<&str> = cat.iter().map(|s| s.id.as_str()).collect();
        assert_eq!(ids, ["radar", "optical", "remote_id", "acoustic", "rf", "ads_b"]);
        let ads_b = &cat[5];
        assert_eq!(ads_b.range, 160_900.0);
        assert_eq!(ads_b.unit_cost, 275.0);
        assert_eq!(cat[0].range, 750.0);
        assert_eq!(cat[3].los_model, LosModel::Acoustic);
        assert_eq!(cat[4].tracking_capacity, None);
        let back = parse_catalog(&catalog_to_json(&cat)).unwrap();
        assert_eq!(back, cat);
    }

    #[test]
    fn catalog_rejects_bad_rows() {
        let bad = r#"[{"id":"x","unit_cost":1,"range_km":0,"failure_rate":0}]"#;
        assert!(matches!(parse_catalog(bad), Err(DetectionError::InvalidSensor { .. })));
        let dup = r#"[{"id":"x","unit_cost":1,"range_km":1,"failure_rate":0},
                      {"id":"x","unit_cost":1,"range_km":1,"failure_rate":0}]"#;
        assert!(parse_catalog(dup).is_err());
    }

    #[test]
    fn from_parts_zeroes_absent_aircraft_and_floors_m() {
        let t = DetectionTensor::from_parts(
            (1, 1, 2, 2),
            vec![1.0, 0.5, 0.7, 0.7],
            vec![true, true, false, true],
            vec![1.0, 0.9],
            vec![1.0, 1.0],
            1e-6,
        )
        .unwrap();
        assert_eq!(t.q(0, 0, 0, 0), 1.0);
        assert_eq!(t.m(0, 0, 0, 0), 1e-6);
        assert!((t.q(0, 0, 0, 1) - 0.45).abs() < 1e-15);
        assert_eq!(t.q(0, 0, 1, 0), 0.0);
        assert_eq!(t.m(0, 0, 1, 0), 1.0);
        assert_eq!(t.alpha(0, 0, 0), &[0]);
        assert_eq!(t.alpha(1, 0, 0), &[0, 1]);
        let back = DetectionTensor::from_json(&t.to_json()).unwrap();
        assert_eq!(back, t);
    }
}
