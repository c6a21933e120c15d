//! Range feasibility, geometric line of sight and acoustic line of sight
//! between a sensor and an aircraft over a [`TerrainCloud`].

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::terrain::{Point3, TerrainClass, TerrainCloud};

#[derive(Debug, Error, PartialEq)]
pub enum LosError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("no acoustic surface coefficients configured for terrain class {0:?}")]
    UnmappedClass(TerrainClass),
}

/// Smooth boundary decay around an effective sensing range.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RangeDecayParams {
    /// Effective sensing range (m).
    pub r: f64,
    /// Boundary tolerance (m).
    pub e: f64,
    /// Decay rate.
    pub a: f64,
    /// Decay exponent.
    pub b: f64,
}

impl RangeDecayParams {
    pub fn new(r: f64, e: f64, a: f64, b: f64) -> Result<Self, LosError> {
        let p = RangeDecayParams { r, e, a, b };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), LosError> {
        if !(self.r > 0.0) || !(self.e >= 0.0) || !(self.e < self.r) {
            return Err(LosError::InvalidParameter(format!(
                "range decay needs r > 0 and 0 <= e < r (r = {}, e = {})",
                self.r, self.e
            )));
        }
        if !(self.a > 0.0) || !(self.b > 0.0) {
            return Err(LosError::InvalidParameter(format!(
                "decay parameters must be positive (a = {}, b = {})",
                self.a, self.b
            )));
        }
        Ok(())
    }

    pub fn factor_at(&self, d: f64) -> f64 {
        let inner = self.r - self.e;
        if d <= inner {
            1.0
        } else if d < self.r + self.e {
            (-self.a * (d - inner).powf(self.b)).exp()
        } else {
            0.0
        }
    }
}

/// Range feasibility factor in [0, 1] for a sensor/target pair.
pub fn range_check(sensor: &Point3, target: &Point3, params: &RangeDecayParams) -> f64 {
    params.factor_at(sensor.distance(target))
}

/// Cylinder tolerances for the geometric line-of-sight test.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LosParams {
    /// Horizontal cylinder radius (m).
    pub radius: f64,
    /// Vertical tolerance (m).
    pub vertical_tolerance: f64,
}

impl Default for LosParams {
    fn default() -> Self {
        LosParams {
            radius: 5.0,
            vertical_tolerance: 0.0,
        }
    }
}

impl LosParams {
    pub fn validate(&self) -> Result<(), LosError> {
        if !(self.radius > 0.0) || !(self.vertical_tolerance >= 0.0) {
            return Err(LosError::InvalidParameter(format!(
                "LOS needs radius > 0 and vertical tolerance >= 0 (R = {}, Z = {})",
                self.radius, self.vertical_tolerance
            )));
        }
        Ok(())
    }
}

/// Candidate and blocked terrain points along a sensor-target sightline.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Obstruction {
    pub candidates: usize,
    pub blocked: Vec<usize>,
}

impl Obstruction {
    pub fn clear_fraction(&self) -> f64 {
        if self.candidates == 0 {
            1.0
        } else {
            1.0 - self.blocked.len() as f64 / self.candidates as f64
        }
    }

    pub fn blocked_fraction(&self) -> f64 {
        1.0 - self.clear_fraction()
    }
}

/// Horizontal lengths below this are treated as a vertical sightline, which
/// has no terrain to sample.
const MIN_HORIZONTAL_LENGTH: f64 = 1e-9;

/// Classifies terrain inside the sightline cylinder. Points are candidates
/// when their projection falls on the segment and they lie within
/// `radius` of it horizontally; a candidate blocks when its altitude is at
/// least the interpolated line height minus the vertical tolerance.
pub fn sightline_obstruction(
    sensor: &Point3,
    target: &Point3,
    cloud: &TerrainCloud,
    params: &LosParams,
) -> Obstruction {
    if sensor == target {
        return Obstruction::default();
    }
    let (vx, vy) = (target.x - sensor.x, target.y - sensor.y);
    let len = vx.hypot(vy);
    if len < MIN_HORIZONTAL_LENGTH {
        return Obstruction::default();
    }
    let (ux, uy) = (vx / len, vy / len);
    let mut out = Obstruction::default();
    let pts = cloud.local_points();
    for id in cloud.query_cylinder(sensor, target, params.radius) {
        let p = &pts[id];
        let (tx, ty) = (p.x - sensor.x, p.y - sensor.y);
        let proj = tx * ux + ty * uy;
        if !(0.0..=len).contains(&proj) {
            continue;
        }
        let d_line = (tx - proj * ux).hypot(ty - proj * uy);
        if d_line > params.radius {
            continue;
        }
        out.candidates += 1;
        let tau = proj / len;
        let h = sensor.z + tau * (target.z - sensor.z);
        if p.z >= h - params.vertical_tolerance {
            out.blocked.push(id);
        }
    }
    out.blocked.sort_unstable();
    out
}

/// Geometric line-of-sight factor: the unobstructed fraction of terrain
/// samples inside the sightline cylinder (1.0 when nothing is sampled).
pub fn geometric_los(
    sensor: &Point3,
    target: &Point3,
    cloud: &TerrainCloud,
    params: &LosParams,
) -> f64 {
    sightline_obstruction(sensor, target, cloud, params).clear_fraction()
}

/// Ground reflection coefficient and boundary loss factor of one surface.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceCoefficients {
    pub reflection: f64,
    pub boundary_loss: f64,
}

pub const BOUNDARY_LOSS_RANGE: (f64, f64) = (0.975, 0.999);

/// Published reflection coefficient range for each surface class.
pub fn reflection_range(class: TerrainClass) -> Option<(f64, f64)> {
    match class {
        TerrainClass::Ground => Some((0.5, 0.7)),
        TerrainClass::LowVegetation => Some((0.2, 0.4)),
        TerrainClass::MediumVegetation => Some((0.1, 0.3)),
        TerrainClass::HighVegetation => Some((0.05, 0.2)),
        TerrainClass::Building => Some((0.9, 1.0)),
        TerrainClass::Unclassified => None,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AcousticParams {
    /// Frequency (Hz).
    pub frequency: f64,
    /// Speed of sound (m/s).
    pub sound_speed: f64,
    /// Direct-wave amplitude coefficient.
    pub amplitude: f64,
    /// Near-field cutoff (m).
    pub near_field: f64,
    /// Reference distance for geometric divergence (m).
    pub reference_distance: f64,
    /// Saturation of the barrier term (dB).
    pub max_barrier_db: f64,
    pub surfaces: BTreeMap<TerrainClass, SurfaceCoefficients>,
    pub los: LosParams,
}

impl Default for AcousticParams {
    fn default() -> Self {
        const F: f64 = 0.99;
        let mut surfaces = BTreeMap::new();
        for class in TerrainClass::ALL {
            // unclassified returns are mostly bare surface in the corridor data
            let (lo, hi) = reflection_range(class)
                .or_else(|| reflection_range(TerrainClass::Ground))
                .unwrap();
            surfaces.insert(
                class,
                SurfaceCoefficients {
                    reflection: (lo + hi) / 2.0,
                    boundary_loss: F,
                },
            );
        }
        AcousticParams {
            frequency: 1000.0,
            sound_speed: 343.0,
            amplitude: 1.0,
            near_field: 1.0,
            reference_distance: 1.0,
            max_barrier_db: 20.0,
            surfaces,
            los: LosParams::default(),
        }
    }
}

impl AcousticParams {
    pub fn validate(&self) -> Result<(), LosError> {
        let positive = [
            ("frequency", self.frequency),
            ("sound_speed", self.sound_speed),
            ("near_field", self.near_field),
            ("reference_distance", self.reference_distance),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(LosError::InvalidParameter(format!("{name} must be positive")));
            }
        }
        if !(self.max_barrier_db >= 0.0) {
            return Err(LosError::InvalidParameter("max_barrier_db must be >= 0".into()));
        }
        self.los.validate()?;
        for class in TerrainClass::ALL {
            let s = self.surfaces.get(&class).ok_or(LosError::UnmappedClass(class))?;
            let (flo, fhi) = BOUNDARY_LOSS_RANGE;
            if !(flo..=fhi).contains(&s.boundary_loss) {
                return Err(LosError::InvalidParameter(format!(
                    "boundary loss for {class:?} must lie in [{flo}, {fhi}], got {}",
                    s.boundary_loss
                )));
            }
            let (rlo, rhi) = reflection_range(class).unwrap_or((0.0, 1.0));
            if !(rlo..=rhi).contains(&s.reflection) {
                return Err(LosError::InvalidParameter(format!(
                    "reflection coefficient for {class:?} must lie in [{rlo}, {rhi}], got {}",
                    s.reflection
                )));
            }
        }
        Ok(())
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * PI * self.frequency / self.sound_speed
    }
}

/// `Q = R_p + (1 - R_p) F`.
pub fn reflection_factor_value(reflection: f64, boundary_loss: f64) -> f64 {
    reflection + (1.0 - reflection) * boundary_loss
}

pub fn reflection_factor(class: TerrainClass, params: &AcousticParams) -> Result<f64, LosError> {
    let s = params.surfaces.get(&class).ok_or(LosError::UnmappedClass(class))?;
    Ok(reflection_factor_value(s.reflection, s.boundary_loss))
}

/// Acoustic line-of-sight result with the intermediate terms exposed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AcousticLos {
    pub factor: f64,
    pub distance: f64,
    pub wavenumber: f64,
    /// |A / r|, the direct-wave amplitude magnitude (diagnostic).
    pub amplitude: f64,
    pub geometric_db: f64,
    pub barrier_db: f64,
}

/// Logistic map from total attenuation in dB to a factor in (0, 1).
pub fn attenuation_to_factor(total_db: f64) -> f64 {
    1.0 / (1.0 + 10f64.powf(total_db / 20.0))
}

/// Acoustic line-of-sight factor. Geometric divergence is
/// `20 log10(max(r, delta) / d0) + 11` dB; the barrier term scales
/// `max_barrier_db` by the blocked fraction of the sightline and by
/// `1 - Q` averaged over the blocking points' surfaces.
pub fn acoustic_los(
    sensor: &Point3,
    target: &Point3,
    cloud: &TerrainCloud,
    params: &AcousticParams,
) -> Result<AcousticLos, LosError> {
    let r = sensor.distance(target);
    let wavenumber = params.wavenumber();
    if r < params.near_field {
        return Ok(AcousticLos {
            factor: 1.0,
            distance: r,
            wavenumber,
            amplitude: params.amplitude / params.near_field,
            geometric_db: 0.0,
            barrier_db: 0.0,
        });
    }
    let amplitude = params.amplitude / r;
    let geometric_db = 20.0 * (r.max(params.near_field) / params.reference_distance).log10() + 11.0;
    let obstruction = sightline_obstruction(sensor, target, cloud, &params.los);
    let barrier_db = if obstruction.blocked.is_empty() {
        0.0
    } else {
        let mut q_sum = 0.0;
        for &id in &obstruction.blocked {
            q_sum += reflection_factor(cloud.class_of(id), params)?;
        }
        let q_mean = q_sum / obstruction.blocked.len() as f64;
        params.max_barrier_db * obstruction.blocked_fraction() * (1.0 - q_mean)
    };
    Ok(AcousticLos {
        factor: attenuation_to_factor(geometric_db + barrier_db),
        distance: r,
        wavenumber,
        amplitude,
        geometric_db,
        barrier_db,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::terrain::{GeoPoint, LocalFrame, TerrainPoint, DEFAULT_CELL_SIZE};

    fn frame() -> LocalFrame {
        LocalFrame::new(GeoPoint::new(-81.0, 40.0, 0.0).unwrap())
    }

    fn cloud_from(local: &[(f64, f64, f64, TerrainClass)]) -> TerrainCloud {
        let f = frame();
        let pts = local
            .iter()
            .map(|&(x, y, z, class)| TerrainPoint {
                position: f.to_geo(&Point3::new(x, y, z)),
                class,
            })
            .collect();
        TerrainCloud::with_frame(pts, f, DEFAULT_CELL_SIZE).unwrap()
    }

    #[test]
    fn range_check_piecewise() {
        let s = Point3::new(0.0, 0.0, 0.0);
        let p = RangeDecayParams::new(10.0, 1.0, 0.5, 1.0).unwrap();
        assert_eq!(range_check(&s, &Point3::new(9.0, 0.0, 0.0), &p), 1.0);
        let mid = range_check(&s, &Point3::new(9.5, 0.0, 0.0), &p);
        assert!((mid - (-0.25f64).exp()).abs() < 1e-12);
        assert!((mid - 0.778_800_783_071_404_9).abs() < 1e-12);
        assert_eq!(range_check(&s, &Point3::new(11.5, 0.0, 0.0), &p), 0.0);
        assert_eq!(range_check(&s, &Point3::new(11.0, 0.0, 0.0), &p), 0.0);
    }

    #[test]
    fn range_params_validated() {
        assert!(RangeDecayParams::new(10.0, 10.0, 1.0, 1.0).is_err());
        assert!(RangeDecayParams::new(0.0, 0.0, 1.0, 1.0).is_err());
        assert!(RangeDecayParams::new(10.0, 1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn geometric_los_hand_trace() {
        let cloud = cloud_from(&[
            (50.0, 0.0, 20.0, TerrainClass::Building),
            (25.0, 0.0, 5.0, TerrainClass::Ground),
        ]);
        let p = LosParams {
            radius: 5.0,
            vertical_tolerance: 0.0,
        };
        let s = Point3::new(0.0, 0.0, 10.0);
        let d = Point3::new(100.0, 0.0, 10.0);
        let obs = sightline_obstruction(&s, &d, &cloud, &p);
        assert_eq!(obs.candidates, 2);
        assert_eq!(obs.blocked.len(), 1);
        assert!((geometric_los(&s, &d, &cloud, &p) - 0.5).abs() < 1e-12);
        assert!((geometric_los(&d, &s, &cloud, &p) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn geometric_los_degenerate_cases() {
        let cloud = cloud_from(&[(50.0, 0.0, 200.0, TerrainClass::Building)]);
        let p = LosParams::default();
        let s = Point3::new(0.0, 0.0, 10.0);
        assert_eq!(geometric_los(&s, &s, &cloud, &p), 1.0);
        // sightline far from the only point
        let d = Point3::new(0.0, 100.0, 10.0);
        assert_eq!(geometric_los(&s, &d, &cloud, &p), 1.0);
        // vertical sightline
        let up = Point3::new(0.0, 0.0, 120.0);
        assert_eq!(geometric_los(&s, &up, &cloud, &p), 1.0);
    }

    #[test]
    fn reflection_factor_values() {
        assert!((reflection_factor_value(0.9, 0.99) - 0.999).abs() < 1e-12);
        for f in [0.0, 0.3, 0.975, 1.0] {
            assert_eq!(reflection_factor_value(1.0, f), 1.0);
        }
        for rp in [0.0, 0.2, 0.6, 1.0] {
            assert!((reflection_factor_value(rp, 1.0) - 1.0).abs() < 1e-15);
        }
        let mut params = AcousticParams::default();
        params.surfaces.remove(&TerrainClass::Building);
        assert_eq!(
            reflection_factor(TerrainClass::Building, &params),
            Err(LosError::UnmappedClass(TerrainClass::Building))
        );
        assert!(params.validate().is_err());
    }

    #[test]
    fn default_acoustic_params_are_valid_midpoints() {
        let p = AcousticParams::default();
        p.validate().unwrap();
        assert!((p.surfaces[&TerrainClass::Building].reflection - 0.95).abs() < 1e-12);
        assert!((p.surfaces[&TerrainClass::HighVegetation].reflection - 0.125).abs() < 1e-12);
        assert!((p.wavenumber() - 18.318_324_510_727_656).abs() < 1e-9);
    }

    #[test]
    fn acoustic_los_near_field_and_zero_attenuation() {
        let cloud = cloud_from(&[]);
        let p = AcousticParams::default();
        let s = Point3::new(0.0, 0.0, 10.0);
        let near = acoustic_los(&s, &Point3::new(0.5, 0.0, 10.0), &cloud, &p).unwrap();
        assert_eq!(near.factor, 1.0);
        assert_eq!(attenuation_to_factor(0.0), 0.5);
        let far = acoustic_los(&s, &Point3::new(100.0, 0.0, 10.0), &cloud, &p).unwrap();
        assert!((far.geometric_db - 51.0).abs() < 1e-9);
        assert_eq!(far.barrier_db, 0.0);
        assert!(far.factor > 0.0 && far.factor < 0.5);
        assert!((far.amplitude - 0.01).abs() < 1e-15);
    }

    #[test]
    fn barrier_attenuation_uses_blocking_surfaces() {
        let cloud = cloud_from(&[
            (50.0, 0.0, 40.0, TerrainClass::HighVegetation),
            (30.0, 0.0, 0.0, TerrainClass::Ground),
        ]);
        let p = AcousticParams::default();
        let s = Point3::new(0.0, 0.0, 10.0);
        let d = Point3::new(100.0, 0.0, 10.0);
        let a = acoustic_los(&s, &d, &cloud, &p).unwrap();
        let q = reflection_factor_value(0.125, 0.99);
        assert!((a.barrier_db - 20.0 * 0.5 * (1.0 - q)).abs() < 1e-12);
    }
}
