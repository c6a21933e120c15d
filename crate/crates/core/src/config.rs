//! Toolkit configuration: one JSON document with a default for every
//! constant.
//!
//! Units: money in USD, distances in metres, durations in seconds or steps,
//! probabilities unitless.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::detection::{
    DetectionParams, DEFAULT_MAST_HEIGHT, DEFAULT_SITE_CAPACITY, DEFAULT_SITE_SPACING,
};
use crate::reliability::ReliabilityMode;
use crate::robustness::DEFAULT_MAX_VERT;
use crate::schedule::{
    DemandProfile, TemporalDistribution, UseCase, CRUISE_ALTITUDE_M, DEFAULT_SPEED_MPS,
    DEFAULT_STEP_SECONDS, DEFAULT_WINDOW,
};
use crate::solver::DEFAULT_NODE_BUDGET;
use crate::terrain::{DEFAULT_CELL_SIZE, DEFAULT_GROUND_RADIUS};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config: {0}")]
    Json(#[from] serde_json::Error),
    #[error("config: {0}")]
    Io(#[from] std::io::Error),
    #[error("config: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub dsm: Option<PathBuf>,
    pub catalog: Option<PathBuf>,
    pub schedule: Option<PathBuf>,
    pub scenario: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TerrainSettings {
    pub cell_size: f64,
    /// Neighbourhood radius for ground estimates during reclassification.
    pub ground_radius: f64,
}

impl Default for TerrainSettings {
    fn default() -> Self {
        TerrainSettings {
            cell_size: DEFAULT_CELL_SIZE,
            ground_radius: DEFAULT_GROUND_RADIUS,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorridorConfig {
    pub name: String,
    /// `[longitude, latitude]` pairs in order.
    pub waypoints: Vec<[f64; 2]>,
    #[serde(default)]
    pub demand: DemandProfile,
    /// Demand of the surged scenario used by the robustness planner.
    #[serde(default)]
    pub surge_demand: Option<DemandProfile>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleSettings {
    pub speed_mps: f64,
    pub step_seconds: u32,
    /// Hours `[start, end)`.
    pub window: [u32; 2],
    pub cruise_altitude_m: f64,
    /// Overrides of the per-use-case temporal distributions.
    pub distributions: Vec<(UseCase, TemporalDistribution)>,
}

impl Default for ScheduleSettings {
    fn default() -> Self {
        ScheduleSettings {
            speed_mps: DEFAULT_SPEED_MPS,
            step_seconds: DEFAULT_STEP_SECONDS,
            window: [DEFAULT_WINDOW.0, DEFAULT_WINDOW.1],
            cruise_altitude_m: CRUISE_ALTITUDE_M,
            distributions: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SiteSettings {
    pub spacing: f64,
    pub mast_height: f64,
    pub capacity: u32,
}

impl Default for SiteSettings {
    fn default() -> Self {
        SiteSettings {
            spacing: DEFAULT_SITE_SPACING,
            mast_height: DEFAULT_MAST_HEIGHT,
            capacity: DEFAULT_SITE_CAPACITY,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerSettings {
    /// Reliability threshold H.
    pub threshold: f64,
    pub mode: ReliabilityMode,
    pub exclude: Vec<String>,
    /// Detection threshold sigma of the augmentation planner.
    pub sigma: f64,
    pub max_vert: u32,
    pub plot_thresholds: Vec<f64>,
}

impl Default for PlannerSettings {
    fn default() -> Self {
        PlannerSettings {
            threshold: 0.9,
            mode: ReliabilityMode::Aggregate,
            exclude: Vec::new(),
            sigma: 0.9,
            max_vert: DEFAULT_MAX_VERT,
            plot_thresholds: vec![0.80, 0.85, 0.90, 0.95, 0.99],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    pub node_budget: u64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            node_budget: DEFAULT_NODE_BUDGET,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToolkitConfig {
    pub seed: Option<u64>,
    pub paths: Paths,
    pub terrain: TerrainSettings,
    pub corridors: Vec<CorridorConfig>,
    pub schedule: ScheduleSettings,
    pub detection: DetectionParams,
    pub sites: SiteSettings,
    pub planner: PlannerSettings,
    pub solver: SolverSettings,
}

impl ToolkitConfig {
    pub fn from_json(json: &str) -> Result<Self, ConfigError> {
        let cfg: ToolkitConfig = serde_json::from_str(json)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads a config file; relative paths inside it are resolved against
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let mut cfg = Self::from_json(&std::fs::read_to_string(path)?)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [
            &mut cfg.paths.dsm,
            &mut cfg.paths.catalog,
            &mut cfg.paths.schedule,
            &mut cfg.paths.scenario,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let unit_open = |name: &str, v: f64| {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(ConfigError::Invalid(format!("{name} must lie in (0, 1), got {v}")))
            }
        };
        unit_open("planner.threshold", self.planner.threshold)?;
        unit_open("planner.sigma", self.planner.sigma)?;
        unit_open("detection.reliability.epsilon", self.detection.reliability.epsilon)?;
        for &h in &self.planner.plot_thresholds {
            unit_open("planner.plot_thresholds", h)?;
        }
        if self.schedule.window[0] >= self.schedule.window[1] || self.schedule.window[1] > 24 {
            return Err(ConfigError::Invalid("schedule.window must satisfy start < end <= 24".into()));
        }
        for c in &self.corridors {
            if c.waypoints.len() < 2 {
                return Err(ConfigError::Invalid(format!("corridor {} needs two waypoints", c.name)));
            }
        }
        Ok(())
    }

    pub fn corridor(&self, name: &str) -> Result<&CorridorConfig, ConfigError> {
        self.corridors
            .iter()
            .find(|c| c.name == name)
            .ok_or_else(|| ConfigError::Invalid(format!("no corridor named '{name}'")))
    }

    /// The seed, which generation commands require.
    pub fn require_seed(&self) -> Result<u64, ConfigError> {
        self.seed
            .ok_or_else(|| ConfigError::Invalid("a seed is required for generation".into()))
    }

    /// SHA-256 of the canonical (fully defaulted) JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serialises");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_takes_defaults() {
        let cfg = ToolkitConfig::from_json("{}").unwrap();
        assert_eq!(cfg, ToolkitConfig::default());
        assert_eq!(cfg.sites.spacing, 500.0);
        assert_eq!(cfg.detection.reliability.epsilon, 1e-6);
        assert_eq!(cfg.planner.max_vert, 6);
    }

    #[test]
    fn hash_ignores_formatting_but_not_values() {
        let a = ToolkitConfig::from_json(r#"{"seed": 7}"#).unwrap();
        let b = ToolkitConfig::from_json("{\n  \"seed\" :7 ,\"planner\": {\"threshold\": 0.9}}").unwrap();
        let c = ToolkitConfig::from_json(r#"{"seed": 8}"#).unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn rejects_bad_values_and_unknown_fields() {
        assert!(ToolkitConfig::from_json(r#"{"planner": {"threshold": 1.0}}"#).is_err());
        assert!(ToolkitConfig::from_json(r#"{"planer": {}}"#).is_err());
        assert!(ToolkitConfig::from_json(r#"{"schedule": {"window": [18, 9]}}"#).is_err());
        assert!(ToolkitConfig::default().require_seed().is_err());
    }
}
