//! Persisted outputs. Every artifact carries the config hash and seed that
//! produced it, and serialisation is deterministic.

use std::io::Write;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::detection::{CandidateSite, DetectionTensor, SensorSpec};
use crate::reliability::DeploymentPlan;
use crate::resiliency::{DispatchSchedule, DispatchSummary, FailureScenario};
use crate::robustness::{AugmentationPlan, DetectionCheck};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: Option<u64>,
}

impl Provenance {
    pub fn comment(&self) -> String {
        match self.seed {
            Some(seed) => format!("config_hash={} seed={seed}", self.config_hash),
            None => format!("config_hash={}", self.config_hash),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorArtifact {
    pub provenance: Provenance,
    pub corridor: String,
    pub sites: Vec<CandidateSite>,
    pub catalog: Vec<SensorSpec>,
    pub tensor: DetectionTensor,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanArtifact {
    pub provenance: Provenance,
    pub corridor: String,
    pub sites: Vec<CandidateSite>,
    pub plan: DeploymentPlan,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentationArtifact {
    pub provenance: Provenance,
    pub corridor: String,
    pub sites: Vec<CandidateSite>,
    pub plan: AugmentationPlan,
    pub checks_failed: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DispatchArtifact {
    pub provenance: Provenance,
    pub schedule: DispatchSchedule,
    pub summary: Vec<DispatchSummary>,
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("artifact serialises");
    s.push('\n');
    s
}

fn point_feature(site: &CandidateSite, properties: Value) -> Value {
    json!({
        "type": "Feature",
        "geometry": {
            "type": "Point",
            "coordinates": [site.position.longitude, site.position.latitude],
        },
        "properties": properties,
    })
}

fn collection(provenance: &Provenance, features: Vec<Value>) -> Value {
    json!({
        "type": "FeatureCollection",
        "properties": provenance,
        "features": features,
    })
}

fn site_features(
    sites: &[CandidateSite],
    sensor_ids: &[String],
    counts: &[Vec<u32>],
    role: &str,
) -> Vec<Value> {
    let mut out = Vec::new();
    for (site, row) in sites.iter().zip(counts) {
        for (sensor, &count) in sensor_ids.iter().zip(row) {
            if count > 0 {
                out.push(point_feature(
                    site,
                    json!({"site_id": site.id, "sensor_type": sensor, "count": count, "role": role}),
                ));
            }
        }
    }
    out
}

/// One point per (site, sensor type) with sets installed.
pub fn plan_geojson(plan: &DeploymentPlan, sites: &[CandidateSite], provenance: &Provenance) -> Value {
    collection(provenance, site_features(sites, &plan.sensor_ids, &plan.n, "existing"))
}

/// Existing and added sets as separate features.
pub fn augmentation_geojson(
    plan: &AugmentationPlan,
    sites: &[CandidateSite],
    provenance: &Provenance,
) -> Value {
    let mut features = site_features(sites, &plan.sensor_ids, &plan.n_exist, "existing");
    features.extend(site_features(sites, &plan.sensor_ids, &plan.n_add, "added"));
    collection(provenance, features)
}

/// Hubs with the backup units each may launch.
pub fn hubs_geojson(scenario: &FailureScenario, provenance: &Provenance) -> Value {
    let features = scenario
        .hubs
        .iter()
        .map(|h| {
            let units: Vec<&str> = scenario
                .backups
                .iter()
                .filter(|b| b.home_hub.as_ref().is_none_or(|home| *home == h.id))
                .map(|b| b.id.as_str())
                .collect();
            json!({
                "type": "Feature",
                "geometry": {
                    "type": "Point",
                    "coordinates": [h.position.longitude, h.position.latitude],
                },
                "properties": {
                    "site_id": h.id,
                    "sensor_type": units.join(";"),
                    "count": units.len(),
                    "role": "backup-hub",
                },
            })
        })
        .collect();
    collection(provenance, features)
}

/// One point of the threshold sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlotRow {
    pub corridor: String,
    pub threshold: f64,
    /// `None` when no plan exists at this threshold.
    pub sensor_count: Option<u32>,
    pub total_cost: Option<f64>,
    pub status: String,
}

/// CSV of (threshold, sensor count, total cost) per corridor, preceded by a
/// provenance comment line.
pub fn write_plot_csv<W: Write>(rows: &[PlotRow], provenance: &Provenance, mut writer: W) -> std::io::Result<()> {
    writeln!(writer, "# {}", provenance.comment())?;
    writeln!(writer, "corridor,threshold,sensor_count,total_cost,status")?;
    for r in rows {
        let opt = |v: Option<String>| v.unwrap_or_default();
        writeln!(
            writer,
            "{},{},{},{},{}",
            r.corridor,
            r.threshold,
            opt(r.sensor_count.map(|c| c.to_string())),
            opt(r.total_cost.map(|c| c.to_string())),
            r.status
        )?;
    }
    Ok(())
}

/// Counts failed checks in an augmentation validation report.
pub fn failed_checks(checks: &[DetectionCheck]) -> usize {
    checks.iter().filter(|c| !c.satisfied).count()
}
