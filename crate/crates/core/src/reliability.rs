//! Minimum-cost sensor placement meeting a per-step detection reliability
//! threshold.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detection::{CandidateSite, DetectionTensor, SensorSpec};
use crate::solver::{
    check_feasible, solve_bnb, IntegerProgram, SolveStatus, SolverError, Violation,
    DEFAULT_NODE_BUDGET,
};

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid threshold {0}: must lie strictly between 0 and 1")]
    InvalidThreshold(f64),
    #[error(
        "reliability target unreachable given server reliability: threshold {threshold} >= {server} at step {step}"
    )]
    ThresholdUnreachable { step: usize, threshold: f64, server: f64 },
    #[error("structurally infeasible: {}", describe_uncovered(*.step, *.aircraft))]
    StructurallyInfeasible { step: usize, aircraft: Option<usize> },
    #[error("model is infeasible")]
    Infeasible,
    #[error("node budget exhausted after {nodes} nodes")]
    Aborted { nodes: u64, best_cost: Option<f64> },
    #[error("solution failed verification: {0:?}")]
    Verification(Vec<Violation>),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

fn describe_uncovered(step: usize, aircraft: Option<usize>) -> String {
    match aircraft {
        Some(k) => format!("aircraft {k} is undetectable by every site and sensor at step {step}"),
        None => format!("no aircraft present at step {step} is detectable by any site and sensor"),
    }
}

/// How the threshold row is formed for each step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReliabilityMode {
    /// One row per step pooling every aircraft present.
    #[default]
    Aggregate,
    /// One row per (aircraft, step).
    PerAircraft,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReliabilityOptions {
    pub mode: ReliabilityMode,
    /// Sensor ids that may not be installed.
    pub exclude: Vec<String>,
    pub node_budget: u64,
}

impl Default for ReliabilityOptions {
    fn default() -> Self {
        ReliabilityOptions {
            mode: ReliabilityMode::Aggregate,
            exclude: Vec::new(),
            node_budget: DEFAULT_NODE_BUDGET,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeploymentPlan {
    pub threshold: f64,
    pub mode: ReliabilityMode,
    pub sensor_ids: Vec<String>,
    pub site_ids: Vec<usize>,
    /// `n[i][s]` sets of sensor type `s` at site `i`.
    pub n: Vec<Vec<u32>>,
    pub beta: Vec<bool>,
    pub total_cost: f64,
    /// Per step; `None` where no aircraft is present.
    pub achieved_reliability: Vec<Option<f64>>,
    pub min_achieved: Option<f64>,
}

impl DeploymentPlan {
    /// A plan with nothing installed.
    pub fn empty(sites: &[CandidateSite], catalog: &[SensorSpec]) -> Self {
        DeploymentPlan {
            threshold: 0.0,
            mode: ReliabilityMode::Aggregate,
            sensor_ids: catalog.iter().map(|s| s.id.clone()).collect(),
            site_ids: sites.iter().map(|s| s.id).collect(),
            n: vec![vec![0; catalog.len()]; sites.len()],
            beta: vec![false; sites.len()],
            total_cost: 0.0,
            achieved_reliability: Vec::new(),
            min_achieved: None,
        }
    }

    pub fn total_sets(&self) -> u32 {
        self.n.iter().flatten().sum()
    }

    /// Sets installed per sensor type.
    pub fn sets_by_type(&self) -> Vec<(String, u32)> {
        self.sensor_ids
            .iter()
            .enumerate()
            .map(|(s, id)| (id.clone(), self.n.iter().map(|row| row[s]).sum()))
            .collect()
    }
}

/// The integer program with its variable layout.
#[derive(Clone, Debug)]
pub struct ReliabilityModel {
    pub ip: IntegerProgram,
    pub num_sites: usize,
    pub num_sensors: usize,
}

impl ReliabilityModel {
    pub fn n_var(&self, i: usize, s: usize) -> usize {
        i * self.num_sensors + s
    }

    pub fn beta_var(&self, i: usize) -> usize {
        self.num_sites * self.num_sensors + i
    }
}

fn check_dims(
    tensor: &DetectionTensor,
    sites: &[CandidateSite],
    catalog: &[SensorSpec],
) -> Result<(), PlanError> {
    let (ni, ns, _, _) = tensor.dims();
    if ni != sites.len() || ns != catalog.len() {
        return Err(PlanError::DimensionMismatch(format!(
            "tensor has {ni} sites x {ns} sensors, inputs have {} x {}",
            sites.len(),
            catalog.len()
        )));
    }
    Ok(())
}

/// Sum of `ln m` over the aircraft detected by (i, s) at step `t`, or over
/// aircraft `k` alone.
fn log_miss(tensor: &DetectionTensor, i: usize, s: usize, t: usize, only: Option<usize>) -> f64 {
    match only {
        Some(k) => tensor.m(i, s, k, t).ln(),
        None => tensor
            .alpha(t, i, s)
            .iter()
            .map(|&k| tensor.m(i, s, k as usize, t).ln())
            .sum(),
    }
}

/// Builds the placement program. Steps with no aircraft present get no
/// threshold row.
pub fn build_reliability_model(
    tensor: &DetectionTensor,
    catalog: &[SensorSpec],
    sites: &[CandidateSite],
    threshold: f64,
    options: &ReliabilityOptions,
) -> Result<ReliabilityModel, PlanError> {
    check_dims(tensor, sites, catalog)?;
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(PlanError::InvalidThreshold(threshold));
    }
    let (ni, ns, nk, nt) = tensor.dims();
    let mut model = ReliabilityModel {
        ip: IntegerProgram::new(),
        num_sites: ni,
        num_sensors: ns,
    };
    for site in sites {
        for spec in catalog {
            let upper = if options.exclude.contains(&spec.id) { 0 } else { spec.max_sets as i64 };
            let v = model.ip.add_integer(format!("n[{},{}]", site.id, spec.id), 0, upper);
            model.ip.set_objective(v, spec.set_cost());
        }
    }
    for site in sites {
        model.ip.add_binary(format!("beta[{}]", site.id));
    }

    for t in 0..nt {
        let present: Vec<usize> = (0..nk).filter(|&k| tensor.present(k, t)).collect();
        if present.is_empty() {
            continue;
        }
        let server = tensor.rho_u(t);
        if threshold >= server {
            return Err(PlanError::ThresholdUnreachable { step: t, threshold, server });
        }
        let rhs = (1.0 - threshold / server).ln();
        let groups: Vec<Option<usize>> = match options.mode {
            ReliabilityMode::Aggregate => vec![None],
            ReliabilityMode::PerAircraft => present.iter().map(|&k| Some(k)).collect(),
        };
        for only in groups {
            let mut terms = Vec::new();
            for i in 0..ni {
                for s in 0..ns {
                    let c = log_miss(tensor, i, s, t, only);
                    if c < 0.0 {
                        terms.push((model.n_var(i, s), c));
                    }
                }
            }
            if terms.is_empty() {
                return Err(PlanError::StructurallyInfeasible { step: t, aircraft: only });
            }
            let name = match only {
                Some(k) => format!("reliability[{k},{t}]"),
                None => format!("reliability[{t}]"),
            };
            model.ip.add_le(name, &terms, rhs);
        }
    }

    for (i, site) in sites.iter().enumerate() {
        let beta = model.beta_var(i);
        let mut cap: Vec<(usize, f64)> = (0..ns)
            .map(|s| (model.n_var(i, s), catalog[s].set_size as f64))
            .collect();
        cap.push((beta, -(site.capacity as f64)));
        model.ip.add_le(format!("capacity[{}]", site.id), &cap, 0.0);
        for (s, spec) in catalog.iter().enumerate() {
            model.ip.add_le(
                format!("link[{},{}]", site.id, spec.id),
                &[(model.n_var(i, s), 1.0), (beta, -(spec.max_sets as f64))],
                0.0,
            );
        }
        let mut min_deploy: Vec<(usize, f64)> = (0..ns).map(|s| (model.n_var(i, s), -1.0)).collect();
        min_deploy.push((beta, 1.0));
        model.ip.add_le(format!("min_deploy[{}]", site.id), &min_deploy, 0.0);
    }
    Ok(model)
}

/// Achieved reliability per step,
/// `rho_u(t) * (1 - prod over (i, s, k in alpha) of m^n)`, pooling every
/// aircraft present. `None` where no aircraft is present.
pub fn validate_plan(
    plan: &DeploymentPlan,
    tensor: &DetectionTensor,
) -> Result<Vec<Option<f64>>, PlanError> {
    achieved(plan, tensor, ReliabilityMode::Aggregate)
}

/// Like [`validate_plan`] but evaluated per aircraft, reporting the worst
/// aircraft at each step.
pub fn validate_plan_per_aircraft(
    plan: &DeploymentPlan,
    tensor: &DetectionTensor,
) -> Result<Vec<Option<f64>>, PlanError> {
    achieved(plan, tensor, ReliabilityMode::PerAircraft)
}

fn achieved(
    plan: &DeploymentPlan,
    tensor: &DetectionTensor,
    mode: ReliabilityMode,
) -> Result<Vec<Option<f64>>, PlanError> {
    let (ni, ns, nk, nt) = tensor.dims();
    if plan.n.len() != ni || plan.n.iter().any(|row| row.len() != ns) {
        return Err(PlanError::DimensionMismatch(format!(
            "plan is not {ni} sites x {ns} sensors"
        )));
    }
    let step_value = |t: usize, only: Option<usize>| {
        let mut log_product = 0.0;
        for i in 0..ni {
            for s in 0..ns {
                let n = plan.n[i][s];
                if n > 0 {
                    log_product += n as f64 * log_miss(tensor, i, s, t, only);
                }
            }
        }
        tensor.rho_u(t) * (1.0 - log_product.exp())
    };
    Ok((0..nt)
        .map(|t| {
            let present: Vec<usize> = (0..nk).filter(|&k| tensor.present(k, t)).collect();
            if present.is_empty() {
                return None;
            }
            Some(match mode {
                ReliabilityMode::Aggregate => step_value(t, None),
                ReliabilityMode::PerAircraft => present
                    .iter()
                    .map(|&k| step_value(t, Some(k)))
                    .fold(f64::INFINITY, f64::min),
            })
        })
        .collect())
}

fn min_present(values: &[Option<f64>]) -> Option<f64> {
    values.iter().flatten().copied().reduce(f64::min)
}

/// Solves the placement program and fills in the achieved reliability.
pub fn plan(
    tensor: &DetectionTensor,
    catalog: &[SensorSpec],
    sites: &[CandidateSite],
    threshold: f64,
    options: &ReliabilityOptions,
) -> Result<DeploymentPlan, PlanError> {
    let model = build_reliability_model(tensor, catalog, sites, threshold, options)?;
    let solution = solve_bnb(&model.ip, options.node_budget)?;
    let x = match solution.status {
        SolveStatus::Optimal => solution.assignment.expect("optimal solutions carry an assignment"),
        SolveStatus::Infeasible => return Err(PlanError::Infeasible),
        SolveStatus::Aborted => {
            return Err(PlanError::Aborted {
                nodes: solution.nodes,
                best_cost: solution.objective_value,
            })
        }
    };
    let violations = check_feasible(&model.ip, &x)?;
    if !violations.is_empty() {
        return Err(PlanError::Verification(violations));
    }
    let (ni, ns) = (sites.len(), catalog.len());
    let mut result = DeploymentPlan {
        threshold,
        mode: options.mode,
        n: (0..ni)
            .map(|i| (0..ns).map(|s| x[model.n_var(i, s)] as u32).collect())
            .collect(),
        beta: (0..ni).map(|i| x[model.beta_var(i)] == 1).collect(),
        total_cost: solution.objective_value.unwrap_or(0.0),
        ..DeploymentPlan::empty(sites, catalog)
    };
    result.achieved_reliability = achieved(&result, tensor, options.mode)?;
    result.min_achieved = min_present(&result.achieved_reliability);
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detection::LosModel;
    use crate::terrain::GeoPoint;

    fn unit_sensor() -> SensorSpec {
        SensorSpec {
            id: "x".into(),
            model: String::new(),
            unit_cost: 1.0,
            set_size: 1,
            range: 1000.0,
            failure_rate: 0.0,
            vert: 1,
            max_sets: 3,
            tracking_capacity: None,
            fov_deg: None,
            los_model: LosModel::Geometric,
        }
    }

    fn site(id: usize, capacity: u32) -> CandidateSite {
        CandidateSite {
            id,
            position: GeoPoint::new(-81.0, 40.0, 0.0).unwrap(),
            mast_height: 10.0,
            capacity,
        }
    }

    /// One site, one type, one aircraft, one step, miss probability `m`,
    /// server reliability 0.999.
    fn hand_instance(m: f64) -> DetectionTensor {
        DetectionTensor::from_parts((1, 1, 1, 1), vec![1.0 - m], vec![true], vec![1.0], vec![0.999], 1e-6)
            .unwrap()
    }

    #[test]
    fn hand_instance_needs_one_set() {
        let t = hand_instance(0.05);
        let model =
            build_reliability_model(&t, &[unit_sensor()], &[site(0, 3)], 0.9, &ReliabilityOptions::default())
                .unwrap();
        let row = &model.ip.constraints[0];
        assert!((row.rhs - (1.0f64 - 0.9 / 0.999).ln()).abs() < 1e-12);
        assert!((row.rhs + 2.3116349285139637).abs() < 1e-9);
        assert!((row.coefficients[0].1 - 0.05f64.ln()).abs() < 1e-12);
        let p = plan(&t, &[unit_sensor()], &[site(0, 3)], 0.9, &ReliabilityOptions::default()).unwrap();
        assert_eq!(p.n, vec![vec![1]]);
        assert_eq!(p.beta, vec![true]);
        assert_eq!(p.total_cost, 1.0);
        assert!((p.min_achieved.unwrap() - 0.94905).abs() < 1e-9);
    }

    #[test]
    fn weak_sensor_exceeds_stack_limit() {
        let t = hand_instance(0.5);
        let r = plan(&t, &[unit_sensor()], &[site(0, 3)], 0.9, &ReliabilityOptions::default());
        assert!(matches!(r, Err(PlanError::Infeasible)));
    }

    #[test]
    fn threshold_above_server_reliability() {
        let t = hand_instance(0.05);
        let r = build_reliability_model(&t, &[unit_sensor()], &[site(0, 3)], 0.9995, &ReliabilityOptions::default());
        assert!(matches!(r, Err(PlanError::ThresholdUnreachable { step: 0, .. })));
    }

    #[test]
    fn uncovered_step_is_reported() {
        let t = DetectionTensor::from_parts((1, 1, 1, 2), vec![0.9, 0.0], vec![true, true], vec![1.0; 2], vec![1.0; 2], 1e-6)
            .unwrap();
        let r = build_reliability_model(&t, &[unit_sensor()], &[site(0, 3)], 0.5, &ReliabilityOptions::default());
        assert!(matches!(r, Err(PlanError::StructurallyInfeasible { step: 1, aircraft: None })));
    }

    #[test]
    fn empty_schedule_gives_empty_plan() {
        let t = DetectionTensor::from_parts((2, 1, 0, 3), vec![], vec![], vec![1.0; 3], vec![1.0; 3], 1e-6).unwrap();
        let p = plan(&t, &[unit_sensor()], &[site(0, 3), site(1, 3)], 0.9, &ReliabilityOptions::default()).unwrap();
        assert_eq!(p.total_sets(), 0);
        assert_eq!(p.total_cost, 0.0);
        assert_eq!(p.achieved_reliability, vec![None; 3]);
    }

    #[test]
    fn zero_plan_achieves_zero() {
        let t = hand_instance(0.05);
        let p = DeploymentPlan::empty(&[site(0, 3)], &[unit_sensor()]);
        assert_eq!(validate_plan(&p, &t).unwrap(), vec![Some(0.0)]);
        let mut wrong = p.clone();
        wrong.n.push(vec![0]);
        assert!(validate_plan(&wrong, &t).is_err());
    }

    #[test]
    fn pooled_rows_let_aircraft_substitute() {
        // aircraft 0 is seen well, aircraft 1 not at all: the pooled row is
        // satisfiable, the per-aircraft rows are not
        let t = DetectionTensor::from_parts((1, 1, 2, 1), vec![0.99, 0.0], vec![true, true], vec![1.0], vec![1.0], 1e-6)
            .unwrap();
        let pooled = plan(&t, &[unit_sensor()], &[site(0, 3)], 0.9, &ReliabilityOptions::default()).unwrap();
        assert_eq!(pooled.n, vec![vec![1]]);
        let per = ReliabilityOptions {
            mode: ReliabilityMode::PerAircraft,
            ..Default::default()
        };
        assert!(matches!(
            plan(&t, &[unit_sensor()], &[site(0, 3)], 0.9, &per),
            Err(PlanError::StructurallyInfeasible { step: 0, aircraft: Some(1) })
        ));
    }

    #[test]
    fn excluded_types_are_never_installed() {
        let t = DetectionTensor::from_parts((1, 2, 1, 1), vec![0.95, 0.95], vec![true], vec![1.0], vec![1.0], 1e-6).unwrap();
        let cheap = unit_sensor();
        let pricey = SensorSpec {
            id: "y".into(),
            unit_cost: 7.0,
            ..unit_sensor()
        };
        let opts = ReliabilityOptions {
            exclude: vec!["x".into()],
            ..Default::default()
        };
        let p = plan(&t, &[cheap, pricey], &[site(0, 3)], 0.9, &opts).unwrap();
        assert_eq!(p.n, vec![vec![0, 1]]);
        assert_eq!(p.total_cost, 7.0);
    }
}
