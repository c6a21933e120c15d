//! Minimum-cost augmentation of an existing deployment so that every
//! aircraft of a surged schedule meets a detection threshold at every step.
//!
//! The per-unit factor θ in the threshold rows is the miss probability `m`
//! of the detection chain, evaluated on the surged schedule.

use serde::{Deserialize, Serialize};

use crate::detection::{DetectionTensor, SensorSpec};
use crate::reliability::{DeploymentPlan, PlanError};
use crate::solver::{check_feasible, solve_bnb, IntegerProgram, SolveStatus, DEFAULT_NODE_BUDGET};

pub const DEFAULT_MAX_VERT: u32 = 6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RobustnessParams {
    pub sigma: f64,
    /// Vertical units available on a mast.
    pub max_vert: u32,
    pub node_budget: u64,
}

impl Default for RobustnessParams {
    fn default() -> Self {
        RobustnessParams {
            sigma: 0.9,
            max_vert: DEFAULT_MAX_VERT,
            node_budget: DEFAULT_NODE_BUDGET,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentationPlan {
    pub sigma: f64,
    pub sensor_ids: Vec<String>,
    pub site_ids: Vec<usize>,
    pub n_exist: Vec<Vec<u32>>,
    pub n_add: Vec<Vec<u32>>,
    pub n_total: Vec<Vec<u32>>,
    pub beta: Vec<bool>,
    pub add_cost: f64,
}

impl AugmentationPlan {
    pub fn total_added(&self) -> u32 {
        self.n_add.iter().flatten().sum()
    }
}

#[derive(Clone, Debug)]
pub struct RobustnessModel {
    pub ip: IntegerProgram,
    pub num_sites: usize,
    pub num_sensors: usize,
}

impl RobustnessModel {
    pub fn n_add_var(&self, i: usize, s: usize) -> usize {
        i * self.num_sensors + s
    }

    pub fn beta_var(&self, i: usize) -> usize {
        self.num_sites * self.num_sensors + i
    }
}

fn check_dims(existing: &DeploymentPlan, tensor: &DetectionTensor, catalog: &[SensorSpec]) -> Result<(), PlanError> {
    let (ni, ns, _, _) = tensor.dims();
    if catalog.len() != ns || existing.n.len() != ni || existing.n.iter().any(|r| r.len() != ns) {
        return Err(PlanError::DimensionMismatch(format!(
            "tensor is {ni} sites x {ns} sensors, existing plan is {} sites, catalog has {} types",
            existing.n.len(),
            catalog.len()
        )));
    }
    Ok(())
}

/// Builds the augmentation program. `tensor` must be evaluated on the
/// surged schedule over the same sites and catalog as `existing`.
pub fn build_robustness_model(
    existing: &DeploymentPlan,
    tensor: &DetectionTensor,
    catalog: &[SensorSpec],
    params: &RobustnessParams,
) -> Result<RobustnessModel, PlanError> {
    check_dims(existing, tensor, catalog)?;
    let sigma = params.sigma;
    if !(sigma > 0.0 && sigma < 1.0) {
        return Err(PlanError::InvalidThreshold(sigma));
    }
    let (ni, ns, nk, nt) = tensor.dims();
    let mut model = RobustnessModel {
        ip: IntegerProgram::new(),
        num_sites: ni,
        num_sensors: ns,
    };
    for i in 0..ni {
        for (s, spec) in catalog.iter().enumerate() {
            let upper = (spec.max_sets as i64 - existing.n[i][s] as i64).max(0);
            let v = model
                .ip
                .add_integer(format!("n_add[{},{}]", existing.site_ids[i], spec.id), 0, upper);
            model.ip.set_objective(v, spec.set_cost() * spec.vert as f64);
        }
    }
    for i in 0..ni {
        let lower = if existing.n[i].iter().any(|&n| n > 0) { 1 } else { 0 };
        model.ip.add_variable(
            format!("beta[{}]", existing.site_ids[i]),
            lower,
            1,
            crate::solver::Integrality::Binary,
        );
    }

    for t in 0..nt {
        let server = tensor.rho_u(t);
        for k in (0..nk).filter(|&k| tensor.present(k, t)) {
            if sigma >= server {
                return Err(PlanError::ThresholdUnreachable {
                    step: t,
                    threshold: sigma,
                    server,
                });
            }
            let mut rhs = (1.0 - sigma / server).ln();
            let mut terms = Vec::new();
            for i in 0..ni {
                for s in 0..ns {
                    let log_theta = tensor.m(i, s, k, t).ln();
                    if log_theta < 0.0 {
                        rhs -= existing.n[i][s] as f64 * log_theta;
                        terms.push((model.n_add_var(i, s), log_theta));
                    }
                }
            }
            if terms.is_empty() {
                if rhs < 0.0 {
                    return Err(PlanError::StructurallyInfeasible {
                        step: t,
                        aircraft: Some(k),
                    });
                }
                continue;
            }
            model.ip.add_le(format!("detect[{k},{t}]"), &terms, rhs);
        }
    }

    for i in 0..ni {
        let beta = model.beta_var(i);
        let site = existing.site_ids[i];
        let exist_vert: f64 = (0..ns).map(|s| (catalog[s].vert * existing.n[i][s]) as f64).sum();
        let mut vert: Vec<(usize, f64)> = (0..ns)
            .map(|s| (model.n_add_var(i, s), catalog[s].vert as f64))
            .collect();
        vert.push((beta, -(params.max_vert as f64)));
        model.ip.add_le(format!("vertical[{site}]"), &vert, -exist_vert);
        for (s, spec) in catalog.iter().enumerate() {
            model.ip.add_le(
                format!("stack[{site},{}]", spec.id),
                &[(model.n_add_var(i, s), 1.0), (beta, -(spec.max_sets as f64))],
                -(existing.n[i][s] as f64),
            );
        }
        let exist_sets: f64 = existing.n[i].iter().map(|&n| n as f64).sum();
        let mut min_deploy: Vec<(usize, f64)> = (0..ns).map(|s| (model.n_add_var(i, s), -1.0)).collect();
        min_deploy.push((beta, 1.0));
        model.ip.add_le(format!("min_deploy[{site}]"), &min_deploy, exist_sets);
    }
    Ok(model)
}

/// Finds the cheapest additions; existing sets are kept unchanged.
pub fn augment(
    existing: &DeploymentPlan,
    tensor: &DetectionTensor,
    catalog: &[SensorSpec],
    params: &RobustnessParams,
) -> Result<AugmentationPlan, PlanError> {
    let model = build_robustness_model(existing, tensor, catalog, params)?;
    let solution = solve_bnb(&model.ip, params.node_budget)?;
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
    let (ni, ns) = (model.num_sites, model.num_sensors);
    let n_add: Vec<Vec<u32>> = (0..ni)
        .map(|i| (0..ns).map(|s| x[model.n_add_var(i, s)] as u32).collect())
        .collect();
    let n_total = (0..ni)
        .map(|i| (0..ns).map(|s| existing.n[i][s] + n_add[i][s]).collect())
        .collect();
    Ok(AugmentationPlan {
        sigma: params.sigma,
        sensor_ids: existing.sensor_ids.clone(),
        site_ids: existing.site_ids.clone(),
        n_exist: existing.n.clone(),
        n_add,
        n_total,
        beta: (0..ni).map(|i| x[model.beta_var(i)] == 1).collect(),
        add_cost: solution.objective_value.unwrap_or(0.0),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionCheck {
    pub aircraft: usize,
    pub step: usize,
    pub present: bool,
    /// `R_u(t) * (1 - prod theta^n_total)`; `None` for absent aircraft.
    pub achieved: Option<f64>,
    pub satisfied: bool,
}

/// Re-evaluates the threshold for every (aircraft, step) pair. Absent
/// aircraft are reported as satisfied.
pub fn validate_augmentation(
    plan: &AugmentationPlan,
    tensor: &DetectionTensor,
) -> Result<Vec<DetectionCheck>, PlanError> {
    let (ni, ns, nk, nt) = tensor.dims();
    if plan.n_total.len() != ni || plan.n_total.iter().any(|r| r.len() != ns) {
        return Err(PlanError::DimensionMismatch(format!(
            "plan is not {ni} sites x {ns} sensors"
        )));
    }
    let mut out = Vec::with_capacity(nk * nt);
    for k in 0..nk {
        for t in 0..nt {
            if !tensor.present(k, t) {
                out.push(DetectionCheck {
                    aircraft: k,
                    step: t,
                    present: false,
                    achieved: None,
                    satisfied: true,
                });
                continue;
            }
            let mut log_product = 0.0;
            for i in 0..ni {
                for s in 0..ns {
                    log_product += plan.n_total[i][s] as f64 * tensor.m(i, s, k, t).ln();
                }
            }
            let achieved = tensor.rho_u(t) * (1.0 - log_product.exp());
            out.push(DetectionCheck {
                aircraft: k,
                step: t,
                present: true,
                achieved: Some(achieved),
                satisfied: achieved >= plan.sigma - 1e-9,
            });
        }
    }
    Ok(out)
}
