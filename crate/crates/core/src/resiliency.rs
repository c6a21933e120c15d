//! Backup dispatch while primary sensors are down: travel times, the
//! dispatch program, an independent schedule validator and summaries.
//!
//! A failure of primary `o` covers steps `[fail, end)` where
//! `end = min(fail + repair, horizon)`. A unit dispatched from hub `h` at
//! step `t` arrives at `t + travel[h][o]` and may be active from then until
//! `end`; it returns to its hub instantly when the repair completes.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::solver::{
    check_feasible, solve_bnb, IntegerProgram, SolveStatus, SolverError, Violation,
    DEFAULT_NODE_BUDGET,
};
use crate::terrain::{GeoPoint, LocalFrame};

pub const DEFAULT_BACKUP_SPEED: f64 = 15.0;
pub const DEFAULT_DETOUR_FACTOR: f64 = 1.4;

const BUNDLED_BACKUPS: &str = include_str!("../data/backups.json");

#[derive(Debug, Error)]
pub enum ResiliencyError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("no backup can reach failed primary '{0}' before its repair completes")]
    Unreachable(String),
    #[error("dispatch model is infeasible")]
    Infeasible,
    #[error("node budget exhausted after {nodes} nodes")]
    Aborted { nodes: u64, best_objective: Option<f64> },
    #[error("solution failed verification: {0:?}")]
    Verification(Vec<Violation>),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hub {
    pub id: String,
    pub position: GeoPoint,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Platform {
    Uav,
    GroundVehicle,
}

fn default_speed() -> f64 {
    DEFAULT_BACKUP_SPEED
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BackupUnit {
    pub id: String,
    #[serde(default)]
    pub model: String,
    pub platform: Platform,
    /// Detection probability while active.
    pub prob: f64,
    #[serde(default = "default_speed")]
    pub speed_mps: f64,
    /// When set, only this hub may launch the unit.
    #[serde(default)]
    pub home_hub: Option<String>,
    #[serde(default)]
    pub range_km: Option<f64>,
    #[serde(default)]
    pub tracking_capacity: Option<u32>,
    #[serde(default)]
    pub weight_kg: Option<f64>,
}

/// One unit of each bundled backup type, launchable from any hub.
pub fn bundled_backups() -> Vec<BackupUnit> {
    serde_json::from_str(BUNDLED_BACKUPS).expect("bundled backup catalog is valid")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FailedPrimary {
    pub id: String,
    pub position: GeoPoint,
    pub fail_time: usize,
    /// Steps until repaired (at least 1).
    pub repair_time: usize,
}

fn default_detour() -> f64 {
    DEFAULT_DETOUR_FACTOR
}

fn default_step() -> u32 {
    600
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FailureScenario {
    #[serde(default = "default_step")]
    pub step_seconds: u32,
    pub horizon: usize,
    #[serde(default = "default_detour")]
    pub detour_factor: f64,
    pub hubs: Vec<Hub>,
    pub backups: Vec<BackupUnit>,
    pub primaries: Vec<FailedPrimary>,
}

impl FailureScenario {
    pub fn from_json(json: &str) -> Result<Self, ResiliencyError> {
        let s: FailureScenario = serde_json::from_str(json)?;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), ResiliencyError> {
        let bad = |m: String| Err(ResiliencyError::InvalidScenario(m));
        if self.step_seconds == 0 {
            return bad("step_seconds must be positive".into());
        }
        if !(self.detour_factor >= 1.0) {
            return bad("detour_factor must be >= 1".into());
        }
        let mut ids = BTreeSet::new();
        for h in &self.hubs {
            if !ids.insert(&h.id) {
                return bad(format!("duplicate hub id '{}'", h.id));
            }
            h.position
                .validate()
                .map_err(|e| ResiliencyError::InvalidScenario(format!("hub {}: {e}", h.id)))?;
        }
        let mut ids = BTreeSet::new();
        for b in &self.backups {
            if !ids.insert(&b.id) {
                return bad(format!("duplicate backup id '{}'", b.id));
            }
            if !(b.prob > 0.0 && b.prob <= 1.0) {
                return bad(format!("backup {}: prob must lie in (0, 1]", b.id));
            }
            if !(b.speed_mps > 0.0) {
                return bad(format!("backup {}: speed must be positive", b.id));
            }
            if let Some(h) = &b.home_hub {
                if !self.hubs.iter().any(|x| &x.id == h) {
                    return bad(format!("backup {}: unknown home hub '{h}'", b.id));
                }
            }
        }
        let mut ids = BTreeSet::new();
        for o in &self.primaries {
            if !ids.insert(&o.id) {
                return bad(format!("duplicate primary id '{}'", o.id));
            }
            if o.repair_time < 1 {
                return bad(format!("primary {}: repair_time must be >= 1", o.id));
            }
            if o.fail_time >= self.horizon {
                return bad(format!("primary {}: fails at or after the horizon", o.id));
            }
            o.position
                .validate()
                .map_err(|e| ResiliencyError::InvalidScenario(format!("primary {}: {e}", o.id)))?;
        }
        Ok(())
    }

    /// End (exclusive) of the failure window of primary `o`.
    pub fn fail_end(&self, o: usize) -> usize {
        let p = &self.primaries[o];
        (p.fail_time + p.repair_time).min(self.horizon)
    }

    pub fn failed_at(&self, o: usize, t: usize) -> bool {
        self.primaries[o].fail_time <= t && t < self.fail_end(o)
    }

    fn hub_allowed(&self, b: usize, h: usize) -> bool {
        self.backups[b]
            .home_hub
            .as_ref()
            .is_none_or(|home| *home == self.hubs[h].id)
    }
}

/// Steps needed to cover `distance` metres; at least one.
pub fn travel_steps(distance: f64, platform: Platform, speed: f64, step_seconds: u32, detour: f64) -> u32 {
    let path = match platform {
        Platform::Uav => distance,
        Platform::GroundVehicle => distance * detour,
    };
    ((path / speed / step_seconds as f64).ceil() as u32).max(1)
}

/// `travel[h][o]` in steps for one unit, from horizontal distances in a
/// frame centred on the hubs and primaries.
pub fn compute_travel_times(
    hubs: &[Hub],
    primaries: &[FailedPrimary],
    unit: &BackupUnit,
    step_seconds: u32,
    detour: f64,
) -> Vec<Vec<u32>> {
    let Some(frame) = LocalFrame::centered_on(
        hubs.iter().map(|h| &h.position).chain(primaries.iter().map(|p| &p.position)),
    ) else {
        return Vec::new();
    };
    hubs.iter()
        .map(|h| {
            let a = frame.to_local(&h.position);
            primaries
                .iter()
                .map(|p| {
                    let d = a.horizontal_distance(&frame.to_local(&p.position));
                    travel_steps(d, unit.platform, unit.speed_mps, step_seconds, detour)
                })
                .collect()
        })
        .collect()
}

/// `travel[b][h][o]` for every unit in the scenario.
pub fn scenario_travel_times(scenario: &FailureScenario) -> Vec<Vec<Vec<u32>>> {
    scenario
        .backups
        .iter()
        .map(|b| {
            compute_travel_times(
                &scenario.hubs,
                &scenario.primaries,
                b,
                scenario.step_seconds,
                scenario.detour_factor,
            )
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DispatchVar {
    pub unit: usize,
    pub hub: usize,
    pub primary: usize,
    pub step: usize,
    pub var: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ActiveVar {
    pub unit: usize,
    pub primary: usize,
    pub step: usize,
    pub var: usize,
}

#[derive(Clone, Debug)]
pub struct ResiliencyModel {
    pub ip: IntegerProgram,
    pub dispatch: Vec<DispatchVar>,
    pub active: Vec<ActiveVar>,
    pub travel: Vec<Vec<Vec<u32>>>,
}

/// Builds the dispatch program. Dispatch variables exist only where the
/// unit would arrive before the repair completes; activity variables only
/// from the earliest possible arrival onward. Activity requires an earlier
/// dispatch that has already arrived. A unit dispatched to one failure may
/// not be dispatched to another during the first one's window.
pub fn build_resiliency_model(scenario: &FailureScenario) -> Result<ResiliencyModel, ResiliencyError> {
    scenario.validate()?;
    let travel = scenario_travel_times(scenario);
    let (nb, nh, no) = (scenario.backups.len(), scenario.hubs.len(), scenario.primaries.len());
    let mut ip = IntegerProgram::new();
    let mut dispatch = Vec::new();
    let mut active = Vec::new();

    for b in 0..nb {
        for o in 0..no {
            let (start, end) = (scenario.primaries[o].fail_time, scenario.fail_end(o));
            let mut earliest: Option<usize> = None;
            for h in (0..nh).filter(|&h| scenario.hub_allowed(b, h)) {
                let tt = travel[b][h][o] as usize;
                for t in start..end {
                    if t + tt >= end {
                        break;
                    }
                    let var = ip.add_binary(format!(
                        "dispatch[{},{},{},{t}]",
                        scenario.backups[b].id, scenario.hubs[h].id, scenario.primaries[o].id
                    ));
                    ip.set_objective(var, tt as f64);
                    dispatch.push(DispatchVar { unit: b, hub: h, primary: o, step: t, var });
                    earliest = Some(earliest.map_or(t + tt, |e: usize| e.min(t + tt)));
                }
            }
            if let Some(first) = earliest {
                for t in first..end {
                    let var = ip.add_binary(format!(
                        "active[{},{},{t}]",
                        scenario.backups[b].id, scenario.primaries[o].id
                    ));
                    ip.set_objective(var, -scenario.backups[b].prob);
                    active.push(ActiveVar { unit: b, primary: o, step: t, var });
                }
            }
        }
    }

    let mut by_pair: BTreeMap<(usize, usize), Vec<DispatchVar>> = BTreeMap::new();
    for d in &dispatch {
        by_pair.entry((d.unit, d.primary)).or_default().push(*d);
    }

    // activation needs an arrived dispatch
    for a in &active {
        let mut terms = vec![(a.var, 1.0)];
        for d in &by_pair[&(a.unit, a.primary)] {
            if d.step + travel[d.unit][d.hub][d.primary] as usize <= a.step {
                terms.push((d.var, -1.0));
            }
        }
        ip.add_le(format!("arrival[{}]", ip.variables[a.var].name), &terms, 0.0);
    }

    // no second dispatch inside another failure's window
    for b in 0..nb {
        for o1 in 0..no {
            let Some(first) = by_pair.get(&(b, o1)) else { continue };
            for o2 in (0..no).filter(|&o2| o2 != o1) {
                let Some(second) = by_pair.get(&(b, o2)) else { continue };
                let overlapping: Vec<(usize, f64)> = second
                    .iter()
                    .filter(|d| scenario.failed_at(o1, d.step))
                    .map(|d| (d.var, 1.0))
                    .collect();
                if overlapping.is_empty() {
                    continue;
                }
                let mut terms = overlapping;
                terms.extend(first.iter().map(|d| (d.var, 1.0)));
                ip.add_le(
                    format!(
                        "exclusive[{},{},{}]",
                        scenario.backups[b].id, scenario.primaries[o1].id, scenario.primaries[o2].id
                    ),
                    &terms,
                    1.0,
                );
            }
        }
    }

    // one place at a time
    let mut by_unit_step: BTreeMap<(usize, usize), Vec<(usize, f64)>> = BTreeMap::new();
    for a in &active {
        by_unit_step.entry((a.unit, a.step)).or_default().push((a.var, 1.0));
    }
    for ((b, t), terms) in by_unit_step {
        if terms.len() > 1 {
            ip.add_le(format!("single_site[{},{t}]", scenario.backups[b].id), &terms, 1.0);
        }
    }

    for ((b, o), vars) in &by_pair {
        let terms: Vec<(usize, f64)> = vars.iter().map(|d| (d.var, 1.0)).collect();
        ip.add_le(
            format!("once[{},{}]", scenario.backups[*b].id, scenario.primaries[*o].id),
            &terms,
            1.0,
        );
    }

    for o in 0..no {
        let terms: Vec<(usize, f64)> = dispatch
            .iter()
            .filter(|d| d.primary == o)
            .map(|d| (d.var, 1.0))
            .collect();
        if terms.is_empty() {
            return Err(ResiliencyError::Unreachable(scenario.primaries[o].id.clone()));
        }
        ip.add_ge(format!("covered[{}]", scenario.primaries[o].id), &terms, 1.0);
    }

    Ok(ResiliencyModel { ip, dispatch, active, travel })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dispatch {
    pub unit: usize,
    pub hub: usize,
    pub primary: usize,
    pub step: usize,
    pub travel: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Activation {
    pub unit: usize,
    pub primary: usize,
    pub step: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DispatchSchedule {
    pub unit_ids: Vec<String>,
    pub hub_ids: Vec<String>,
    pub primary_ids: Vec<String>,
    pub dispatches: Vec<Dispatch>,
    pub activations: Vec<Activation>,
    /// `travel_time[b][h][o]` in steps.
    pub travel_time: Vec<Vec<Vec<u32>>>,
    pub objective: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ResiliencyOptions {
    pub node_budget: u64,
}

impl Default for ResiliencyOptions {
    fn default() -> Self {
        ResiliencyOptions {
            node_budget: DEFAULT_NODE_BUDGET,
        }
    }
}

/// Solves the dispatch program for `scenario`.
pub fn schedule(scenario: &FailureScenario, options: &ResiliencyOptions) -> Result<DispatchSchedule, ResiliencyError> {
    let model = build_resiliency_model(scenario)?;
    let solution = solve_bnb(&model.ip, options.node_budget)?;
    let x = match solution.status {
        SolveStatus::Optimal => solution.assignment.expect("optimal solutions carry an assignment"),
        SolveStatus::Infeasible => return Err(ResiliencyError::Infeasible),
        SolveStatus::Aborted => {
            return Err(ResiliencyError::Aborted {
                nodes: solution.nodes,
                best_objective: solution.objective_value,
            })
        }
    };
    let violations = check_feasible(&model.ip, &x)?;
    if !violations.is_empty() {
        return Err(ResiliencyError::Verification(violations));
    }
    let dispatches = model
        .dispatch
        .iter()
        .filter(|d| x[d.var] == 1)
        .map(|d| Dispatch {
            unit: d.unit,
            hub: d.hub,
            primary: d.primary,
            step: d.step,
            travel: model.travel[d.unit][d.hub][d.primary],
        })
        .collect();
    let activations = model
        .active
        .iter()
        .filter(|a| x[a.var] == 1)
        .map(|a| Activation {
            unit: a.unit,
            primary: a.primary,
            step: a.step,
        })
        .collect();
    Ok(DispatchSchedule {
        unit_ids: scenario.backups.iter().map(|b| b.id.clone()).collect(),
        hub_ids: scenario.hubs.iter().map(|h| h.id.clone()).collect(),
        primary_ids: scenario.primaries.iter().map(|p| p.id.clone()).collect(),
        dispatches,
        activations,
        travel_time: model.travel,
        objective: solution.objective_value.unwrap_or(0.0),
    })
}

/// Constraint family a schedule violation belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    /// Activity without an arrived dispatch.
    Arrival,
    /// Dispatch or activity outside the failure window, or from a
    /// hub the unit may not use.
    Window,
    /// Second dispatch of a unit inside another failure's window.
    Exclusive,
    /// Unit active at two primaries in one step.
    SingleSite,
    /// Unit dispatched twice to one primary.
    Once,
    /// Failure never covered.
    Coverage,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleViolation {
    pub rule: Rule,
    pub message: String,
}

/// Re-checks every rule of the dispatch model on `sched` directly from
/// the scenario. An empty result means the schedule is valid.
pub fn validate_schedule(sched: &DispatchSchedule, scenario: &FailureScenario) -> Vec<ScheduleViolation> {
    let travel = scenario_travel_times(scenario);
    let mut out = Vec::new();
    let mut push = |rule: Rule, message: String| out.push(ScheduleViolation { rule, message });
    let (nb, nh, no) = (scenario.backups.len(), scenario.hubs.len(), scenario.primaries.len());
    let name = |b: usize, o: usize| format!("unit {} at {}", scenario.backups[b].id, scenario.primaries[o].id);

    for d in &sched.dispatches {
        if d.unit >= nb || d.hub >= nh || d.primary >= no {
            push(Rule::Window, format!("dispatch {d:?} references unknown ids"));
            continue;
        }
        let tt = travel[d.unit][d.hub][d.primary] as usize;
        if !scenario.failed_at(d.primary, d.step) || d.step + tt >= scenario.fail_end(d.primary) {
            push(Rule::Window, format!("{} dispatched at {} cannot arrive in the window", name(d.unit, d.primary), d.step));
        }
        if !scenario.hub_allowed(d.unit, d.hub) {
            push(Rule::Window, format!("{} launched from hub {}", name(d.unit, d.primary), scenario.hubs[d.hub].id));
        }
    }
    let valid: Vec<&Dispatch> = sched
        .dispatches
        .iter()
        .filter(|d| d.unit < nb && d.hub < nh && d.primary < no)
        .collect();

    for a in &sched.activations {
        if a.unit >= nb || a.primary >= no {
            push(Rule::Arrival, format!("activation {a:?} references unknown ids"));
            continue;
        }
        if !scenario.failed_at(a.primary, a.step) {
            push(Rule::Window, format!("{} active at {} outside the failure", name(a.unit, a.primary), a.step));
        }
        let arrived = valid.iter().any(|d| {
            d.unit == a.unit
                && d.primary == a.primary
                && d.step + travel[d.unit][d.hub][d.primary] as usize <= a.step
        });
        if !arrived {
            push(Rule::Arrival, format!("{} active at {} before arriving", name(a.unit, a.primary), a.step));
        }
    }

    for (x, d1) in valid.iter().enumerate() {
        for d2 in &valid[x + 1..] {
            if d1.unit != d2.unit {
                continue;
            }
            if d1.primary == d2.primary {
                push(Rule::Once, format!("{} dispatched twice", name(d1.unit, d1.primary)));
            } else if scenario.failed_at(d1.primary, d2.step) || scenario.failed_at(d2.primary, d1.step) {
                push(
                    Rule::Exclusive,
                    format!(
                        "unit {} dispatched to {} and {} in overlapping windows",
                        scenario.backups[d1.unit].id, scenario.primaries[d1.primary].id, scenario.primaries[d2.primary].id
                    ),
                );
            }
        }
    }

    let mut seen: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for a in sched.activations.iter().filter(|a| a.unit < nb && a.primary < no) {
        if let Some(&other) = seen.get(&(a.unit, a.step)) {
            if other != a.primary {
                push(
                    Rule::SingleSite,
                    format!(
                        "unit {} active at {} and {} at step {}",
                        scenario.backups[a.unit].id, scenario.primaries[other].id, scenario.primaries[a.primary].id, a.step
                    ),
                );
            }
        } else {
            seen.insert((a.unit, a.step), a.primary);
        }
    }

    for o in 0..no {
        if !valid.iter().any(|d| d.primary == o) {
            push(Rule::Coverage, format!("failure of {} is never covered", scenario.primaries[o].id));
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DispatchSummary {
    pub unit: String,
    pub hub: String,
    pub site: String,
    pub dispatch_start: usize,
    pub travel: u32,
    pub arrival: usize,
    pub active_start: Option<usize>,
    /// Inclusive.
    pub active_end: Option<usize>,
    pub active_periods: usize,
}

/// One row per dispatch, in schedule order.
pub fn summarize(sched: &DispatchSchedule) -> Vec<DispatchSummary> {
    sched
        .dispatches
        .iter()
        .map(|d| {
            let steps: Vec<usize> = sched
                .activations
                .iter()
                .filter(|a| a.unit == d.unit && a.primary == d.primary)
                .map(|a| a.step)
                .collect();
            DispatchSummary {
                unit: sched.unit_ids[d.unit].clone(),
                hub: sched.hub_ids[d.hub].clone(),
                site: sched.primary_ids[d.primary].clone(),
                dispatch_start: d.step,
                travel: d.travel,
                arrival: d.step + d.travel as usize,
                active_start: steps.iter().min().copied(),
                active_end: steps.iter().max().copied(),
                active_periods: steps.len(),
            }
        })
        .collect()
}

/// Gantt rows `unit,site,start,end` with inclusive active step ranges.
pub fn write_gantt_csv<W: Write>(sched: &DispatchSchedule, writer: W) -> Result<(), ResiliencyError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["unit", "site", "start", "end"]).map_err(csv_err)?;
    for row in summarize(sched) {
        if let (Some(s), Some(e)) = (row.active_start, row.active_end) {
            w.write_record([row.unit, row.site, s.to_string(), e.to_string()])
                .map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> ResiliencyError {
    ResiliencyError::Io(std::io::Error::other(e))
}
