//! Fixtures and independent oracles shared by the integration tests.

#![allow(dead_code)]

use rand::Rng;
use sam3r_core::detection::{CandidateSite, SensorSpec};
use sam3r_core::los::LosParams;
use sam3r_core::resiliency::{BackupUnit, FailedPrimary, FailureScenario, Hub, Platform};
use sam3r_core::schedule::{Aircraft, CorridorPath, FlightSchedule, UseCase};
use sam3r_core::solver::IntegerProgram;
use sam3r_core::terrain::{GeoPoint, LocalFrame, Point3, TerrainClass, TerrainCloud, TerrainPoint};

pub const ORIGIN: (f64, f64) = (-82.99, 39.96);

pub fn origin_frame() -> LocalFrame {
    LocalFrame::new(GeoPoint::new(ORIGIN.0, ORIGIN.1, 0.0).unwrap())
}

/// Random terrain in a `size` x `size` metre square around the origin.
pub fn random_cloud<R: Rng>(rng: &mut R, n: usize, size: f64, cell: f64) -> TerrainCloud {
    let frame = origin_frame();
    let points = (0..n)
        .map(|_| {
            let local = Point3::new(
                rng.gen_range(-size / 2.0..size / 2.0),
                rng.gen_range(-size / 2.0..size / 2.0),
                rng.gen_range(0.0..40.0),
            );
            let class = TerrainClass::ALL[rng.gen_range(0..TerrainClass::ALL.len())];
            TerrainPoint {
                position: frame.to_geo(&local),
                class,
            }
        })
        .collect();
    TerrainCloud::with_frame(points, frame, cell).unwrap()
}

/// Full-scan sightline test: (candidate count, blocked count). Written
/// from the definition: project each point onto the horizontal segment,
/// keep those on it and within the radius, then compare with the line height.
pub fn brute_force_obstruction(sensor: &Point3, target: &Point3, cloud: &TerrainCloud, params: &LosParams) -> (usize, usize) {
    let dx = target.x - sensor.x;
    let dy = target.y - sensor.y;
    let len = (dx * dx + dy * dy).sqrt();
    if len < 1e-9 {
        return (0, 0);
    }
    let (mut candidates, mut blocked) = (0, 0);
    for p in cloud.local_points() {
        let along = ((p.x - sensor.x) * dx + (p.y - sensor.y) * dy) / len;
        if along < 0.0 || along > len {
            continue;
        }
        let fx = sensor.x + along * dx / len;
        let fy = sensor.y + along * dy / len;
        if ((p.x - fx).powi(2) + (p.y - fy).powi(2)).sqrt() > params.radius {
            continue;
        }
        candidates += 1;
        let line_z = sensor.z + (target.z - sensor.z) * along / len;
        if p.z >= line_z - params.vertical_tolerance {
            blocked += 1;
        }
    }
    (candidates, blocked)
}

/// Random bounded integer program with a feasible point planted inside
/// every row. Returns the program and the planted point.
pub fn random_feasible_ip<R: Rng>(rng: &mut R, max_vars: usize, max_domain: i64) -> (IntegerProgram, Vec<i64>) {
    let n = rng.gen_range(1..=max_vars);
    let mut ip = IntegerProgram::new();
    let mut planted = Vec::with_capacity(n);
    for j in 0..n {
        let lower = rng.gen_range(-1..=1);
        let upper = lower + rng.gen_range(0..max_domain);
        ip.add_integer(format!("x{j}"), lower, upper);
        planted.push(rng.gen_range(lower..=upper));
        ip.set_objective(j, rng.gen_range(-5..=5) as f64);
    }
    for r in 0..rng.gen_range(1..=5) {
        let mut terms = Vec::new();
        for j in 0..n {
            if rng.gen_bool(0.6) {
                terms.push((j, rng.gen_range(-4..=4) as f64));
            }
        }
        let activity: f64 = terms.iter().map(|&(j, a)| a * planted[j] as f64).sum();
        let slack = rng.gen_range(0..=3) as f64;
        if rng.gen_bool(0.5) {
            ip.add_le(format!("r{r}"), &terms, activity + slack);
        } else {
            ip.add_ge(format!("r{r}"), &terms, activity - slack);
        }
    }
    (ip, planted)
}

/// East-west corridor of `length` metres through the origin.
pub fn straight_corridor(length: f64) -> CorridorPath {
    let frame = origin_frame();
    let a = frame.to_geo(&Point3::new(-length / 2.0, 0.0, 0.0));
    let b = frame.to_geo(&Point3::new(length / 2.0, 0.0, 0.0));
    CorridorPath::new("test", vec![a, b], frame).unwrap()
}

/// Aircraft `k` sits at corridor offset `offsets[k]` at every step in
/// `steps[k]`, at `altitude` metres.
pub fn parked_schedule(corridor: &CorridorPath, offsets: &[f64], steps: &[std::ops::Range<usize>], num_steps: usize, altitude: f64) -> FlightSchedule {
    let aircraft = (0..offsets.len())
        .map(|k| Aircraft {
            name: format!("Cargo Craft {}", k + 1),
            use_case: UseCase::Cargo,
        })
        .collect();
    let positions = offsets
        .iter()
        .zip(steps)
        .map(|(&s, range)| {
            (0..num_steps)
                .map(|t| range.contains(&t).then(|| corridor.point_at(s, altitude)))
                .collect()
        })
        .collect();
    FlightSchedule::new(600, 9 * 3600, num_steps, aircraft, positions).unwrap()
}

pub fn single_site() -> CandidateSite {
    CandidateSite {
        id: 0,
        position: GeoPoint::new(ORIGIN.0, ORIGIN.1, 0.0).unwrap(),
        mast_height: 10.0,
        capacity: 6,
    }
}

pub fn without(catalog: &[SensorSpec], id: &str) -> Vec<SensorSpec> {
    catalog.iter().filter(|s| s.id != id).cloned().collect()
}

/// Random dispatch scenario: primaries and hubs scattered within a few
/// kilometres, failure windows inside the horizon.
pub fn random_scenario<R: Rng>(rng: &mut R, max_primaries: usize, max_backups: usize, horizon: usize) -> FailureScenario {
    let frame = origin_frame();
    let at = |rng: &mut R| frame.to_geo(&Point3::new(rng.gen_range(-8000.0..8000.0), rng.gen_range(-8000.0..8000.0), 0.0));
    let hubs = (0..rng.gen_range(1..=2))
        .map(|h| Hub {
            id: format!("hub{h}"),
            position: at(rng),
        })
        .collect::<Vec<_>>();
    let backups = (0..rng.gen_range(1..=max_backups))
        .map(|b| BackupUnit {
            id: format!("unit{b}"),
            model: String::new(),
            platform: if rng.gen_bool(0.3) { Platform::GroundVehicle } else { Platform::Uav },
            prob: [0.725, 0.8, 0.93, 0.95][rng.gen_range(0..4)],
            speed_mps: rng.gen_range(8.0..25.0),
            home_hub: if hubs.len() > 1 && rng.gen_bool(0.3) { Some(hubs[rng.gen_range(0..hubs.len())].id.clone()) } else { None },
            range_km: None,
            tracking_capacity: None,
            weight_kg: None,
        })
        .collect();
    let primaries = (0..rng.gen_range(1..=max_primaries))
        .map(|o| {
            let fail_time = rng.gen_range(0..horizon - 2);
            FailedPrimary {
                id: format!("site{o}"),
                position: at(rng),
                fail_time,
                repair_time: rng.gen_range(1..=(horizon - fail_time).min(15)),
            }
        })
        .collect();
    FailureScenario {
        step_seconds: 600,
        horizon,
        detour_factor: 1.4,
        hubs,
        backups,
        primaries,
    }
}

/// Optimal dispatch objective by enumeration, or `None` if no schedule
/// exists. Each unit picks a subset of failures and one hub for each. The
/// step is the earliest one in the failure window that arrives before the
/// repair and does not fall inside another chosen failure's window. An
/// earlier arrival only adds activity, so this loses nothing. A unit
/// earns its probability in every step where some chosen failure has
/// its unit arrived and is not yet repaired.
pub fn dispatch_oracle(scenario: &FailureScenario, travel: &[Vec<Vec<u32>>]) -> Option<f64> {
    let no = scenario.primaries.len();
    let window = |o: usize| {
        let p = &scenario.primaries[o];
        (p.fail_time, (p.fail_time + p.repair_time).min(scenario.horizon))
    };

    // Per unit: every feasible option as (covered mask, cost).
    let per_unit: Vec<Vec<(u32, f64)>> = scenario
        .backups
        .iter()
        .enumerate()
        .map(|(b, unit)| {
            let hubs: Vec<usize> = (0..scenario.hubs.len())
                .filter(|&h| unit.home_hub.as_ref().is_none_or(|id| *id == scenario.hubs[h].id))
                .collect();
            let mut options = vec![(0u32, 0.0)];
            for mask in 1u32..(1 << no) {
                let chosen: Vec<usize> = (0..no).filter(|o| mask & (1 << o) != 0).collect();
                // hub choice per chosen failure, enumerated as a mixed-radix counter
                let mut pick = vec![0usize; chosen.len()];
                'hubs: loop {
                    let mut cost = 0.0;
                    let mut arrivals = Vec::new();
                    let mut ok = true;
                    for (c, &o) in chosen.iter().enumerate() {
                        let h = hubs[pick[c]];
                        let tt = travel[b][h][o] as usize;
                        let (f, e) = window(o);
                        let step = (f..e).find(|&t| {
                            t + tt < e
                                && chosen
                                    .iter()
                                    .filter(|&&o2| o2 != o)
                                    .all(|&o2| !(window(o2).0..window(o2).1).contains(&t))
                        });
                        match step {
                            Some(t) => {
                                cost += tt as f64;
                                arrivals.push((t + tt, e));
                            }
                            None => {
                                ok = false;
                                break;
                            }
                        }
                    }
                    if ok {
                        let active = (0..scenario.horizon)
                            .filter(|&t| arrivals.iter().any(|&(a, e)| a <= t && t < e))
                            .count();
                        options.push((mask, cost - unit.prob * active as f64));
                    }
                    if hubs.is_empty() {
                        break;
                    }
                    for c in 0..pick.len() {
                        pick[c] += 1;
                        if pick[c] < hubs.len() {
                            continue 'hubs;
                        }
                        pick[c] = 0;
                    }
                    break;
                }
            }
            options
        })
        .collect();

    let full = (1u32 << no) - 1;
    let mut best: Option<f64> = None;
    let mut idx = vec![0usize; per_unit.len()];
    loop {
        let mask = idx.iter().enumerate().fold(0, |m, (b, &i)| m | per_unit[b][i].0);
        if mask == full {
            let z: f64 = idx.iter().enumerate().map(|(b, &i)| per_unit[b][i].1).sum();
            if best.is_none_or(|v| z < v) {
                best = Some(z);
            }
        }
        let mut b = 0;
        loop {
            if b == idx.len() {
                return best;
            }
            idx[b] += 1;
            if idx[b] < per_unit[b].len() {
                break;
            }
            idx[b] = 0;
            b += 1;
        }
    }
}
