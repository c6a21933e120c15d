//! Corridor flight schedules: hourly demand apportionment, seeded
//! trajectory generation along a corridor polyline, and the tabular
//! schedule CSV (one time row per step, one column per aircraft).

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::terrain::{GeoPoint, LocalFrame, Point3, FEET_TO_METERS};

/// 400 ft.
pub const CRUISE_ALTITUDE_M: f64 = 121.92;
pub const DEFAULT_SPEED_MPS: f64 = 45.0;
pub const DEFAULT_STEP_SECONDS: u32 = 600;
pub const DEFAULT_WINDOW: (u32, u32) = (9, 18);

#[derive(Debug, Error)]
pub enum ScheduleError {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("mixture density is zero over the hour window {0}..{1}")]
    ZeroDensity(u32, u32),
    #[error("invalid window {0}..{1}")]
    InvalidWindow(u32, u32),
    #[error("invalid corridor: {0}")]
    InvalidCorridor(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UseCase {
    AirMetro,
    Emergency,
    Cargo,
}

impl UseCase {
    pub const ALL: [UseCase; 3] = [UseCase::AirMetro, UseCase::Emergency, UseCase::Cargo];

    pub fn label(self) -> &'static str {
        match self {
            UseCase::AirMetro => "Air Metro",
            UseCase::Emergency => "Emergency",
            UseCase::Cargo => "Cargo",
        }
    }

    fn from_column(name: &str) -> Option<UseCase> {
        Self::ALL.into_iter().find(|u| name.starts_with(u.label()))
    }

    pub fn default_distribution(self) -> TemporalDistribution {
        match self {
            UseCase::AirMetro => TemporalDistribution::trimodal([8.5, 12.0, 17.5], 1.5),
            UseCase::Emergency => TemporalDistribution::bimodal([10.5, 17.5], 1.5),
            UseCase::Cargo => TemporalDistribution::bimodal([10.0, 15.0], 1.5),
        }
    }
}

/// Daily flights per use case on one corridor.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DemandProfile {
    pub air_metro: u32,
    pub emergency: u32,
    pub cargo: u32,
}

impl DemandProfile {
    pub fn get(&self, u: UseCase) -> u32 {
        match u {
            UseCase::AirMetro => self.air_metro,
            UseCase::Emergency => self.emergency,
            UseCase::Cargo => self.cargo,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistributionKind {
    Bimodal,
    Trimodal,
}

/// Mixture of equal-spread Gaussian bumps over hour of day.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TemporalDistribution {
    pub kind: DistributionKind,
    pub mode_centers: Vec<f64>,
    pub mode_weights: Vec<f64>,
    pub spread: f64,
}

impl TemporalDistribution {
    pub fn bimodal(centers: [f64; 2], spread: f64) -> Self {
        TemporalDistribution {
            kind: DistributionKind::Bimodal,
            mode_centers: centers.to_vec(),
            mode_weights: vec![0.5; 2],
            spread,
        }
    }

    pub fn trimodal(centers: [f64; 3], spread: f64) -> Self {
        TemporalDistribution {
            kind: DistributionKind::Trimodal,
            mode_centers: centers.to_vec(),
            mode_weights: vec![1.0 / 3.0; 3],
            spread,
        }
    }

    pub fn validate(&self) -> Result<(), ScheduleError> {
        let want = match self.kind {
            DistributionKind::Bimodal => 2,
            DistributionKind::Trimodal => 3,
        };
        if self.mode_centers.len() != want || self.mode_weights.len() != want {
            return Err(ScheduleError::InvalidDistribution(format!(
                "{:?} needs {want} centers and weights, got {} and {}",
                self.kind,
                self.mode_centers.len(),
                self.mode_weights.len()
            )));
        }
        if self.mode_weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(ScheduleError::InvalidDistribution("negative weight".into()));
        }
        let total: f64 = self.mode_weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(ScheduleError::InvalidDistribution(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        if !(self.spread > 0.0) {
            return Err(ScheduleError::InvalidDistribution("spread must be positive".into()));
        }
        Ok(())
    }

    /// Unnormalised mixture density at hour-of-day `x`.
    pub fn density(&self, x: f64) -> f64 {
        let two_var = 2.0 * self.spread * self.spread;
        self.mode_centers
            .iter()
            .zip(&self.mode_weights)
            .map(|(c, w)| w * (-(x - c).powi(2) / two_var).exp())
            .sum()
    }
}

/// Splits `daily_count` across the hours `window.0..window.1` in proportion
/// to the mixture density at each hour's midpoint, using largest-remainder
/// rounding (ties go to the earlier hour). The result sums to `daily_count`.
pub fn hourly_allocation(
    daily_count: u32,
    dist: &TemporalDistribution,
    window: (u32, u32),
) -> Result<Vec<u32>, ScheduleError> {
    dist.validate()?;
    let (start, end) = window;
    if end <= start || end > 24 {
        return Err(ScheduleError::InvalidWindow(start, end));
    }
    let weights: Vec<f64> = (start..end).map(|h| dist.density(h as f64 + 0.5)).collect();
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(ScheduleError::ZeroDensity(start, end));
    }
    Ok(largest_remainder(daily_count, &weights, total))
}

fn largest_remainder(count: u32, weights: &[f64], total: f64) -> Vec<u32> {
    let quotas: Vec<f64> = weights.iter().map(|w| count as f64 * w / total).collect();
    let mut out: Vec<u32> = quotas.iter().map(|q| q.floor() as u32).collect();
    let assigned: u32 = out.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (quotas[a] - quotas[a].floor(), quotas[b] - quotas[b].floor());
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().take(count.saturating_sub(assigned) as usize) {
        out[i] += 1;
    }
    out
}

/// Corridor centreline as an ordered polyline. Distances are measured in
/// the supplied local frame; waypoint altitudes are ignored.
#[derive(Clone, Debug, PartialEq)]
pub struct CorridorPath {
    pub name: String,
    pub waypoints: Vec<GeoPoint>,
    pub cumulative_length: Vec<f64>,
    frame: LocalFrame,
    local: Vec<Point3>,
}

impl CorridorPath {
    pub fn new(
        name: impl Into<String>,
        waypoints: Vec<GeoPoint>,
        frame: LocalFrame,
    ) -> Result<Self, ScheduleError> {
        if waypoints.len() < 2 {
            return Err(ScheduleError::InvalidCorridor("needs at least two waypoints".into()));
        }
        let local: Vec<Point3> = waypoints
            .iter()
            .map(|w| {
                let p = frame.to_local(w);
                Point3::new(p.x, p.y, 0.0)
            })
            .collect();
        let mut cumulative_length = vec![0.0];
        for w in local.windows(2) {
            let seg = w[0].horizontal_distance(&w[1]);
            if !(seg > 0.0) {
                return Err(ScheduleError::InvalidCorridor("repeated waypoint".into()));
            }
            cumulative_length.push(cumulative_length.last().unwrap() + seg);
        }
        Ok(CorridorPath {
            name: name.into(),
            waypoints,
            cumulative_length,
            frame,
            local,
        })
    }

    /// Corridor in a frame centred on its own waypoints.
    pub fn with_own_frame(
        name: impl Into<String>,
        waypoints: Vec<GeoPoint>,
    ) -> Result<Self, ScheduleError> {
        let frame = LocalFrame::centered_on(waypoints.iter())
            .ok_or_else(|| ScheduleError::InvalidCorridor("no waypoints".into()))?;
        Self::new(name, waypoints, frame)
    }

    pub fn frame(&self) -> &LocalFrame {
        &self.frame
    }

    pub fn length(&self) -> f64 {
        *self.cumulative_length.last().unwrap()
    }

    /// Local-frame point at arc length `s` (clamped to the corridor).
    pub fn local_point_at(&self, s: f64) -> Point3 {
        let s = s.clamp(0.0, self.length());
        let seg = match self
            .cumulative_length
            .binary_search_by(|c| c.total_cmp(&s))
        {
            Ok(i) => i.min(self.local.len() - 2),
            Err(i) => i.saturating_sub(1).min(self.local.len() - 2),
        };
        let (a, b) = (&self.local[seg], &self.local[seg + 1]);
        let seg_len = self.cumulative_length[seg + 1] - self.cumulative_length[seg];
        let t = (s - self.cumulative_length[seg]) / seg_len;
        Point3::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y), 0.0)
    }

    pub fn point_at(&self, s: f64, altitude: f64) -> GeoPoint {
        let p = self.local_point_at(s);
        self.frame.to_geo(&Point3::new(p.x, p.y, altitude))
    }

    /// Evenly spaced arc-length samples including both ends.
    pub fn sample(&self, spacing: f64) -> Vec<f64> {
        let len = self.length();
        let n = (len / spacing).ceil().max(1.0) as usize;
        (0..=n).map(|i| len * i as f64 / n as f64).collect()
    }

    /// Horizontal distance from a local-frame point to the polyline.
    pub fn distance_to(&self, p: &Point3) -> f64 {
        self.local
            .windows(2)
            .map(|w| point_segment_distance(p, &w[0], &w[1]))
            .fold(f64::INFINITY, f64::min)
    }
}

fn point_segment_distance(p: &Point3, a: &Point3, b: &Point3) -> f64 {
    let (vx, vy) = (b.x - a.x, b.y - a.y);
    let len2 = vx * vx + vy * vy;
    let t = if len2 > 0.0 {
        (((p.x - a.x) * vx + (p.y - a.y) * vy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (p.x - a.x - t * vx).hypot(p.y - a.y - t * vy)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Aircraft {
    pub name: String,
    pub use_case: UseCase,
}

/// Time-stepped aircraft positions. Aircraft ids are logical slots that may
/// fly several sorties separated by gaps.
#[derive(Clone, Debug, PartialEq)]
pub struct FlightSchedule {
    pub step_seconds: u32,
    /// Seconds after midnight of step 0.
    pub start_seconds: u32,
    pub aircraft: Vec<Aircraft>,
    /// `positions[k][t]`.
    pub positions: Vec<Vec<Option<GeoPoint>>>,
    num_steps: usize,
}

impl FlightSchedule {
    pub fn new(
        step_seconds: u32,
        start_seconds: u32,
        num_steps: usize,
        aircraft: Vec<Aircraft>,
        positions: Vec<Vec<Option<GeoPoint>>>,
    ) -> Result<Self, ScheduleError> {
        if step_seconds == 0 {
            return Err(ScheduleError::InvalidParameter("step_seconds must be positive".into()));
        }
        if positions.len() != aircraft.len() || positions.iter().any(|p| p.len() != num_steps) {
            return Err(ScheduleError::InvalidParameter(
                "positions must be |aircraft| x num_steps".into(),
            ));
        }
        Ok(FlightSchedule {
            step_seconds,
            start_seconds,
            aircraft,
            positions,
            num_steps,
        })
    }

    pub fn empty(step_seconds: u32, start_seconds: u32, num_steps: usize) -> Self {
        FlightSchedule {
            step_seconds,
            start_seconds,
            aircraft: Vec::new(),
            positions: Vec::new(),
            num_steps,
        }
    }

    pub fn num_steps(&self) -> usize {
        self.num_steps
    }

    pub fn num_aircraft(&self) -> usize {
        self.aircraft.len()
    }

    pub fn timestamp(&self, step: usize) -> u32 {
        self.start_seconds + step as u32 * self.step_seconds
    }

    pub fn position(&self, aircraft: usize, step: usize) -> Option<&GeoPoint> {
        self.positions[aircraft][step].as_ref()
    }

    /// Number of aircraft present at each step.
    pub fn presence_counts(&self) -> Vec<usize> {
        (0..self.num_steps)
            .map(|t| self.positions.iter().filter(|p| p[t].is_some()).count())
            .collect()
    }

    /// Keeps only the aircraft for which `keep` returns true.
    pub fn retain_aircraft(&self, mut keep: impl FnMut(usize) -> bool) -> FlightSchedule {
        let ids: Vec<usize> = (0..self.aircraft.len()).filter(|&k| keep(k)).collect();
        FlightSchedule {
            step_seconds: self.step_seconds,
            start_seconds: self.start_seconds,
            aircraft: ids.iter().map(|&k| self.aircraft[k].clone()).collect(),
            positions: ids.iter().map(|&k| self.positions[k].clone()).collect(),
            num_steps: self.num_steps,
        }
    }

    pub fn write_csv<W: Write>(&self, mut writer: W, comment: Option<&str>) -> Result<(), ScheduleError> {
        if let Some(c) = comment {
            writeln!(writer, "# {c}")?;
        }
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["Time".to_string()];
        header.extend(self.aircraft.iter().map(|a| a.name.clone()));
        w.write_record(&header)?;
        for t in 0..self.num_steps {
            let mut row = vec![format_clock(self.timestamp(t))];
            for k in 0..self.aircraft.len() {
                row.push(match &self.positions[k][t] {
                    None => "-".to_string(),
                    Some(p) => format!(
                        "{:.7}, {:.7}, {:.2}",
                        p.longitude,
                        p.latitude,
                        p.altitude / FEET_TO_METERS
                    ),
                });
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self, comment: Option<&str>) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf, comment).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is utf-8")
    }

    /// Parses the schedule CSV. Lines starting with `#` are skipped. The
    /// step length comes from the first two time rows (600 s when there is
    /// only one row).
    pub fn read_csv<R: Read>(mut reader: R) -> Result<FlightSchedule, ScheduleError> {
        let mut text = String::new();
        reader.read_to_string(&mut text)?;
        // keep line numbers meaningful while dropping comments
        let body: String = text
            .lines()
            .map(|l| if l.starts_with('#') { "" } else { l })
            .collect::<Vec<_>>()
            .join("\n");
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_reader(body.as_bytes());
        let mut header: Option<Vec<String>> = None;
        let mut times = Vec::new();
        let mut cells: Vec<Vec<Option<GeoPoint>>> = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
            if rec.iter().all(|f| f.trim().is_empty()) {
                continue;
            }
            let Some(h) = &header else {
                if rec.get(0).map(str::trim) != Some("Time") {
                    return Err(ScheduleError::Parse {
                        line,
                        message: "first column must be 'Time'".into(),
                    });
                }
                header = Some(rec.iter().map(|s| s.trim().to_string()).collect());
                continue;
            };
            if rec.len() != h.len() {
                return Err(ScheduleError::Parse {
                    line,
                    message: format!("ragged row: {} fields, header has {}", rec.len(), h.len()),
                });
            }
            times.push(parse_clock(rec[0].trim()).ok_or_else(|| ScheduleError::Parse {
                line,
                message: format!("bad time '{}'", &rec[0]),
            })?);
            let row = rec
                .iter()
                .skip(1)
                .map(|c| parse_cell(c).map_err(|message| ScheduleError::Parse { line, message }))
                .collect::<Result<Vec<_>, _>>()?;
            cells.push(row);
        }
        let header = header.ok_or(ScheduleError::Parse {
            line: 1,
            message: "missing header".into(),
        })?;
        let aircraft = header[1..]
            .iter()
            .map(|name| {
                UseCase::from_column(name)
                    .map(|use_case| Aircraft {
                        name: name.clone(),
                        use_case,
                    })
                    .ok_or_else(|| ScheduleError::Parse {
                        line: 1,
                        message: format!("aircraft column '{name}' has no known use-case prefix"),
                    })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let step_seconds = if times.len() >= 2 {
            times[1].checked_sub(times[0]).filter(|s| *s > 0).ok_or(ScheduleError::Parse {
                line: 3,
                message: "times must increase".into(),
            })?
        } else {
            DEFAULT_STEP_SECONDS
        };
        for (i, w) in times.windows(2).enumerate() {
            if w[1] != w[0] + step_seconds {
                return Err(ScheduleError::Parse {
                    line: i + 3,
                    message: "time rows are not uniformly spaced".into(),
                });
            }
        }
        let num_steps = times.len();
        let positions = (0..aircraft.len())
            .map(|k| cells.iter().map(|row| row[k]).collect())
            .collect();
        FlightSchedule::new(
            step_seconds,
            times.first().copied().unwrap_or(0),
            num_steps,
            aircraft,
            positions,
        )
    }
}

fn format_clock(seconds: u32) -> String {
    format!("{}:{:02}", seconds / 3600, (seconds % 3600) / 60)
}

fn parse_clock(s: &str) -> Option<u32> {
    let (h, m) = s.split_once(':')?;
    let (h, m): (u32, u32) = (h.parse().ok()?, m.parse().ok()?);
    (m < 60).then_some(h * 3600 + m * 60)
}

fn parse_cell(cell: &str) -> Result<Option<GeoPoint>, String> {
    let cell = cell.trim();
    if cell == "-" {
        return Ok(None);
    }
    let parts: Vec<&str> = cell.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("cell '{cell}' is not 'lon, lat, alt_ft' or '-'"));
    }
    let v: Vec<f64> = parts
        .iter()
        .map(|p| p.parse::<f64>().map_err(|_| format!("'{p}' is not a number")))
        .collect::<Result<_, _>>()?;
    GeoPoint::new(v[0], v[1], v[2] * FEET_TO_METERS)
        .map(Some)
        .map_err(|e| e.to_string())
}

/// Parameters of trajectory generation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryParams {
    pub speed_mps: f64,
    pub step_seconds: u32,
    pub window_start_hour: u32,
    pub cruise_altitude_m: f64,
}

impl Default for TrajectoryParams {
    fn default() -> Self {
        TrajectoryParams {
            speed_mps: DEFAULT_SPEED_MPS,
            step_seconds: DEFAULT_STEP_SECONDS,
            window_start_hour: DEFAULT_WINDOW.0,
            cruise_altitude_m: CRUISE_ALTITUDE_M,
        }
    }
}

struct Flight {
    use_case: UseCase,
    departure_step: usize,
    forward: bool,
    order: usize,
}

/// Generates one flight per apportioned count. Each flight departs at a
/// seeded-random minute of its hour, snaps to the next step boundary, and
/// flies the whole corridor at constant ground speed, alternating
/// direction. It is reported at its departure step and at each following
/// step until it reaches the far end (at least one further step).
pub fn generate_trajectories(
    corridor: &CorridorPath,
    hourly: &[(UseCase, Vec<u32>)],
    params: &TrajectoryParams,
    seed: u64,
) -> Result<FlightSchedule, ScheduleError> {
    if !(params.speed_mps > 0.0) || params.step_seconds == 0 {
        return Err(ScheduleError::InvalidParameter(
            "speed and step length must be positive".into(),
        ));
    }
    let step = params.step_seconds as f64;
    let start_seconds = params.window_start_hour * 3600;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut flights = Vec::new();
    let mut window_hours = 0usize;
    for (use_case, counts) in hourly {
        window_hours = window_hours.max(counts.len());
        for (h, &count) in counts.iter().enumerate() {
            for _ in 0..count {
                let minute: u32 = rng.gen_range(0..60);
                let offset = (h as u32 * 3600 + minute * 60) as f64;
                flights.push(Flight {
                    use_case: *use_case,
                    departure_step: (offset / step).ceil() as usize,
                    forward: flights.len() % 2 == 0,
                    order: flights.len(),
                });
            }
        }
    }
    let length = corridor.length();
    let hop = params.speed_mps * step;
    let travel_steps = ((length / hop).ceil() as usize).max(1);
    let window_steps = ((window_hours as f64 * 3600.0) / step).ceil() as usize;
    let num_steps = flights
        .iter()
        .map(|f| f.departure_step + travel_steps + 1)
        .max()
        .unwrap_or(0)
        .max(window_steps);

    let mut aircraft = Vec::new();
    let mut positions: Vec<Vec<Option<GeoPoint>>> = Vec::new();
    for use_case in UseCase::ALL {
        let mut mine: Vec<&Flight> = flights.iter().filter(|f| f.use_case == use_case).collect();
        mine.sort_by_key(|f| (f.departure_step, f.order));
        // last occupied step of each slot
        let mut slot_end: Vec<usize> = Vec::new();
        let first_slot = aircraft.len();
        for f in mine {
            let last = f.departure_step + travel_steps;
            let slot = match slot_end.iter().position(|&end| end < f.departure_step) {
                Some(s) => s,
                None => {
                    slot_end.push(0);
                    aircraft.push(Aircraft {
                        name: format!("{} Craft {}", use_case.label(), slot_end.len()),
                        use_case,
                    });
                    positions.push(vec![None; num_steps]);
                    slot_end.len() - 1
                }
            };
            slot_end[slot] = last;
            let track = &mut positions[first_slot + slot];
            for j in 0..=travel_steps {
                let along = (j as f64 * hop).min(length);
                let s = if f.forward { along } else { length - along };
                track[f.departure_step + j] = Some(corridor.point_at(s, params.cruise_altitude_m));
            }
        }
    }
    FlightSchedule::new(params.step_seconds, start_seconds, num_steps, aircraft, positions)
}

/// Apportions a demand profile over the window with each use case's
/// distribution and generates the schedule.
pub fn schedule_from_demand(
    corridor: &CorridorPath,
    demand: &DemandProfile,
    distributions: &[(UseCase, TemporalDistribution)],
    window: (u32, u32),
    params: &TrajectoryParams,
    seed: u64,
) -> Result<FlightSchedule, ScheduleError> {
    let mut hourly = Vec::new();
    for use_case in UseCase::ALL {
        let dist = distributions
            .iter()
            .find(|(u, _)| *u == use_case)
            .map(|(_, d)| d.clone())
            .unwrap_or_else(|| use_case.default_distribution());
        hourly.push((use_case, hourly_allocation(demand.get(use_case), &dist, window)?));
    }
    let params = TrajectoryParams {
        window_start_hour: window.0,
        ..*params
    };
    generate_trajectories(corridor, &hourly, &params, seed)
}
