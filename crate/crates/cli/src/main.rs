//! `sam3r`: command-line front end for the planning toolkit.
//!
//! Exit codes: 0 success, 1 usage error, 2 input or parse error, 3 model
//! infeasible or validation failed (a diagnostic file is written), 4 solver
//! budget exhausted.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use sam3r_core::artifacts::{
    self, AugmentationArtifact, DispatchArtifact, PlanArtifact, PlotRow, Provenance, TensorArtifact,
};
use sam3r_core::config::{CorridorConfig, ToolkitConfig};
use sam3r_core::detection::{build_tensor, bundled_catalog, candidate_sites_along, parse_catalog};
use sam3r_core::reliability::{self, PlanError, ReliabilityOptions};
use sam3r_core::resiliency::{self, FailureScenario, ResiliencyError, ResiliencyOptions};
use sam3r_core::robustness::{self, RobustnessParams};
use sam3r_core::schedule::{schedule_from_demand, CorridorPath, FlightSchedule, TrajectoryParams};
use sam3r_core::terrain::{load_dsm, GeoPoint, TerrainCloud};
use serde::de::DeserializeOwned;

#[derive(Parser)]
#[command(name = "sam3r", version, about = "Terrain-aware surveillance sensor network planning")]
struct Cli {
    /// Toolkit config (JSON). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a DSM CSV (longitude, latitude, altitude in feet, class) into a binary cache.
    IngestDsm {
        /// DSM CSV; defaults to `paths.dsm` from the config.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        output: PathBuf,
    },
    /// Reclassify unclassified points by height above local ground.
    Reclassify {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Neighbourhood radius in metres; defaults to `terrain.ground_radius`.
        #[arg(long)]
        radius: Option<f64>,
        /// Write a DSM CSV instead of the binary cache.
        #[arg(long)]
        csv: bool,
    },
    /// Generate a seeded flight schedule for one corridor.
    GenSchedule {
        #[arg(long)]
        corridor: String,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Use the corridor's surge demand instead of the baseline.
        #[arg(long)]
        surge: bool,
        #[arg(long)]
        output: PathBuf,
    },
    /// Evaluate the detection tensor for a corridor and schedule.
    BuildTensor {
        #[arg(long)]
        corridor: String,
        /// Schedule CSV; defaults to `paths.schedule`.
        #[arg(long)]
        schedule: Option<PathBuf>,
        /// Terrain cache; without one the corridor is treated as open ground.
        #[arg(long)]
        terrain: Option<PathBuf>,
        /// Sensor catalog JSON; defaults to `paths.catalog`, then the bundled catalog.
        #[arg(long)]
        catalog: Option<PathBuf>,
        #[arg(long)]
        output: PathBuf,
    },
    /// Minimum-cost placement meeting the reliability threshold.
    PlanReliability {
        #[arg(long)]
        tensor: PathBuf,
        /// Overrides `planner.threshold`.
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        diag: Diagnostic,
    },
    /// Cheapest additions to an existing plan under a surged schedule.
    PlanRobustness {
        /// Baseline plan artifact.
        #[arg(long)]
        plan: PathBuf,
        /// Tensor artifact built from the surged schedule.
        #[arg(long)]
        tensor: PathBuf,
        /// Overrides `planner.sigma`.
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        diag: Diagnostic,
    },
    /// Backup dispatch schedule for a failure scenario.
    PlanResiliency {
        /// Scenario JSON; defaults to `paths.scenario`.
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long)]
        output: PathBuf,
        /// Also write a Gantt CSV (unit, site, start, end).
        #[arg(long)]
        gantt: Option<PathBuf>,
        #[command(flatten)]
        diag: Diagnostic,
    },
    /// Re-check an artifact against its model.
    Validate {
        #[command(flatten)]
        target: ValidateTarget,
        #[arg(long)]
        tensor: Option<PathBuf>,
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[command(flatten)]
        diag: Diagnostic,
    },
    /// GeoJSON map of a plan, an augmentation, or a scenario's hubs.
    ExportGeojson {
        #[command(flatten)]
        source: GeojsonSource,
        #[arg(long)]
        output: PathBuf,
    },
    /// Threshold sweep (threshold, sensor count, total cost) per corridor.
    EmitPlot {
        /// One tensor artifact per corridor.
        #[arg(long, required = true)]
        tensor: Vec<PathBuf>,
        #[arg(long)]
        output: PathBuf,
    },
}

#[derive(Args)]
struct Diagnostic {
    /// Where to write the diagnostic on exit code 3; defaults to `<output>.diagnostic.txt`.
    #[arg(long)]
    diagnostic: Option<PathBuf>,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct ValidateTarget {
    #[arg(long)]
    plan: Option<PathBuf>,
    #[arg(long)]
    augmentation: Option<PathBuf>,
    #[arg(long)]
    dispatch: Option<PathBuf>,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct GeojsonSource {
    #[arg(long)]
    plan: Option<PathBuf>,
    #[arg(long)]
    augmentation: Option<PathBuf>,
    #[arg(long)]
    scenario: Option<PathBuf>,
}

/// A failed command: exit code, message, and where to put the diagnostic.
struct Failure {
    code: u8,
    error: anyhow::Error,
    diagnostic: Option<PathBuf>,
}

impl Failure {
    fn new(code: u8, error: impl Into<anyhow::Error>) -> Self {
        Failure {
            code,
            error: error.into(),
            diagnostic: None,
        }
    }

    fn input(error: impl Into<anyhow::Error>) -> Self {
        Self::new(2, error)
    }

    fn with_diagnostic(mut self, path: PathBuf) -> Self {
        self.diagnostic = Some(path);
        self
    }
}

type Outcome = Result<(), Failure>;

fn plan_failure(e: PlanError) -> Failure {
    let code = match e {
        PlanError::ThresholdUnreachable { .. }
        | PlanError::StructurallyInfeasible { .. }
        | PlanError::Infeasible
        | PlanError::Verification(_) => 3,
        PlanError::Aborted { .. } => 4,
        PlanError::DimensionMismatch(_) | PlanError::InvalidThreshold(_) | PlanError::Solver(_) => 2,
    };
    Failure::new(code, e)
}

fn resiliency_failure(e: ResiliencyError) -> Failure {
    let code = match e {
        ResiliencyError::Unreachable(_) | ResiliencyError::Infeasible | ResiliencyError::Verification(_) => 3,
        ResiliencyError::Aborted { .. } => 4,
        _ => 2,
    };
    Failure::new(code, e)
}

fn diagnostic_path(diag: &Diagnostic, output: &Path) -> PathBuf {
    diag.diagnostic.clone().unwrap_or_else(|| {
        let mut s = output.as_os_str().to_owned();
        s.push(".diagnostic.txt");
        PathBuf::from(s)
    })
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(Failure::input)
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    serde_json::from_str(&read(path)?)
        .with_context(|| format!("parsing {}", path.display()))
        .map_err(Failure::input)
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Outcome {
    fs::write(path, contents)
        .with_context(|| format!("writing {}", path.display()))
        .map_err(|e| Failure::new(2, e))
}

fn open(path: &Path) -> Result<BufReader<fs::File>, Failure> {
    fs::File::open(path)
        .map(BufReader::new)
        .with_context(|| format!("opening {}", path.display()))
        .map_err(Failure::input)
}

fn from_config(path: Option<PathBuf>, fallback: &Option<PathBuf>, what: &str) -> Result<PathBuf, Failure> {
    path.or_else(|| fallback.clone())
        .ok_or_else(|| Failure::new(1, anyhow!("no {what} given on the command line or in the config")))
}

fn corridor_path(c: &CorridorConfig) -> Result<CorridorPath, Failure> {
    let waypoints = c
        .waypoints
        .iter()
        .map(|[lon, lat]| GeoPoint::new(*lon, *lat, 0.0))
        .collect::<Result<Vec<_>, _>>()
        .map_err(Failure::input)?;
    CorridorPath::with_own_frame(c.name.clone(), waypoints).map_err(Failure::input)
}

struct Ctx {
    cfg: ToolkitConfig,
}

impl Ctx {
    fn provenance(&self) -> Provenance {
        Provenance {
            config_hash: self.cfg.hash(),
            seed: self.cfg.seed,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            if let Some(path) = &f.diagnostic {
                let text = format!("exit {}\n{:#}\n", f.code, f.error);
                match fs::write(path, text) {
                    Ok(()) => eprintln!("diagnostic written to {}", path.display()),
                    Err(e) => eprintln!("could not write diagnostic {}: {e}", path.display()),
                }
            }
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> Outcome {
    let mut cfg = match &cli.config {
        Some(path) => ToolkitConfig::load(path).map_err(Failure::input)?,
        None => ToolkitConfig::default(),
    };
    if let Command::GenSchedule { seed: Some(seed), .. } = &cli.command {
        cfg.seed = Some(*seed);
    }
    let ctx = Ctx { cfg };
    match cli.command {
        Command::IngestDsm { input, output } => ingest_dsm(&ctx, input, &output),
        Command::Reclassify {
            input,
            output,
            radius,
            csv,
        } => reclassify(&ctx, &input, &output, radius, csv),
        Command::GenSchedule {
            corridor,
            surge,
            output,
            ..
        } => gen_schedule(&ctx, &corridor, surge, &output),
        Command::BuildTensor {
            corridor,
            schedule,
            terrain,
            catalog,
            output,
        } => build(&ctx, &corridor, schedule, terrain, catalog, &output),
        Command::PlanReliability {
            tensor,
            threshold,
            output,
            diag,
        } => plan_reliability(&ctx, &tensor, threshold, &output)
            .map_err(|f| attach(f, &diag, &output)),
        Command::PlanRobustness {
            plan,
            tensor,
            sigma,
            output,
            diag,
        } => plan_robustness(&ctx, &plan, &tensor, sigma, &output).map_err(|f| attach(f, &diag, &output)),
        Command::PlanResiliency {
            scenario,
            output,
            gantt,
            diag,
        } => plan_resiliency(&ctx, scenario, &output, gantt.as_deref()).map_err(|f| attach(f, &diag, &output)),
        Command::Validate {
            target,
            tensor,
            scenario,
            diag,
        } => {
            let artifact = target
                .plan
                .clone()
                .or(target.augmentation.clone())
                .or(target.dispatch.clone())
                .expect("clap enforces one target");
            validate(&ctx, target, tensor, scenario).map_err(|f| attach(f, &diag, &artifact))
        }
        Command::ExportGeojson { source, output } => export_geojson(&ctx, source, &output),
        Command::EmitPlot { tensor, output } => emit_plot(&ctx, &tensor, &output),
    }
}

fn attach(f: Failure, diag: &Diagnostic, output: &Path) -> Failure {
    if f.code == 3 {
        f.with_diagnostic(diagnostic_path(diag, output))
    } else {
        f
    }
}

fn ingest_dsm(ctx: &Ctx, input: Option<PathBuf>, output: &Path) -> Outcome {
    let input = from_config(input, &ctx.cfg.paths.dsm, "DSM input")?;
    let cloud = load_dsm(open(&input)?, ctx.cfg.terrain.cell_size).map_err(Failure::input)?;
    let mut buf = Vec::new();
    cloud.write_cache(&mut buf).map_err(Failure::input)?;
    write(output, buf)?;
    println!("ingested {} points into {}", cloud.len(), output.display());
    Ok(())
}

fn reclassify(ctx: &Ctx, input: &Path, output: &Path, radius: Option<f64>, csv: bool) -> Outcome {
    let cloud = TerrainCloud::read_cache(open(input)?).map_err(Failure::input)?;
    let radius = radius.unwrap_or(ctx.cfg.terrain.ground_radius);
    let out = cloud.reclassify(radius).map_err(Failure::input)?;
    let mut buf = Vec::new();
    if csv {
        out.write_dsm_csv(&mut buf).map_err(Failure::input)?;
    } else {
        out.write_cache(&mut buf).map_err(Failure::input)?;
    }
    write(output, buf)?;
    println!("reclassified {} points into {}", out.len(), output.display());
    Ok(())
}

fn trajectory_params(cfg: &ToolkitConfig) -> TrajectoryParams {
    TrajectoryParams {
        speed_mps: cfg.schedule.speed_mps,
        step_seconds: cfg.schedule.step_seconds,
        window_start_hour: cfg.schedule.window[0],
        cruise_altitude_m: cfg.schedule.cruise_altitude_m,
    }
}

fn gen_schedule(ctx: &Ctx, corridor: &str, surge: bool, output: &Path) -> Outcome {
    let seed = ctx.cfg.require_seed().map_err(|e| Failure::new(1, e))?;
    let c = ctx.cfg.corridor(corridor).map_err(Failure::input)?;
    let demand = if surge {
        c.surge_demand
            .as_ref()
            .ok_or_else(|| Failure::input(anyhow!("corridor '{corridor}' has no surge_demand")))?
    } else {
        &c.demand
    };
    let path = corridor_path(c)?;
    let window = (ctx.cfg.schedule.window[0], ctx.cfg.schedule.window[1]);
    let schedule = schedule_from_demand(
        &path,
        demand,
        &ctx.cfg.schedule.distributions,
        window,
        &trajectory_params(&ctx.cfg),
        seed,
    )
    .map_err(Failure::input)?;
    write(output, schedule.to_csv_string(Some(&ctx.provenance().comment())))?;
    println!(
        "{} aircraft over {} steps written to {}",
        schedule.num_aircraft(),
        schedule.num_steps(),
        output.display()
    );
    Ok(())
}

fn build(
    ctx: &Ctx,
    corridor: &str,
    schedule: Option<PathBuf>,
    terrain: Option<PathBuf>,
    catalog: Option<PathBuf>,
    output: &Path,
) -> Outcome {
    let c = ctx.cfg.corridor(corridor).map_err(Failure::input)?;
    let path = corridor_path(c)?;
    let schedule_path = from_config(schedule, &ctx.cfg.paths.schedule, "schedule")?;
    let schedule = FlightSchedule::read_csv(open(&schedule_path)?).map_err(Failure::input)?;
    let cloud = match terrain {
        Some(t) => TerrainCloud::read_cache(open(&t)?).map_err(Failure::input)?,
        None => TerrainCloud::empty(path.frame().clone()),
    };
    let catalog = match catalog.or_else(|| ctx.cfg.paths.catalog.clone()) {
        Some(p) => parse_catalog(&read(&p)?).map_err(Failure::input)?,
        None => bundled_catalog(),
    };
    let s = &ctx.cfg.sites;
    let sites = candidate_sites_along(&path, &cloud, s.spacing, s.mast_height, s.capacity).map_err(Failure::input)?;
    let tensor = build_tensor(&sites, &catalog, &schedule, &cloud, &ctx.cfg.detection).map_err(Failure::input)?;
    let (ni, ns, nk, nt) = tensor.dims();
    let artifact = TensorArtifact {
        provenance: ctx.provenance(),
        corridor: corridor.to_string(),
        sites,
        catalog,
        tensor,
    };
    write(output, artifacts::to_json(&artifact))?;
    println!("tensor {ni} sites x {ns} sensors x {nk} aircraft x {nt} steps written to {}", output.display());
    Ok(())
}

fn reliability_options(cfg: &ToolkitConfig) -> ReliabilityOptions {
    ReliabilityOptions {
        mode: cfg.planner.mode,
        exclude: cfg.planner.exclude.clone(),
        node_budget: cfg.solver.node_budget,
    }
}

fn plan_reliability(ctx: &Ctx, tensor: &Path, threshold: Option<f64>, output: &Path) -> Outcome {
    let t: TensorArtifact = read_json(tensor)?;
    let h = threshold.unwrap_or(ctx.cfg.planner.threshold);
    let plan = reliability::plan(&t.tensor, &t.catalog, &t.sites, h, &reliability_options(&ctx.cfg))
        .map_err(plan_failure)?;
    let summary: Vec<String> = plan
        .sets_by_type()
        .iter()
        .filter(|(_, n)| *n > 0)
        .map(|(id, n)| format!("{n} {id}"))
        .collect();
    println!(
        "threshold {h}: cost {} with {} ({} sets)",
        plan.total_cost,
        if summary.is_empty() { "no sensors".into() } else { summary.join(", ") },
        plan.total_sets()
    );
    let artifact = PlanArtifact {
        provenance: ctx.provenance(),
        corridor: t.corridor,
        sites: t.sites,
        plan,
    };
    write(output, artifacts::to_json(&artifact))
}

fn plan_robustness(ctx: &Ctx, plan: &Path, tensor: &Path, sigma: Option<f64>, output: &Path) -> Outcome {
    let baseline: PlanArtifact = read_json(plan)?;
    let t: TensorArtifact = read_json(tensor)?;
    if baseline.sites != t.sites {
        return Err(Failure::input(anyhow!("plan and tensor were built on different candidate sites")));
    }
    let params = RobustnessParams {
        sigma: sigma.unwrap_or(ctx.cfg.planner.sigma),
        max_vert: ctx.cfg.planner.max_vert,
        node_budget: ctx.cfg.solver.node_budget,
    };
    let aug = robustness::augment(&baseline.plan, &t.tensor, &t.catalog, &params).map_err(plan_failure)?;
    let checks = robustness::validate_augmentation(&aug, &t.tensor).map_err(plan_failure)?;
    let failed = artifacts::failed_checks(&checks);
    println!(
        "sigma {}: {} sets added at cost {}; {failed} detection checks failed",
        aug.sigma,
        aug.total_added(),
        aug.add_cost
    );
    let artifact = AugmentationArtifact {
        provenance: ctx.provenance(),
        corridor: t.corridor,
        sites: t.sites,
        plan: aug,
        checks_failed: failed,
    };
    write(output, artifacts::to_json(&artifact))
}

fn load_scenario(ctx: &Ctx, path: Option<PathBuf>) -> Result<FailureScenario, Failure> {
    let path = from_config(path, &ctx.cfg.paths.scenario, "scenario")?;
    FailureScenario::from_json(&read(&path)?).map_err(Failure::input)
}

fn plan_resiliency(ctx: &Ctx, scenario: Option<PathBuf>, output: &Path, gantt: Option<&Path>) -> Outcome {
    let scenario = load_scenario(ctx, scenario)?;
    let opts = ResiliencyOptions {
        node_budget: ctx.cfg.solver.node_budget,
    };
    let sched = resiliency::schedule(&scenario, &opts).map_err(resiliency_failure)?;
    let violations = resiliency::validate_schedule(&sched, &scenario);
    if !violations.is_empty() {
        let lines: Vec<String> = violations.iter().map(|v| format!("{:?}: {}", v.rule, v.message)).collect();
        return Err(Failure::new(3, anyhow!("schedule failed validation:\n{}", lines.join("\n"))));
    }
    let summary = resiliency::summarize(&sched);
    for s in &summary {
        let active = match (s.active_start, s.active_end) {
            (Some(a), Some(b)) => format!("active {a}..={b}"),
            _ => "never active".to_string(),
        };
        println!(
            "{} from {} to {}: dispatch {}, arrive {}, {active}",
            s.unit, s.hub, s.site, s.dispatch_start, s.arrival
        );
    }
    let prov = ctx.provenance();
    if let Some(g) = gantt {
        let mut buf = format!("# {}\n", prov.comment()).into_bytes();
        resiliency::write_gantt_csv(&sched, &mut buf).map_err(|e| Failure::new(2, e))?;
        write(g, buf)?;
    }
    let artifact = DispatchArtifact {
        provenance: prov,
        schedule: sched,
        summary,
    };
    write(output, artifacts::to_json(&artifact))
}

fn validate(ctx: &Ctx, target: ValidateTarget, tensor: Option<PathBuf>, scenario: Option<PathBuf>) -> Outcome {
    let require_tensor = || -> Result<TensorArtifact, Failure> {
        let p = tensor
            .clone()
            .ok_or_else(|| Failure::new(1, anyhow!("--tensor is required for this artifact")))?;
        read_json(&p)
    };
    let mut problems = Vec::new();
    if let Some(p) = target.plan {
        let a: PlanArtifact = read_json(&p)?;
        let t = require_tensor()?;
        let achieved = match a.plan.mode {
            reliability::ReliabilityMode::Aggregate => reliability::validate_plan(&a.plan, &t.tensor),
            reliability::ReliabilityMode::PerAircraft => reliability::validate_plan_per_aircraft(&a.plan, &t.tensor),
        }
        .map_err(plan_failure)?;
        for (step, r) in achieved.iter().enumerate() {
            if let Some(r) = r {
                if *r < a.plan.threshold - 1e-9 {
                    problems.push(format!("step {step}: reliability {r} below {}", a.plan.threshold));
                }
            }
        }
        for (i, row) in a.plan.n.iter().enumerate() {
            let sets: u32 = row.iter().sum();
            if sets > t.sites[i].capacity {
                problems.push(format!("site {i}: {sets} sets exceed capacity {}", t.sites[i].capacity));
            }
            if sets > 0 && !a.plan.beta[i] {
                problems.push(format!("site {i}: sensors installed but site not opened"));
            }
        }
    } else if let Some(p) = target.augmentation {
        let a: AugmentationArtifact = read_json(&p)?;
        let t = require_tensor()?;
        let checks = robustness::validate_augmentation(&a.plan, &t.tensor).map_err(plan_failure)?;
        for c in checks.iter().filter(|c| !c.satisfied) {
            problems.push(format!(
                "aircraft {} step {}: detection {:?} below {}",
                c.aircraft, c.step, c.achieved, a.plan.sigma
            ));
        }
    } else if let Some(p) = target.dispatch {
        let a: DispatchArtifact = read_json(&p)?;
        let scenario = load_scenario(ctx, scenario)?;
        for v in resiliency::validate_schedule(&a.schedule, &scenario) {
            problems.push(format!("{:?}: {}", v.rule, v.message));
        }
    }
    if problems.is_empty() {
        println!("valid");
        Ok(())
    } else {
        Err(Failure::new(3, anyhow!("{} violation(s):\n{}", problems.len(), problems.join("\n"))))
    }
}

fn export_geojson(ctx: &Ctx, source: GeojsonSource, output: &Path) -> Outcome {
    let value = if let Some(p) = source.plan {
        let a: PlanArtifact = read_json(&p)?;
        artifacts::plan_geojson(&a.plan, &a.sites, &a.provenance)
    } else if let Some(p) = source.augmentation {
        let a: AugmentationArtifact = read_json(&p)?;
        artifacts::augmentation_geojson(&a.plan, &a.sites, &a.provenance)
    } else {
        let scenario = load_scenario(ctx, source.scenario)?;
        artifacts::hubs_geojson(&scenario, &ctx.provenance())
    };
    write(output, artifacts::to_json(&value))
}

fn emit_plot(ctx: &Ctx, tensors: &[PathBuf], output: &Path) -> Outcome {
    let opts = reliability_options(&ctx.cfg);
    let mut rows = Vec::new();
    for path in tensors {
        let t: TensorArtifact = read_json(path)?;
        for &h in &ctx.cfg.planner.plot_thresholds {
            let row = match reliability::plan(&t.tensor, &t.catalog, &t.sites, h, &opts) {
                Ok(plan) => PlotRow {
                    corridor: t.corridor.clone(),
                    threshold: h,
                    sensor_count: Some(plan.total_sets()),
                    total_cost: Some(plan.total_cost),
                    status: "optimal".into(),
                },
                Err(e) => {
                    let status = match plan_failure(e).code {
                        3 => "infeasible",
                        4 => "budget_exhausted",
                        _ => "error",
                    };
                    PlotRow {
                        corridor: t.corridor.clone(),
                        threshold: h,
                        sensor_count: None,
                        total_cost: None,
                        status: status.into(),
                    }
                }
            };
            rows.push(row);
        }
    }
    let mut buf = Vec::new();
    artifacts::write_plot_csv(&rows, &ctx.provenance(), &mut buf).map_err(|e| Failure::new(2, e))?;
    write(output, buf)?;
    println!("{} plot rows written to {}", rows.len(), output.display());
    Ok(())
}
