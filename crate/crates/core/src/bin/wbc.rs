//! `wbc`: simulation, single-step IK debugging, validation and log inspection.
//!
//! Exit codes: 0 ok, 1 input error, 2 constraint violation (or compared
//! metrics out of tolerance), 3 infeasible QP.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use nalgebra::{Matrix3, Vector3};
use serde_json::json;

use wbc_core::gaze::{look_at_rotation, pan_tilt_from_rotation, NeckLimits, WORLD_UP};
use wbc_core::ik::{IkProfile, QpStatus, TrackingTargets, WholeBodyIk};
use wbc_core::model::{load_model, GeneralizedState, RobotModel};
use wbc_core::se3::{Pose, Rotation};
use wbc_core::sim::{compare_runs, run_scenario, MetricsReport, Scenario, TrajectoryLog};

#[derive(Parser)]
#[command(name = "wbc", version, about = "Whole-body mobile manipulation controller tools")]
#[command(after_help = "Log level comes from WBC_LOG_LEVEL (error, warn, info, debug; default warn).\n\
Exit codes: 0 ok, 1 input error, 2 constraint violation, 3 infeasible QP.")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write trajectory.csv and metrics.json.
    Sim(SimArgs),
    /// Solve one IK tick and print the solution with diagnostics as JSON.
    IkStep(IkStepArgs),
    /// Compute the look-at head rotation and neck pan/tilt for a target.
    Gaze(GazeArgs),
    /// Check model, profile and scenario documents.
    Validate(ValidateArgs),
    /// Summarize a trajectory log, or compare two metrics reports.
    InspectLog(InspectArgs),
    /// Time the IK loop on a scenario.
    Bench(BenchArgs),
}

#[derive(Args)]
struct SimArgs {
    /// Scenario JSON file, or the name of a bundled scenario.
    #[arg(long)]
    scenario: String,
    /// Profile JSON file or bundled profile name (laundry, delivery, tablescape); overrides the scenario's.
    #[arg(long)]
    profile: Option<String>,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct IkStepArgs {
    /// Model JSON file, or `reference`.
    #[arg(long, default_value = "reference")]
    model: String,
    /// JSON array with one number per generalized coordinate.
    #[arg(long)]
    state: PathBuf,
    /// JSON object with `left_ee` and `right_ee` poses ([x, y, z, qw, qx, qy, qz]) and optional `head_rotation` (3×3 rows).
    #[arg(long)]
    targets: PathBuf,
    /// Profile JSON file or bundled profile name.
    #[arg(long)]
    profile: String,
    /// Control period in seconds.
    #[arg(long, default_value_t = 0.01)]
    dt: f64,
}

#[derive(Args)]
struct GazeArgs {
    /// Head camera pose JSON ([x, y, z, qw, qx, qy, qz]); the optical axis is its z axis.
    #[arg(long)]
    head_pose: PathBuf,
    /// Look-at point in world coordinates.
    #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
    target: Vector3<f64>,
    /// Neck mount pose JSON (x forward, z up). Defaults to the head pose at zero pan and tilt.
    #[arg(long)]
    neck_mount: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    /// Model JSON file, or `reference`.
    #[arg(long)]
    model: Option<String>,
    /// Profile JSON file or bundled profile name.
    #[arg(long)]
    profile: Option<String>,
    /// Scenario JSON file or bundled scenario name.
    #[arg(long)]
    scenario: Option<String>,
}

#[derive(Args)]
struct InspectArgs {
    /// Trajectory CSV written by `wbc sim`.
    #[arg(long, required_unless_present = "metrics")]
    log: Option<PathBuf>,
    /// Metrics report to compare against --baseline.
    #[arg(long, requires = "baseline")]
    metrics: Option<PathBuf>,
    /// Baseline metrics report.
    #[arg(long, requires = "metrics")]
    baseline: Option<PathBuf>,
    /// Largest allowed absolute per-metric delta.
    #[arg(long, default_value_t = 1e-9)]
    tolerance: f64,
}

#[derive(Args)]
struct BenchArgs {
    /// Scenario JSON file or bundled scenario name.
    #[arg(long, default_value = "figure-eight")]
    scenario: String,
    /// Number of repetitions.
    #[arg(long, default_value_t = 3)]
    runs: usize,
}

#[derive(Debug)]
enum Failure {
    Input(String),
    Violation(String),
    Infeasible(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 1,
            Failure::Violation(_) => 2,
            Failure::Infeasible(_) => 3,
        }
    }
}

fn input<E: std::fmt::Display>(context: &str) -> impl FnOnce(E) -> Failure + '_ {
    move |e| Failure::Input(format!("{context}: {e}"))
}

fn main() -> ExitCode {
    let level = std::env::var("WBC_LOG_LEVEL").unwrap_or_else(|_| "warn".into());
    let filter = match level.as_str() {
        "error" | "warn" | "info" | "debug" => level.as_str(),
        _ => "warn",
    };
    env_logger::Builder::new().parse_filters(filter).format_timestamp(None).init();
    if filter != level {
        warn!("ignoring WBC_LOG_LEVEL={level}");
    }

    let cli = Cli::parse();
    let result = match cli.command {
        Command::Sim(a) => cmd_sim(a),
        Command::IkStep(a) => cmd_ik_step(a),
        Command::Gaze(a) => cmd_gaze(a),
        Command::Validate(a) => cmd_validate(a),
        Command::InspectLog(a) => cmd_inspect(a),
        Command::Bench(a) => cmd_bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let msg = match &f {
                Failure::Input(m) | Failure::Violation(m) | Failure::Infeasible(m) => m,
            };
            eprintln!("wbc: {msg}");
            ExitCode::from(f.code())
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(input(&path.display().to_string()))
}

fn parse_point(s: &str) -> Result<Vector3<f64>, String> {
    let v: Vec<f64> = s.split(',').map(|p| p.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
    match v.as_slice() {
        [x, y, z] if v.iter().all(|c| c.is_finite()) => Ok(Vector3::new(*x, *y, *z)),
        _ => Err("expected three finite numbers `x,y,z`".into()),
    }
}

/// A bundled name, or a file path.
fn load_scenario(arg: &str) -> Result<(Scenario, Option<PathBuf>), Failure> {
    let path = Path::new(arg);
    if !path.exists() {
        if let Some(s) = Scenario::bundled(arg) {
            return Ok((s, None));
        }
    }
    let s = Scenario::from_json(&read(path)?).map_err(input(arg))?;
    Ok((s, path.parent().map(Path::to_path_buf)))
}

fn load_profile(arg: &str) -> Result<IkProfile, Failure> {
    let path = Path::new(arg);
    if !path.exists() {
        if let Some(p) = IkProfile::bundled(arg) {
            return Ok(p);
        }
    }
    IkProfile::from_json(&read(path)?).map_err(input(arg))
}

fn load_robot(arg: &str) -> Result<RobotModel, Failure> {
    if arg == "reference" && !Path::new(arg).exists() {
        return Ok(RobotModel::reference());
    }
    load_model(&read(Path::new(arg))?).map_err(input(arg))
}

fn to_json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable")
}

/// Prints to stdout; a closed pipe is not an error.
fn emit(text: &str) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{text}");
}

fn cmd_sim(a: SimArgs) -> Result<(), Failure> {
    let (mut scenario, base) = load_scenario(&a.scenario)?;
    if let Some(seed) = a.seed {
        scenario.seed = seed;
    }
    let profile = a.profile.as_deref().map(load_profile).transpose()?;
    let (result, report) = run_scenario(&scenario, base.as_deref(), profile).map_err(input("simulation"))?;
    fs::create_dir_all(&a.out).map_err(input(&a.out.display().to_string()))?;
    let csv = a.out.join("trajectory.csv");
    let metrics = a.out.join("metrics.json");
    fs::write(&csv, result.log.to_csv_string()).map_err(input(&csv.display().to_string()))?;
    fs::write(&metrics, report.to_json()).map_err(input(&metrics.display().to_string()))?;
    info!("wrote {} and {}", csv.display(), metrics.display());
    let m = &report.metrics;
    emit(&to_json(m));
    if m.constraint_violations > 0 {
        return Err(Failure::Violation(format!("{} constraint violations", m.constraint_violations)));
    }
    if m.infeasible_ticks > 0 {
        return Err(Failure::Infeasible(format!("{} infeasible ticks", m.infeasible_ticks)));
    }
    Ok(())
}

fn cmd_ik_step(a: IkStepArgs) -> Result<(), Failure> {
    let model = load_robot(&a.model)?;
    let profile = load_profile(&a.profile)?;
    let q: GeneralizedState = serde_json::from_str(&read(&a.state)?).map_err(input("state"))?;
    let targets: TrackingTargets = serde_json::from_str(&read(&a.targets)?).map_err(input("targets"))?;
    let step = WholeBodyIk::new(profile.clone()).step(&model, &q, &targets, a.dt).map_err(input("ik"))?;
    let out = json!({
        "status": step.diagnostics.status,
        "dq": step.dq,
        "q_next": step.q_next,
        "diagnostics": step.diagnostics,
        "profile": profile,
    });
    emit(&to_json(&out));
    if step.diagnostics.status == QpStatus::Infeasible {
        return Err(Failure::Infeasible("QP infeasible".into()));
    }
    Ok(())
}

fn cmd_gaze(a: GazeArgs) -> Result<(), Failure> {
    let head: Pose = serde_json::from_str(&read(&a.head_pose)?).map_err(input("head pose"))?;
    let mount = match &a.neck_mount {
        Some(p) => serde_json::from_str(&read(p)?).map_err(input("neck mount"))?,
        None => {
            // Optical frame (x right, y down, z forward) to mount frame (x forward, z up).
            let m = Matrix3::new(0.0, -1.0, 0.0, 0.0, 0.0, -1.0, 1.0, 0.0, 0.0);
            Pose::new(head.rotation * Rotation::from_matrix(m).expect("rotation"), head.translation)
        }
    };
    let r = look_at_rotation(&head.translation, &head.rotation, &a.target, &WORLD_UP).map_err(input("gaze"))?;
    let pt = pan_tilt_from_rotation(&r, &mount, &NeckLimits::default());
    emit(&to_json(&json!({ "rotation": r, "pan": pt.pan, "tilt": pt.tilt, "clamped": pt.clamped })));
    Ok(())
}

fn cmd_validate(a: ValidateArgs) -> Result<(), Failure> {
    if a.model.is_none() && a.profile.is_none() && a.scenario.is_none() {
        return Err(Failure::Input("nothing to validate; pass --model, --profile or --scenario".into()));
    }
    if let Some(m) = &a.model {
        let model = load_robot(m)?;
        emit(&format!("model {}: ok ({} coordinates)", model.name(), model.n_v()));
    }
    if let Some(p) = &a.profile {
        let profile = load_profile(p)?;
        emit(&format!("profile {}: ok", profile.name));
    }
    if let Some(s) = &a.scenario {
        let (scenario, base) = load_scenario(s)?;
        scenario.load_model(base.as_deref()).map_err(input("scenario model"))?;
        scenario.load_profile(base.as_deref()).map_err(input("scenario profile"))?;
        emit(&format!("scenario {}: ok", scenario.name));
    }
    Ok(())
}

fn cmd_inspect(a: InspectArgs) -> Result<(), Failure> {
    if let Some(path) = &a.log {
        emit(&to_json(&summarize_log(&read(path)?)?));
    }
    if let (Some(m), Some(b)) = (&a.metrics, &a.baseline) {
        let run = MetricsReport::from_json(&read(m)?).map_err(input(&m.display().to_string()))?;
        let base = MetricsReport::from_json(&read(b)?).map_err(input(&b.display().to_string()))?;
        let report = compare_runs(&base, &run, a.tolerance).map_err(input("compare"))?;
        emit(&to_json(&report));
        if report.exceeded() {
            return Err(Failure::Violation("metric deltas exceed tolerance".into()));
        }
    }
    Ok(())
}

fn summarize_log(text: &str) -> Result<serde_json::Value, Failure> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().ok_or_else(|| Failure::Input("empty log".into()))?.split(',').collect();
    if header.first() != Some(&"tick") {
        return Err(Failure::Input("not a trajectory log".into()));
    }
    let n_v = header.iter().filter(|c| c.starts_with("q_")).count();
    if TrajectoryLog::header(n_v) != header.join(",") {
        return Err(Failure::Input("unexpected log header".into()));
    }
    let col = |name: &str| header.iter().position(|c| *c == name).expect("column in header");
    let (time, margin, cx, cy) = (col("time"), col("margin_min"), col("com_dx"), col("com_dy"));
    let mut rows = 0usize;
    let (mut first, mut last) = (f64::NAN, f64::NAN);
    let mut min_margin = f64::INFINITY;
    let mut max_com: f64 = 0.0;
    for (i, line) in lines.enumerate() {
        let v: Vec<f64> = line
            .split(',')
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|e| Failure::Input(format!("row {}: {e}", i + 1)))?;
        if v.len() != header.len() {
            return Err(Failure::Input(format!("row {} has {} columns, expected {}", i + 1, v.len(), header.len())));
        }
        if rows == 0 {
            first = v[time];
        }
        last = v[time];
        rows += 1;
        min_margin = min_margin.min(v[margin]);
        max_com = max_com.max(v[cx].abs()).max(v[cy].abs());
    }
    Ok(json!({
        "rows": rows,
        "coordinates": n_v,
        "start_time": if rows > 0 { json!(first) } else { json!(null) },
        "end_time": if rows > 0 { json!(last) } else { json!(null) },
        "min_margin": if rows > 0 { json!(min_margin) } else { json!(null) },
        "max_com_offset": max_com,
    }))
}

fn cmd_bench(a: BenchArgs) -> Result<(), Failure> {
    let (scenario, base) = load_scenario(&a.scenario)?;
    let mut per_tick = Vec::new();
    for _ in 0..a.runs.max(1) {
        let start = Instant::now();
        let (result, _) = run_scenario(&scenario, base.as_deref(), None).map_err(input("simulation"))?;
        let ticks = result.records.len().max(1);
        per_tick.push(start.elapsed().as_secs_f64() / ticks as f64);
    }
    per_tick.sort_by(f64::total_cmp);
    let mean = per_tick.iter().sum::<f64>() / per_tick.len() as f64;
    emit(&to_json(&json!({
        "scenario": scenario.name,
        "runs": per_tick.len(),
        "mean_tick_ms": mean * 1e3,
        "best_tick_ms": per_tick[0] * 1e3,
        "budget_ms": scenario.dt * 1e3,
    })));
    Ok(())
}
