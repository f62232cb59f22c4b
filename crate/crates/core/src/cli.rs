//! Command-line front end: `gen`, `register`, `servo`, `dump`, `bench`.
//!
//! Exit codes: 0 success, 2 no convergence, 3 invalid input or usage,
//! 4 file I/O.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::cloud::{load_cloud, save_cloud};
use crate::config::RunConfig;
use crate::egi::build_egi;
use crate::error::{Error, Result};
use crate::experiments::{make_trial, Experiment, TrialLimits};
use crate::harmonics::{sh_forward, RealShBasis};
use crate::servo::{Alignment, Controller, PoseError, StageTimes, Status};
use crate::shapes::{
    add_position_noise, asymmetric_object, clutter_scene, generate_shape, tabletop_scene, ShapeKind,
};
use crate::sim::{run_servo_sim, servo_config, Platform, Scenario, VirtualSensor};
use crate::transform::RigidTransform;
use crate::voxel::{voxelize, GridSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NOT_CONVERGED: i32 = 2;
pub const EXIT_INVALID: i32 = 3;
pub const EXIT_IO: i32 = 4;

/// Per-iteration time above which `bench` prints a warning.
pub const ITERATION_BUDGET: Duration = Duration::from_millis(100);

#[derive(Debug, Parser)]
#[command(name = "spectral-servo", version, about = "Spectral point-cloud registration and visual servoing")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic cloud or an experiment trial.
    Gen(GenArgs),
    /// Register a target cloud against a reference cloud.
    Register(RegisterArgs),
    /// Run the closed-loop camera positioning simulation.
    Servo(ServoArgs),
    /// Print the voxel grid, EGI or SH coefficients of a cloud.
    Dump(DumpArgs),
    /// Time controller iterations with a per-stage breakdown.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ShapeArg {
    Sphere,
    Box,
    Cylinder,
    Cone,
    Object,
    Clutter,
    Tabletop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExperimentArg {
    C1,
    C2,
    C3,
}

impl From<ExperimentArg> for Experiment {
    fn from(e: ExperimentArg) -> Self {
        match e {
            ExperimentArg::C1 => Experiment::C1,
            ExperimentArg::C2 => Experiment::C2,
            ExperimentArg::C3 => Experiment::C3,
        }
    }
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["shape", "experiment"]))]
pub struct GenArgs {
    /// Single shape or composite scene; writes one cloud to `--out`.
    #[arg(long, value_enum)]
    pub shape: Option<ShapeArg>,
    /// Registration trial; writes reference.xyz, target.xyz and truth.json
    /// into the `--out` directory.
    #[arg(long, value_enum)]
    pub experiment: Option<ExperimentArg>,
    #[arg(long, default_value_t = 0.05)]
    pub radius: f64,
    /// Box edge lengths `a,b,c` in meters.
    #[arg(long, default_value = "0.1,0.06,0.04", value_parser = parse_triple)]
    pub size: [f64; 3],
    #[arg(long, default_value_t = 0.1)]
    pub height: f64,
    /// Sample count (per object for scenes).
    #[arg(long, default_value_t = 6000, value_parser = clap::value_parser!(u64).range(1..))]
    pub n: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Gaussian position noise sigma in meters.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one configuration key, `key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

impl ConfigArgs {
    fn resolve(&self, mut cfg: RunConfig) -> Result<RunConfig> {
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        for kv in &self.overrides {
            cfg.apply_override(kv)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct RegisterArgs {
    #[arg(long)]
    pub reference: Option<PathBuf>,
    #[arg(long)]
    pub target: Option<PathBuf>,
    /// Ground truth written by `gen --experiment`; adds pose errors to the summary.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServoArgs {
    /// Scene cloud about the origin; defaults to the built-in tabletop scene.
    #[arg(long)]
    pub scene: Option<PathBuf>,
    /// Samples per object for the built-in scene.
    #[arg(long, default_value_t = 3000, value_parser = clap::value_parser!(u64).range(1..))]
    pub n: u64,
    /// Goal camera pose `tx,ty,tz,rx,ry,rz` in world coordinates (meters,
    /// rotation vector in degrees).
    #[arg(long, value_parser = parse_pose)]
    pub goal: Option<RigidTransform>,
    /// Start camera pose in world coordinates, same syntax as `--goal`.
    #[arg(long, value_parser = parse_pose, conflicts_with = "offset")]
    pub start: Option<RigidTransform>,
    /// Start pose as a displacement of the goal in the goal camera frame.
    #[arg(long, value_parser = parse_pose, default_value = "0.05,0.03,-0.04,6,-12,3")]
    pub offset: RigidTransform,
    /// Move the camera with the simulated 7-joint arm.
    #[arg(long)]
    pub arm: bool,
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DumpWhat {
    Voxels,
    Egi,
    Sh,
}

#[derive(Debug, Args)]
pub struct DumpArgs {
    #[arg(long)]
    pub cloud: PathBuf,
    #[arg(long, value_enum)]
    pub what: DumpWhat,
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Controller iterations to time.
    #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u64).range(1..))]
    pub iterations: u64,
    #[arg(long, value_enum, default_value = "c1")]
    pub experiment: ExperimentArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub config: ConfigArgs,
}

/// Parses `a,b,c`.
pub fn parse_triple(s: &str) -> std::result::Result<[f64; 3], String> {
    let v = parse_floats(s, 3)?;
    Ok([v[0], v[1], v[2]])
}

fn parse_floats(s: &str, count: usize) -> std::result::Result<Vec<f64>, String> {
    let values: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    if values.len() != count {
        return Err(format!("expected {count} comma-separated numbers, got {}", values.len()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err("values must be finite".into());
    }
    Ok(values)
}

/// Parses `tx,ty,tz,rx,ry,rz`: translation in meters, rotation vector in degrees.
pub fn parse_pose(s: &str) -> std::result::Result<RigidTransform, String> {
    let v = parse_floats(s, 6)?;
    let rotvec = Vector3::new(v[3], v[4], v[5]).map(f64::to_radians);
    Ok(RigidTransform::from_rotation_vector(rotvec, Vector3::new(v[0], v[1], v[2])))
}

/// Pose of a transform applied about `center`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseRecord {
    /// Row-major rotation matrix.
    pub rotation: [f64; 9],
    /// `w, x, y, z`.
    pub quaternion: [f64; 4],
    pub translation: [f64; 3],
    pub center: [f64; 3],
}

impl PoseRecord {
    pub fn new(h: &RigidTransform, center: &Vector3<f64>) -> Self {
        let r = &h.rotation;
        Self {
            rotation: [r[(0, 0)], r[(0, 1)], r[(0, 2)], r[(1, 0)], r[(1, 1)], r[(1, 2)], r[(2, 0)], r[(2, 1)], r[(2, 2)]],
            quaternion: h.quaternion_wxyz(),
            translation: h.translation.into(),
            center: (*center).into(),
        }
    }

    pub fn transform(&self) -> Result<RigidTransform> {
        RigidTransform::new(Matrix3::from_row_slice(&self.rotation), Vector3::from(self.translation))
    }
}

/// Contents of `transform.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformRecord {
    #[serde(flatten)]
    pub pose: PoseRecord,
    pub iterations: usize,
    pub converged: bool,
    #[serde(rename = "Jt")]
    pub jt: f64,
    #[serde(rename = "Jr")]
    pub jr: f64,
}

impl TransformRecord {
    pub fn from_alignment(a: &Alignment) -> Self {
        Self {
            pose: PoseRecord::new(&a.transform, &a.center),
            iterations: a.iterations(),
            converged: a.converged(),
            jt: a.final_state.jt,
            jr: a.final_state.jr,
        }
    }
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io { .. } => EXIT_IO,
        Error::Diverged { .. } => EXIT_NOT_CONVERGED,
        _ => EXIT_INVALID,
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serializes");
    s.push('\n');
    s
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code. Reports go to stdout, errors to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    let mut out = String::new();
    let result = execute(&cli.command, &mut out);
    print!("{out}");
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Runs one command, appending its report to `out`.
pub fn execute(command: &Command, out: &mut String) -> Result<i32> {
    match command {
        Command::Gen(a) => gen(a, out),
        Command::Register(a) => register(a, out),
        Command::Servo(a) => servo(a, out),
        Command::Dump(a) => dump(a, out),
        Command::Bench(a) => bench(a, out),
    }
}

fn gen(a: &GenArgs, out: &mut String) -> Result<i32> {
    if !(a.noise >= 0.0 && a.noise.is_finite()) {
        return Err(Error::Validation(format!("noise must be non-negative, got {}", a.noise)));
    }
    let n = a.n as usize;
    if let Some(e) = a.experiment {
        let limits = TrialLimits {
            samples: n,
            noise_sigma: a.noise,
            ..TrialLimits::default()
        };
        let trial = make_trial(e.into(), a.seed, &limits)?;
        create_dir(&a.out)?;
        save_cloud(&trial.reference, a.out.join("reference.xyz"))?;
        save_cloud(&trial.target, a.out.join("target.xyz"))?;
        write_file(&a.out.join("truth.json"), &to_json(&PoseRecord::new(&trial.truth, &trial.reference.centroid())))?;
        let _ = writeln!(
            out,
            "{} seed {}: reference {} points, target {} points -> {}",
            trial.experiment,
            a.seed,
            trial.reference.len(),
            trial.target.len(),
            a.out.display()
        );
        return Ok(EXIT_OK);
    }
    let cloud = match a.shape.expect("clap requires shape or experiment") {
        ShapeArg::Sphere => generate_shape(ShapeKind::Sphere { radius: a.radius }, n, a.seed)?,
        ShapeArg::Box => generate_shape(ShapeKind::Box { size: a.size }, n, a.seed)?,
        ShapeArg::Cylinder => generate_shape(
            ShapeKind::Cylinder {
                radius: a.radius,
                height: a.height,
            },
            n,
            a.seed,
        )?,
        ShapeArg::Cone => generate_shape(
            ShapeKind::Cone {
                radius: a.radius,
                height: a.height,
            },
            n,
            a.seed,
        )?,
        ShapeArg::Object => asymmetric_object(n, a.seed)?,
        ShapeArg::Clutter => clutter_scene(n, a.seed)?,
        ShapeArg::Tabletop => tabletop_scene(n, a.seed)?,
    };
    let cloud = add_position_noise(&cloud, a.noise, a.seed.wrapping_add(1));
    if let Some(dir) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    save_cloud(&cloud, &a.out)?;
    let _ = writeln!(out, "{} points -> {}", cloud.len(), a.out.display());
    Ok(EXIT_OK)
}

fn pick_path(flag: &Option<PathBuf>, configured: &Option<PathBuf>, what: &str) -> Result<PathBuf> {
    flag.clone()
        .or_else(|| configured.clone())
        .ok_or_else(|| Error::Validation(format!("no {what} cloud given")))
}

fn register(a: &RegisterArgs, out: &mut String) -> Result<i32> {
    let mut cfg = a.config.resolve(RunConfig::default())?;
    let reference_path = pick_path(&a.reference, &cfg.reference, "reference")?;
    let target_path = pick_path(&a.target, &cfg.target, "target")?;
    cfg.reference = Some(reference_path.clone());
    cfg.target = Some(target_path.clone());
    if let Some(o) = &a.out {
        cfg.output = o.clone();
    }
    let truth = a.truth.as_deref().map(read_json::<PoseRecord>).transpose()?;
    let reference = load_cloud(&reference_path, true)?;
    let target = add_position_noise(&load_cloud(&target_path, true)?, cfg.noise_sigma, cfg.seed);
    create_dir(&cfg.output)?;
    cfg.save(cfg.output.join("config.txt"))?;

    let start = Instant::now();
    let controller = Controller::new(&reference, cfg.controller)?;
    let alignment = match controller.align(&target) {
        Ok(a) => a,
        Err(e @ Error::Diverged { .. }) => {
            write_file(&cfg.output.join("summary.txt"), &format!("status = diverged\nerror = {e}\n"))?;
            return Err(e);
        }
        Err(e) => return Err(e),
    };
    let elapsed = start.elapsed();

    let record = TransformRecord::from_alignment(&alignment);
    write_file(&cfg.output.join("transform.json"), &to_json(&record))?;
    write_file(&cfg.output.join("trace.csv"), &alignment.trace.to_csv())?;

    let mut summary = String::new();
    let _ = writeln!(summary, "status = {}", status_name(alignment.status));
    let _ = writeln!(summary, "iterations = {}", alignment.iterations());
    let _ = writeln!(summary, "Jt = {}", record.jt);
    let _ = writeln!(summary, "Jr = {}", record.jr);
    let _ = writeln!(summary, "grad_t_norm = {}", alignment.final_state.grad_t.norm());
    let _ = writeln!(summary, "grad_r_norm = {}", alignment.final_state.grad_r.norm());
    let _ = writeln!(summary, "translation = {:?}", record.pose.translation);
    let _ = writeln!(summary, "rotation_angle_deg = {}", crate::transform::log_so3(&alignment.transform.rotation).norm().to_degrees());
    let _ = writeln!(summary, "elapsed_ms = {:.1}", elapsed.as_secs_f64() * 1e3);
    let _ = writeln!(
        summary,
        "ms_per_iteration = {:.2}",
        elapsed.as_secs_f64() * 1e3 / alignment.iterations().max(1) as f64
    );
    if let Some(t) = truth {
        let err = PoseError::between(&t.transform()?, &alignment.transform);
        let _ = writeln!(summary, "translation_error_m = {}", err.translation.norm());
        let _ = writeln!(summary, "rotation_error_deg = {}", err.angle().to_degrees());
        let _ = writeln!(summary, "translation_mse = {}", err.translation_mse());
        let _ = writeln!(summary, "rotation_mse = {}", err.rotation_mse());
    }
    write_file(&cfg.output.join("summary.txt"), &summary)?;
    out.push_str(&summary);
    Ok(if alignment.converged() { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

fn status_name(s: Status) -> &'static str {
    match s {
        Status::Converged => "converged",
        Status::MaxIterations => "max_iterations",
    }
}

fn servo(a: &ServoArgs, out: &mut String) -> Result<i32> {
    let mut base = RunConfig {
        experiment: Experiment::Servo,
        ..RunConfig::default()
    };
    base.controller = servo_config();
    let mut cfg = a.config.resolve(base)?;
    if let Some(o) = &a.out {
        cfg.output = o.clone();
    }
    if a.scene.is_some() {
        cfg.scene = a.scene.clone();
    }
    let mut scenario = match &cfg.scene {
        Some(path) => Scenario::with_scene(load_cloud(path, true)?)?,
        None => Scenario::standard(a.n as usize, cfg.seed)?,
    };
    if let Some(goal) = a.goal {
        scenario.goal = goal;
    }
    let start = a.start.unwrap_or_else(|| scenario.goal.compose(&a.offset));
    let platform = if a.arm {
        Platform::Arm(scenario.arm_at(&start)?)
    } else {
        Platform::FreeFlying
    };
    let sensor = VirtualSensor::new(scenario.scene.clone()).with_noise(cfg.noise_sigma, cfg.seed);
    create_dir(&cfg.output)?;
    cfg.save(cfg.output.join("config.txt"))?;

    let clock = Instant::now();
    let run = match run_servo_sim(&sensor, &scenario.goal, &start, platform, cfg.controller) {
        Ok(r) => r,
        Err(e @ Error::Diverged { .. }) => {
            write_file(&cfg.output.join("summary.txt"), &format!("status = diverged\nerror = {e}\n"))?;
            return Err(e);
        }
        Err(e) => return Err(e),
    };
    let elapsed = clock.elapsed();
    write_file(&cfg.output.join("trajectory.csv"), &run.trajectory_csv())?;
    write_file(&cfg.output.join("trace.csv"), &run.trace.to_csv())?;

    let mut summary = String::new();
    let _ = writeln!(summary, "status = {}", status_name(run.status));
    let _ = writeln!(summary, "platform = {}", if a.arm { "arm" } else { "free-flying" });
    let _ = writeln!(summary, "ticks = {}", run.trajectory.len());
    let _ = writeln!(summary, "initial_translation_error_m = {}", (start.translation - scenario.goal.translation).norm());
    let _ = writeln!(
        summary,
        "initial_rotation_error_deg = {}",
        crate::transform::geodesic_angle(&start.rotation, &scenario.goal.rotation).to_degrees()
    );
    let _ = writeln!(summary, "translation_error_m = {}", run.translation_error());
    let _ = writeln!(summary, "rotation_error_deg = {}", run.rotation_error().to_degrees());
    let _ = writeln!(summary, "path_length_m = {}", run.path_length());
    if let Some(q) = &run.final_joints {
        let _ = writeln!(summary, "final_joints = {q:?}");
    }
    let _ = writeln!(summary, "elapsed_ms = {:.1}", elapsed.as_secs_f64() * 1e3);
    write_file(&cfg.output.join("summary.txt"), &summary)?;
    out.push_str(&summary);
    Ok(if run.converged() { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

fn dump(a: &DumpArgs, out: &mut String) -> Result<i32> {
    let cfg = a.config.resolve(RunConfig::default())?.controller;
    let cloud = load_cloud(&a.cloud, true)?;
    cloud.ensure_nonempty("cloud")?;
    match a.what {
        DumpWhat::Voxels => {
            let spec = GridSpec::centered(&cloud.centroid(), cfg.resolution, cfg.dims)?;
            out.push_str(&voxelize(&cloud, &spec)?.dump());
        }
        DumpWhat::Egi => out.push_str(&build_egi(&cloud, cfg.bandwidth)?.dump()),
        DumpWhat::Sh => {
            let basis = RealShBasis::with_l_max(cfg.bandwidth, cfg.l_max)?;
            out.push_str(&sh_forward(&build_egi(&cloud, cfg.bandwidth)?, &basis)?.dump());
        }
    }
    Ok(EXIT_OK)
}

/// Timing of a fixed number of controller iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub iterations: usize,
    pub dims: [usize; 3],
    pub bandwidth: usize,
    pub l_max: usize,
    pub per_iteration: Vec<Duration>,
    pub stages: Vec<StageTimes>,
}

impl BenchReport {
    pub fn mean_ms(&self) -> f64 {
        self.per_iteration.iter().map(Duration::as_secs_f64).sum::<f64>() * 1e3 / self.per_iteration.len().max(1) as f64
    }

    pub fn median_ms(&self) -> f64 {
        let ms: Vec<f64> = self.per_iteration.iter().map(|d| d.as_secs_f64() * 1e3).collect();
        crate::experiments::median(&ms)
    }

    fn stage_mean_ms(&self, pick: impl Fn(&StageTimes) -> Duration) -> f64 {
        self.stages.iter().map(|s| pick(s).as_secs_f64()).sum::<f64>() * 1e3 / self.stages.len().max(1) as f64
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let d = self.dims;
        let _ = writeln!(s, "iterations = {}", self.iterations);
        let _ = writeln!(s, "grid = {}x{}x{}", d[0], d[1], d[2]);
        let _ = writeln!(s, "bandwidth = {}", self.bandwidth);
        let _ = writeln!(s, "l_max = {}", self.l_max);
        let _ = writeln!(s, "mean_ms = {:.2}", self.mean_ms());
        let _ = writeln!(s, "median_ms = {:.2}", self.median_ms());
        let _ = writeln!(s, "voxelize_ms = {:.2}", self.stage_mean_ms(|t| t.voxelize));
        let _ = writeln!(s, "fft_ms = {:.2}", self.stage_mean_ms(|t| t.fft));
        let _ = writeln!(s, "sh_ms = {:.2}", self.stage_mean_ms(|t| t.sh));
        let _ = writeln!(s, "gradient_ms = {:.2}", self.stage_mean_ms(|t| t.gradient));
        if self.mean_ms() > ITERATION_BUDGET.as_secs_f64() * 1e3 {
            let _ = writeln!(s, "WARN mean iteration time exceeds {} ms", ITERATION_BUDGET.as_millis());
        }
        s
    }
}

/// Runs `iterations` measure-and-update steps on a seeded trial, ignoring
/// the stop rule. Target features are recomputed every iteration, as in
/// closed-loop operation.
pub fn run_bench(experiment: Experiment, seed: u64, iterations: usize, cfg: crate::servo::ControllerConfig) -> Result<BenchReport> {
    let trial = make_trial(experiment, seed, &TrialLimits::default())?;
    let controller = Controller::new(&trial.reference, cfg)?;
    let mut h = RigidTransform::identity();
    let mut per_iteration = Vec::with_capacity(iterations);
    let mut stages = Vec::with_capacity(iterations);
    for i in 1..=iterations {
        let clock = Instant::now();
        let (m, times) = controller.measure_timed(&h, &trial.target)?;
        h = controller.update(&h, &m, i);
        per_iteration.push(clock.elapsed());
        stages.push(times);
    }
    Ok(BenchReport {
        iterations,
        dims: cfg.dims,
        bandwidth: cfg.bandwidth,
        l_max: controller.basis().l_max(),
        per_iteration,
        stages,
    })
}

fn bench(a: &BenchArgs, out: &mut String) -> Result<i32> {
    let cfg = a.config.resolve(RunConfig::default())?;
    let report = run_bench(a.experiment.into(), a.seed, a.iterations as usize, cfg.controller)?;
    out.push_str(&report.render());
    Ok(EXIT_OK)
}
