//! The `endovo` command line.
//!
//! Every subcommand prints a short text summary on stdout and, with
//! `--json PATH`, writes a versioned report (see [`crate::report`]). Exit
//! codes: 0 success, 2 invalid arguments or inputs, 3 the computation itself
//! failed. `ENDOVO_THREADS` caps the worker pool used by `augment` and `sync`.

mod augment;
mod photometric;
mod plot;
mod recon;
mod summary;
mod sync;
mod traj;

use std::ffi::OsString;
use std::fmt::Display;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use endovo_core::warp_loss::LossWeights;
use endovo_core::{CameraIntrinsics, Pose};
use serde_json::{Map, Value};

use crate::io::read_calibration;
use crate::report::write_report;

pub const THREADS_ENV: &str = "ENDOVO_THREADS";

#[derive(Debug, Parser)]
#[command(name = "endovo", version, about = "Evaluation and photometric alignment tools for endoscopic visual odometry")]
pub struct Cli {
    /// Write a JSON report here.
    #[arg(long, global = true, value_name = "PATH")]
    json: Option<PathBuf>,
    /// Seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// ATE and RPE of an estimated trajectory against ground truth.
    EvalTraj(traj::EvalTrajArgs),
    /// Offset between a video and a robot log.
    Sync(sync::SyncArgs),
    /// Apply an augmentation pipeline to a folder of frames.
    Augment(augment::AugmentArgs),
    /// Self-supervised loss of one frame pair at a given pose.
    Loss(photometric::LossArgs),
    /// Refine a relative pose by direct photometric alignment.
    Align(photometric::AlignArgs),
    /// Stitch frames into panoramas.
    Stitch(recon::StitchArgs),
    /// Depth from a single shaded image.
    Sfs(recon::SfsArgs),
    /// Register a point cloud to a reference cloud or mesh.
    Icp(recon::IcpArgs),
    /// Summarize previously written reports.
    Report(summary::ReportArgs),
}

#[derive(Debug)]
pub enum CliError {
    /// Bad arguments or unreadable/malformed inputs.
    Validation(String),
    /// The inputs were fine but the algorithm failed.
    Compute(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Compute(_) => 3,
        }
    }
}

impl Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "invalid input: {m}"),
            CliError::Compute(m) => write!(f, "computation failed: {m}"),
        }
    }
}

/// Tags a foreign error with the exit class it belongs to.
trait Classify<T> {
    fn invalid(self) -> Result<T, CliError>;
    fn failed(self) -> Result<T, CliError>;
}

impl<T, E: Display> Classify<T> for Result<T, E> {
    fn invalid(self) -> Result<T, CliError> {
        self.map_err(|e| CliError::Validation(e.to_string()))
    }

    fn failed(self) -> Result<T, CliError> {
        self.map_err(|e| CliError::Compute(e.to_string()))
    }
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::Validation(msg.into()))
}

/// What a subcommand hands back to the driver.
struct Outcome {
    report: Map<String, Value>,
    summary: String,
}

struct Ctx {
    seed: u64,
    pool: rayon::ThreadPool,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Diagnostics go to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(summary) => {
            print!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("endovo: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: Cli) -> Result<String, CliError> {
    if let Some(json) = &cli.json {
        check_output(json)?;
    }
    let ctx = Ctx {
        seed: cli.seed,
        pool: thread_pool()?,
    };
    let out = match &cli.command {
        Command::EvalTraj(a) => traj::eval_traj(a, &ctx),
        Command::Sync(a) => sync::sync(a, &ctx),
        Command::Augment(a) => augment::augment(a, &ctx),
        Command::Loss(a) => photometric::loss(a, &ctx),
        Command::Align(a) => photometric::align(a, &ctx),
        Command::Stitch(a) => recon::stitch(a, &ctx),
        Command::Sfs(a) => recon::sfs(a, &ctx),
        Command::Icp(a) => recon::icp(a, &ctx),
        Command::Report(a) => summary::report(a, &ctx),
    }?;
    if let Some(json) = &cli.json {
        write_report(json, &Value::Object(out.report)).failed()?;
    }
    Ok(out.summary)
}

fn thread_pool() -> Result<rayon::ThreadPool, CliError> {
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => n,
            _ => return invalid(format!("{THREADS_ENV} must be a positive integer, got {v:?}")),
        },
        _ => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().failed()
}

fn check_input(path: &Path) -> Result<(), CliError> {
    if path.exists() {
        Ok(())
    } else {
        invalid(format!("{}: no such file or directory", path.display()))
    }
}

/// Outputs must land in an existing directory and must not name one.
fn check_output(path: &Path) -> Result<(), CliError> {
    if path.is_dir() {
        return invalid(format!("{}: is a directory", path.display()));
    }
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() && !dir.is_dir() => {
            invalid(format!("{}: directory does not exist", dir.display()))
        }
        _ => Ok(()),
    }
}

/// File name only, so reports do not leak absolute paths.
fn display_name(path: &Path) -> String {
    path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned())
}

fn parse_floats<const N: usize>(s: &str) -> Result<[f64; N], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != N {
        return Err(format!("expected {N} comma-separated numbers, got {}", parts.len()));
    }
    let mut out = [0.0; N];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = p.parse().ok().filter(|v: &f64| v.is_finite()).ok_or_else(|| format!("{p:?} is not a finite number"))?;
    }
    Ok(out)
}

/// `tx,ty,tz,qx,qy,qz,qw`.
fn parse_pose(s: &str) -> Result<Pose, String> {
    let [tx, ty, tz, qx, qy, qz, qw] = parse_floats::<7>(s)?;
    Pose::new([qx, qy, qz, qw], [tx, ty, tz]).map_err(|e| e.to_string())
}

fn parse_vec3(s: &str) -> Result<[f64; 3], String> {
    parse_floats::<3>(s)
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Preset {
    HighCam,
    LowCam,
    HighModified,
    LowModified,
    MiroCam,
    PillCam1,
    PillCam2,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
struct CameraArgs {
    /// Calibration file (`key = value` lines).
    #[arg(long, value_name = "FILE")]
    calib: Option<PathBuf>,
    /// Built-in calibration.
    #[arg(long, value_enum)]
    camera: Option<Preset>,
}

impl CameraArgs {
    fn load(&self) -> Result<CameraIntrinsics, CliError> {
        if let Some(path) = &self.calib {
            check_input(path)?;
            return read_calibration(path).invalid();
        }
        Ok(match self.camera.expect("clap enforces one of --calib/--camera") {
            Preset::HighCam => CameraIntrinsics::high_cam(),
            Preset::LowCam => CameraIntrinsics::low_cam(),
            Preset::HighModified => CameraIntrinsics::high_modified(),
            Preset::LowModified => CameraIntrinsics::low_modified(),
            Preset::MiroCam => CameraIntrinsics::miro_cam(),
            Preset::PillCam1 => CameraIntrinsics::pill_cam1(),
            Preset::PillCam2 => CameraIntrinsics::pill_cam2(),
        })
    }
}

#[derive(Debug, Args)]
struct WeightArgs {
    /// Weight of the photometric term.
    #[arg(long, default_value_t = LossWeights::default().alpha)]
    alpha: f64,
    /// Weight of the smoothness term.
    #[arg(long, default_value_t = LossWeights::default().beta)]
    beta: f64,
    /// Weight of the geometry-consistency term.
    #[arg(long, default_value_t = LossWeights::default().gamma)]
    gamma: f64,
    /// L1/L2 share of the photometric term.
    #[arg(long, default_value_t = LossWeights::default().lambda_p)]
    lambda_p: f64,
    /// SSIM share of the photometric term.
    #[arg(long, default_value_t = LossWeights::default().lambda_s)]
    lambda_s: f64,
    /// Compare raw intensities instead of fitting a gain and offset first.
    #[arg(long)]
    no_brightness: bool,
    /// Odd SSIM window size.
    #[arg(long, default_value_t = 3)]
    ssim_window: usize,
}

impl WeightArgs {
    fn weights(&self) -> Result<LossWeights, CliError> {
        let w = LossWeights {
            alpha: self.alpha,
            beta: self.beta,
            gamma: self.gamma,
            lambda_p: self.lambda_p,
            lambda_s: self.lambda_s,
        };
        w.validate().invalid()?;
        if self.ssim_window % 2 == 0 || self.ssim_window == 0 {
            return invalid(format!("--ssim-window must be odd, got {}", self.ssim_window));
        }
        Ok(w)
    }
}
