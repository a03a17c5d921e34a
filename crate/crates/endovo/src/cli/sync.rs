use std::path::PathBuf;

use clap::Args;
use endovo_core::temporal_sync::{
    divergence, lk_flow_with, robot_speed, sync_offset, LkOptions, ScalarSignal, SyncOptions, SyncResult,
};
use rayon::prelude::*;
use serde_json::json;

use super::{check_input, check_output, display_name, invalid, Classify, CliError, Ctx, Outcome};
use crate::io::{list_images, read_gray, read_positions, read_signal, write_atomic};
use crate::report::{header, num};

#[derive(Debug, Args)]
pub(super) struct SyncArgs {
    /// Folder of video frames; divergence is computed from them.
    #[arg(long, value_name = "DIR", requires = "fps", conflicts_with = "camera_signal", required_unless_present = "camera_signal")]
    frames: Option<PathBuf>,
    /// Precomputed camera signal (`# rate_hz = ...` then values).
    #[arg(long, value_name = "FILE")]
    camera_signal: Option<PathBuf>,
    /// Frame rate of --frames.
    #[arg(long)]
    fps: Option<f64>,
    /// Robot pose log (trajectory CSV); its tip speed is the robot signal.
    #[arg(long, value_name = "CSV", conflicts_with = "robot_signal", required_unless_present = "robot_signal")]
    robot_poses: Option<PathBuf>,
    /// Precomputed robot signal.
    #[arg(long, value_name = "FILE")]
    robot_signal: Option<PathBuf>,
    /// Low-pass cutoff applied to the robot speed (Hz).
    #[arg(long, default_value_t = 300.0)]
    cutoff: f64,
    /// Keep every n-th robot pose.
    #[arg(long, default_value_t = 1)]
    decimate: usize,
    /// Lucas-Kanade window (odd).
    #[arg(long, default_value_t = 7)]
    window: usize,
    /// Largest |lag| searched, in camera samples.
    #[arg(long)]
    max_lag: Option<usize>,
    /// Smallest overlap accepted, in camera samples.
    #[arg(long)]
    min_overlap: Option<usize>,
    /// Sequence name used in the table.
    #[arg(long, default_value = "sequence")]
    sequence: String,
    /// Also write the table to this file.
    #[arg(long, value_name = "FILE")]
    table: Option<PathBuf>,
}

fn camera_signal(a: &SyncArgs, ctx: &Ctx) -> Result<ScalarSignal, CliError> {
    if let Some(path) = &a.camera_signal {
        check_input(path)?;
        return read_signal(path).invalid();
    }
    let dir = a.frames.as_ref().expect("clap requires a camera source");
    check_input(dir)?;
    let fps = a.fps.expect("clap requires --fps with --frames");
    if !(fps > 0.0 && fps.is_finite()) {
        return invalid("--fps must be positive");
    }
    if a.window < 3 || a.window % 2 == 0 {
        return invalid(format!("--window must be odd and at least 3, got {}", a.window));
    }
    let paths = list_images(dir).invalid()?;
    if paths.len() < 2 {
        return invalid(format!("{}: need at least two frames", dir.display()));
    }
    let opts = LkOptions {
        window: a.window,
        ..LkOptions::default()
    };
    ctx.pool.install(|| {
        let frames = paths.par_iter().map(|p| read_gray(p).invalid()).collect::<Result<Vec<_>, _>>()?;
        let values = frames
            .par_windows(2)
            .map(|w| divergence(&lk_flow_with(&w[0], &w[1], &opts)?))
            .collect::<Result<Vec<_>, _>>()
            .failed()?;
        ScalarSignal::new(fps, values).invalid()
    })
}

fn robot_signal(a: &SyncArgs) -> Result<ScalarSignal, CliError> {
    if let Some(path) = &a.robot_signal {
        check_input(path)?;
        return read_signal(path).invalid();
    }
    let path = a.robot_poses.as_ref().expect("clap requires a robot source");
    check_input(path)?;
    let (stamps, positions) = read_positions(path, a.decimate).invalid()?;
    robot_speed(&stamps, &positions, a.cutoff).invalid()
}

pub(super) fn table(sequence: &str, r: &SyncResult) -> String {
    format!(
        "sequence, start_frame -> robot_sample, lag, score\n{sequence}, 0 -> {}, lag={}, score={:.4}{}\n",
        r.robot_sample_for_frame(0),
        r.lag,
        r.score,
        if r.reliable { "" } else { " (unreliable)" }
    )
}

pub(super) fn sync(a: &SyncArgs, ctx: &Ctx) -> Result<Outcome, CliError> {
    if let Some(t) = &a.table {
        check_output(t)?;
    }
    if a.sequence.contains([',', '\n']) {
        return invalid("--sequence must not contain commas or newlines");
    }
    let robot = robot_signal(a)?;
    let cam = camera_signal(a, ctx)?;
    let opts = SyncOptions {
        max_lag: a.max_lag,
        min_overlap: a.min_overlap,
    };
    let res = sync_offset(&cam, &robot, &opts).failed()?;
    let text = table(&a.sequence, &res);
    if let Some(t) = &a.table {
        write_atomic(t, text.as_bytes()).failed()?;
    }

    let mut r = header("sync");
    let source = |p: &Option<PathBuf>| p.as_deref().map(display_name);
    r.insert(
        "inputs".into(),
        json!({
            "camera": source(&a.frames).or(source(&a.camera_signal)),
            "robot": source(&a.robot_poses).or(source(&a.robot_signal)),
        }),
    );
    r.insert("sequence".into(), json!(a.sequence));
    r.insert("camera_rate_hz".into(), num(cam.rate_hz));
    r.insert("robot_rate_hz".into(), num(robot.rate_hz));
    r.insert("lag".into(), json!(res.lag));
    r.insert("lag_robot_samples".into(), json!(res.lag_robot_samples));
    r.insert("start_frame".into(), json!(0));
    r.insert("robot_sample".into(), json!(res.robot_sample_for_frame(0)));
    r.insert("score".into(), num(res.score));
    r.insert("reliable".into(), json!(res.reliable));
    Ok(Outcome { report: r, summary: text })
}
