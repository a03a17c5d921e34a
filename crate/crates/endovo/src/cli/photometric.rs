use std::path::PathBuf;

use clap::Args;
use endovo_core::pose_align::{refine_pose, AlignOptions};
use endovo_core::warp_loss::{total_loss, FramePair, LossOptions};
use endovo_core::{CameraIntrinsics, DepthMap, ImageBuffer, Pose};
use serde_json::{json, Value};

use super::{check_input, display_name, invalid, parse_pose, CameraArgs, Classify, CliError, Ctx, Outcome, WeightArgs};
use crate::io::{read_depth, read_image};
use crate::report::{header, loss_report, num, pose};

#[derive(Debug, Args)]
struct PairArgs {
    /// Target (reference) frame.
    #[arg(long)]
    target: PathBuf,
    /// Source frame, warped onto the target.
    #[arg(long)]
    source: PathBuf,
    /// Target depth map (16-bit PNG or raw DEPTHF32).
    #[arg(long)]
    depth: PathBuf,
    #[command(flatten)]
    camera: CameraArgs,
    #[command(flatten)]
    weights: WeightArgs,
}

struct Pair {
    target: ImageBuffer,
    source: ImageBuffer,
    depth: DepthMap,
    k: CameraIntrinsics,
}

impl PairArgs {
    fn load(&self) -> Result<Pair, CliError> {
        for p in [&self.target, &self.source, &self.depth] {
            check_input(p)?;
        }
        let k = self.camera.load()?;
        let target = read_image(&self.target).invalid()?;
        let source = read_image(&self.source).invalid()?;
        let depth = read_depth(&self.depth).invalid()?;
        let dims = (target.width(), target.height());
        if (source.width(), source.height()) != dims || source.channels() != target.channels() {
            return invalid("target and source images differ in size or channel count");
        }
        if (depth.width(), depth.height()) != dims {
            return invalid("depth map and target image differ in size");
        }
        if (k.width as usize, k.height as usize) != dims {
            return invalid(format!(
                "calibration is for {}x{} images but the frames are {}x{}",
                k.width, k.height, dims.0, dims.1
            ));
        }
        Ok(Pair { target, source, depth, k })
    }

    fn inputs(&self) -> Value {
        json!({
            "target": display_name(&self.target),
            "source": display_name(&self.source),
            "depth": display_name(&self.depth),
        })
    }
}

#[derive(Debug, Args)]
pub(super) struct LossArgs {
    #[command(flatten)]
    pair: PairArgs,
    /// Source depth map; enables the geometry-consistency term.
    #[arg(long)]
    source_depth: Option<PathBuf>,
    /// Target-to-source pose `tx,ty,tz,qx,qy,qz,qw`.
    #[arg(long, value_parser = parse_pose, allow_hyphen_values = true)]
    pose: Option<Pose>,
}

pub(super) fn loss(a: &LossArgs, _ctx: &Ctx) -> Result<Outcome, CliError> {
    let p = a.pair.load()?;
    let weights = a.pair.weights.weights()?;
    let depth_source = match &a.source_depth {
        Some(path) => {
            check_input(path)?;
            let d = read_depth(path).invalid()?;
            if (d.width(), d.height()) != (p.depth.width(), p.depth.height()) {
                return invalid("source and target depth maps differ in size");
            }
            Some(d)
        }
        None => None,
    };
    let pose_ts = a.pose.unwrap_or_else(Pose::identity);
    let pair = FramePair {
        target: &p.target,
        source: &p.source,
        depth_target: &p.depth,
        depth_source: depth_source.as_ref(),
        pose: &pose_ts,
        intrinsics: &p.k,
    };
    let opts = LossOptions {
        brightness_alignment: !a.pair.weights.no_brightness,
        ssim_window: a.pair.weights.ssim_window,
    };
    let rep = total_loss(&pair, &weights, &opts).failed()?;

    let mut r = header("loss");
    r.insert("inputs".into(), a.pair.inputs());
    r.insert("pose".into(), pose(&pose_ts));
    r.insert("brightness_alignment".into(), json!(opts.brightness_alignment));
    r.insert("loss".into(), loss_report(&rep));
    let summary = format!(
        "total {:.6} (photometric {:.6}, smoothness {:.6}, geometry {:.6})\nbrightness a={:.6} c={:.6}, {} valid pixels\n",
        rep.total, rep.photometric_masked, rep.smoothness, rep.geometry, rep.brightness.a, rep.brightness.c, rep.valid_pixels
    );
    Ok(Outcome { report: r, summary })
}

#[derive(Debug, Args)]
pub(super) struct AlignArgs {
    #[command(flatten)]
    pair: PairArgs,
    /// Initial target-to-source pose `tx,ty,tz,qx,qy,qz,qw`.
    #[arg(long, value_parser = parse_pose, allow_hyphen_values = true)]
    init: Option<Pose>,
    /// Pyramid levels (1 = full resolution only).
    #[arg(long, default_value_t = AlignOptions::default().pyramid_levels)]
    levels: usize,
    /// Iterations per level.
    #[arg(long, default_value_t = AlignOptions::default().max_iterations)]
    max_iters: usize,
}

pub(super) fn align(a: &AlignArgs, _ctx: &Ctx) -> Result<Outcome, CliError> {
    let p = a.pair.load()?;
    let weights = a.pair.weights.weights()?;
    let init = a.init.unwrap_or_else(Pose::identity);
    let opts = AlignOptions {
        max_iterations: a.max_iters,
        pyramid_levels: a.levels,
        brightness_alignment: !a.pair.weights.no_brightness,
        ssim_window: a.pair.weights.ssim_window,
        ..AlignOptions::default()
    };
    if a.levels == 0 || a.max_iters == 0 {
        return invalid("--levels and --max-iters must be at least 1");
    }
    let res = refine_pose(&p.target, &p.source, &p.depth, &p.k, &init, &weights, &opts).failed()?;

    let mut r = header("align");
    r.insert("inputs".into(), a.pair.inputs());
    r.insert("init".into(), pose(&init));
    r.insert("pose".into(), pose(&res.pose));
    r.insert("initial_loss".into(), num(res.initial_loss));
    r.insert("final_loss".into(), num(res.final_loss));
    r.insert("no_descent".into(), json!(res.no_descent));
    r.insert(
        "trace".into(),
        Value::Array(
            res.trace
                .iter()
                .map(|s| json!({ "level": s.level, "loss": num(s.report.total), "pose": pose(&s.pose) }))
                .collect(),
        ),
    );
    let t = res.pose.translation();
    let summary = format!(
        "loss {:.6} -> {:.6} in {} steps{}\npose t=({:.6}, {:.6}, {:.6}) rotation {:.4} deg\n",
        res.initial_loss,
        res.final_loss,
        res.trace.len(),
        if res.no_descent { " (no descent)" } else { "" },
        t.x,
        t.y,
        t.z,
        res.pose.rotation_angle().to_degrees()
    );
    Ok(Outcome { report: r, summary })
}
