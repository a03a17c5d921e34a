use std::path::{Path, PathBuf};

use clap::Args;
use endovo_core::reconstruction::{
    icp_cloud_to_target, init_from_line_pairs, stitch as stitch_frames, suppress_specular, tsai_shah_sfs, Detector,
    HarrisParams, IcpOptions, IcpTarget, PointCloud, SfsOptions, SpecularOptions, StitchOptions, SurfacePrior, Unit,
};
use endovo_core::{DepthMap, Pose};
use nalgebra::{Vector2, Vector3};
use serde_json::{json, Value};

use super::{
    check_input, check_output, display_name, invalid, parse_pose, parse_vec3, plot, CameraArgs, Classify, CliError,
    Ctx, Outcome,
};
use crate::io::{list_images, parse_unit, read_image, read_ply, read_text, unit_name, write_depth, write_image, write_ply, PlyData, PlyFormat};
use crate::report::{header, num, nums, pose};

#[derive(Debug, Args)]
pub(super) struct StitchArgs {
    /// Frames, or a single folder of frames, in sequence order.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Panorama of the first component; further components get `_1`, `_2`, ...
    #[arg(long, value_name = "PNG")]
    out: PathBuf,
    /// Best-matching frames tried per frame.
    #[arg(long, default_value_t = StitchOptions::default().candidates)]
    candidates: usize,
    /// RANSAC inliers needed to link two frames.
    #[arg(long, default_value_t = StitchOptions::default().min_inliers)]
    min_inliers: usize,
    /// Nearest/second-nearest descriptor distance ratio.
    #[arg(long, default_value_t = StitchOptions::default().ratio)]
    ratio: f64,
    /// RANSAC inlier threshold (pixels).
    #[arg(long, default_value_t = 3.0)]
    threshold: f64,
    /// Use Harris corners instead of DoG blobs (suits checkerboards).
    #[arg(long)]
    harris: bool,
    /// Keep the chained homographies without the joint refinement.
    #[arg(long)]
    no_refine: bool,
    /// Remove specular highlights from each panorama.
    #[arg(long)]
    inpaint: bool,
}

fn component_path(out: &Path, k: usize) -> PathBuf {
    if k == 0 {
        return out.to_path_buf();
    }
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match out.extension() {
        Some(ext) => format!("{stem}_{k}.{}", ext.to_string_lossy()),
        None => format!("{stem}_{k}"),
    };
    out.with_file_name(name)
}

pub(super) fn stitch(a: &StitchArgs, ctx: &Ctx) -> Result<Outcome, CliError> {
    check_output(&a.out)?;
    for p in &a.inputs {
        check_input(p)?;
    }
    let paths = match &a.inputs[..] {
        [dir] if dir.is_dir() => list_images(dir).invalid()?,
        many => many.to_vec(),
    };
    if paths.is_empty() {
        return invalid("no frames to stitch");
    }
    if !(a.ratio > 0.0 && a.ratio < 1.0) || !(a.threshold > 0.0) || a.candidates == 0 || a.min_inliers < 4 {
        return invalid("need 0 < --ratio < 1, --threshold > 0, --candidates >= 1 and --min-inliers >= 4");
    }
    let frames = paths.iter().map(|p| read_image(p).invalid()).collect::<Result<Vec<_>, _>>()?;
    let defaults = StitchOptions::default();
    let opts = StitchOptions {
        candidates: a.candidates,
        detector: if a.harris { Detector::Harris(HarrisParams::default()) } else { defaults.detector },
        ratio: a.ratio,
        ransac: endovo_core::reconstruction::RansacOptions {
            threshold: a.threshold,
            seed: ctx.seed,
            ..defaults.ransac
        },
        min_inliers: a.min_inliers,
        refine: !a.no_refine,
    };
    let res = stitch_frames(&frames, &opts).failed()?;

    let mut panoramas = Vec::new();
    let mut lines = Vec::new();
    for (k, pano) in res.panoramas.iter().enumerate() {
        let image = if a.inpaint {
            suppress_specular(&pano.image, &SpecularOptions::default()).failed()?.0
        } else {
            pano.image.clone()
        };
        let path = component_path(&a.out, k);
        write_image(&path, &image).failed()?;
        let names: Vec<String> = pano.frames.iter().map(|&i| display_name(&paths[i])).collect();
        lines.push(format!(
            "{}: {} frames, {}x{}\n",
            display_name(&path),
            names.len(),
            image.width(),
            image.height()
        ));
        panoramas.push(json!({
            "file": display_name(&path),
            "width": image.width(),
            "height": image.height(),
            "frames": names,
            "coverage": num(pano.coverage.count() as f64 / (image.width() * image.height()) as f64),
            "homographies": pano.homographies.iter().map(|h| nums(h.matrix().transpose().as_slice())).collect::<Vec<_>>(),
        }));
    }
    let mut r = header("stitch");
    r.insert("frames".into(), json!(paths.len()));
    r.insert("disconnected".into(), json!(res.disconnected));
    r.insert("panoramas".into(), Value::Array(panoramas));
    let mut summary = lines.concat();
    if res.disconnected {
        summary.push_str(&format!("match graph is disconnected: {} panoramas\n", res.panoramas.len()));
    }
    Ok(Outcome { report: r, summary })
}

#[derive(Debug, Args)]
pub(super) struct SfsArgs {
    /// Shaded input image (converted to gray).
    image: PathBuf,
    /// Relative depth map (16-bit PNG or raw DEPTHF32 by extension).
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Unit vector towards the light, camera coordinates.
    #[arg(long, value_parser = parse_vec3, default_value = "0,0,1", allow_hyphen_values = true)]
    light: [f64; 3],
    #[arg(long, default_value_t = SfsOptions::default().iterations)]
    iterations: usize,
    /// The surface recedes from the camera (lumen) instead of bulging towards it.
    #[arg(long)]
    concave: bool,
    /// Tilt of the auxiliary lights used for a frontal light.
    #[arg(long, default_value_t = SfsOptions::default().frontal_tilt)]
    tilt: f64,
    /// Back-project the depth into a PLY cloud (needs --calib or --camera).
    #[arg(long, value_name = "PLY", requires = "CameraArgs")]
    cloud: Option<PathBuf>,
    /// Unit written into the cloud.
    #[arg(long, default_value = "mm", value_parser = parse_unit_arg)]
    unit: Unit,
    #[command(flatten)]
    camera: Option<CameraArgs>,
}

fn parse_unit_arg(s: &str) -> Result<Unit, String> {
    parse_unit(s).ok_or_else(|| format!("unknown unit {s:?} (use mm, cm or m)"))
}

fn back_project(depth: &DepthMap, k: &endovo_core::CameraIntrinsics, unit: Unit) -> Result<PointCloud, CliError> {
    let mut pts = Vec::new();
    for y in 0..depth.height() {
        for x in 0..depth.width() {
            if let Some(d) = depth.get(x, y) {
                if let Ok(p) = k.unproject(&Vector2::new(x as f64, y as f64), d) {
                    pts.push(p);
                }
            }
        }
    }
    PointCloud::new(pts, unit).failed()
}

pub(super) fn sfs(a: &SfsArgs, _ctx: &Ctx) -> Result<Outcome, CliError> {
    check_input(&a.image)?;
    check_output(&a.out)?;
    if let Some(c) = &a.cloud {
        check_output(c)?;
    }
    let light = Vector3::from(a.light);
    if (light.norm() - 1.0).abs() > 1e-6 {
        return invalid(format!("--light must be a unit vector (norm {})", light.norm()));
    }
    if a.iterations == 0 || !(a.tilt > 0.0 && a.tilt.is_finite()) {
        return invalid("--iterations must be at least 1 and --tilt positive");
    }
    let k = a.camera.as_ref().map(CameraArgs::load).transpose()?;
    let img = read_image(&a.image).invalid()?;
    if let Some(k) = &k {
        if (k.width as usize, k.height as usize) != (img.width(), img.height()) {
            return invalid("calibration and image differ in size");
        }
    }
    let opts = SfsOptions {
        light,
        iterations: a.iterations,
        prior: if a.concave { SurfacePrior::Concave } else { SurfacePrior::Convex },
        frontal_tilt: a.tilt,
    };
    let depth = tsai_shah_sfs(&img, &opts).failed()?;
    write_depth(&a.out, &depth).failed()?;

    let mut r = header("sfs");
    r.insert("input".into(), json!(display_name(&a.image)));
    r.insert("output".into(), json!(display_name(&a.out)));
    r.insert("light".into(), nums(&a.light));
    r.insert("valid_pixels".into(), json!(depth.valid_count()));
    let (lo, hi) = depth.min_max_valid().unwrap_or((f64::NAN, f64::NAN));
    r.insert("depth_range".into(), nums(&[lo, hi]));
    let mut summary = format!("depth {}x{}, range [{lo:.6}, {hi:.6}]\n", depth.width(), depth.height());
    if let (Some(path), Some(k)) = (&a.cloud, &k) {
        let cloud = back_project(&depth, k, a.unit)?;
        write_ply(path, &PlyData::from_cloud(&cloud), PlyFormat::BinaryLittleEndian).failed()?;
        r.insert("cloud".into(), json!({ "file": display_name(path), "points": cloud.len(), "unit": unit_name(a.unit) }));
        summary.push_str(&format!("cloud {} points\n", cloud.len()));
    }
    Ok(Outcome { report: r, summary })
}

#[derive(Debug, Args)]
pub(super) struct IcpArgs {
    /// Cloud to move (PLY; faces are ignored).
    source: PathBuf,
    /// Reference cloud or mesh (PLY; a mesh when it has faces).
    target: PathBuf,
    /// Overrides the unit of the source file.
    #[arg(long, value_parser = parse_unit_arg)]
    source_unit: Option<Unit>,
    /// Overrides the unit of the target file.
    #[arg(long, value_parser = parse_unit_arg)]
    target_unit: Option<Unit>,
    /// Two marked segment endpoints: lines `label sx sy sz tx ty tz`, source
    /// then target coordinates in their own units.
    #[arg(long, value_name = "FILE", conflicts_with = "init")]
    init_pairs: Option<PathBuf>,
    /// Initial transform `tx,ty,tz,qx,qy,qz,qw` (source units).
    #[arg(long, value_parser = parse_pose, allow_hyphen_values = true)]
    init: Option<Pose>,
    #[arg(long, default_value_t = IcpOptions::default().max_iterations)]
    max_iters: usize,
    /// Stop when the RMSE changes by less than this (cm).
    #[arg(long, default_value_t = IcpOptions::default().tolerance_cm)]
    tolerance_cm: f64,
    /// Registered source cloud (PLY).
    #[arg(long, value_name = "PLY")]
    aligned: Option<PathBuf>,
    /// Distance heat map of the registered cloud, top view (PNG).
    #[arg(long, value_name = "PNG")]
    plot: Option<PathBuf>,
}

fn read_init_pairs(path: &Path, source_to_target: f64) -> Result<Pose, CliError> {
    let text = read_text(path).invalid()?;
    let mut src = Vec::new();
    let mut tgt = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        let values: Option<Vec<f64>> = tokens.get(1..).map(|t| t.iter().filter_map(|v| v.parse().ok()).collect());
        match values {
            Some(v) if tokens.len() == 7 && v.len() == 6 && v.iter().all(|x| x.is_finite()) => {
                src.push(Vector3::new(v[0], v[1], v[2]));
                // the registration runs in source units
                tgt.push(Vector3::new(v[3], v[4], v[5]) / source_to_target);
            }
            _ => return invalid(format!("{}: line {}: expected `label sx sy sz tx ty tz`", path.display(), n + 1)),
        }
    }
    let ([s0, s1], [t0, t1]) = (&src[..], &tgt[..]) else {
        return invalid(format!("{}: need exactly two point pairs, got {}", path.display(), src.len()));
    };
    init_from_line_pairs([*s0, *s1], [*t0, *t1]).invalid()
}

pub(super) fn icp(a: &IcpArgs, _ctx: &Ctx) -> Result<Outcome, CliError> {
    check_input(&a.source)?;
    check_input(&a.target)?;
    for p in [&a.aligned, &a.plot].into_iter().flatten() {
        check_output(p)?;
    }
    if a.max_iters == 0 || !(a.tolerance_cm > 0.0) {
        return invalid("--max-iters must be at least 1 and --tolerance-cm positive");
    }
    let src_ply = read_ply(&a.source).invalid()?;
    let tgt_ply = read_ply(&a.target).invalid()?;
    let source = src_ply.to_cloud(a.source_unit).invalid()?;
    let (cloud, mesh);
    let target = if tgt_ply.faces.is_empty() {
        cloud = tgt_ply.to_cloud(a.target_unit).invalid()?;
        IcpTarget::Cloud(&cloud)
    } else {
        mesh = tgt_ply.to_mesh(a.target_unit).invalid()?;
        IcpTarget::Mesh(&mesh)
    };
    let target_unit = match target {
        IcpTarget::Cloud(c) => c.unit(),
        IcpTarget::Mesh(m) => m.unit(),
    };
    let init = match (&a.init_pairs, a.init) {
        (Some(path), _) => {
            check_input(path)?;
            read_init_pairs(path, source.unit().factor_to(target_unit))?
        }
        (None, Some(p)) => p,
        (None, None) => Pose::identity(),
    };
    let opts = IcpOptions {
        max_iterations: a.max_iters,
        tolerance_cm: a.tolerance_cm,
        ..IcpOptions::default()
    };
    let res = icp_cloud_to_target(&source, target, &init, &opts).failed()?;
    let moved = source.transformed(&res.transform);
    let to_cm = source.unit().to_cm();
    let dist_cm: Vec<f64> = res.distances.iter().map(|d| d * to_cm).collect();
    let (lo, hi) = dist_cm.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), d| (l.min(*d), h.max(*d)));

    if let Some(path) = &a.aligned {
        write_ply(path, &PlyData::from_cloud(&moved), PlyFormat::BinaryLittleEndian).failed()?;
    }
    let mut r = header("icp");
    r.insert("inputs".into(), json!({ "source": display_name(&a.source), "target": display_name(&a.target) }));
    r.insert(
        "units".into(),
        json!({ "source": unit_name(source.unit()), "target": unit_name(target_unit) }),
    );
    r.insert("init".into(), pose(&init));
    r.insert("transform".into(), pose(&res.transform));
    r.insert("converged".into(), json!(res.converged));
    r.insert("iterations".into(), json!(res.iterations));
    r.insert("rmse_cm".into(), nums(&res.rmse_cm));
    r.insert("final_rmse_cm".into(), num(res.final_rmse_cm));
    r.insert("distance_cm_range".into(), nums(&[lo, hi]));
    if let Some(path) = &a.plot {
        let pts: Vec<Vector2<f64>> = moved.points().iter().map(|p| Vector2::new(p.x, p.y)).collect();
        plot::heatmap(path, &pts, &dist_cm, lo, hi)?;
        r.insert("plot".into(), json!({ "file": display_name(path), "scale_cm": nums(&[lo, hi]) }));
    }
    let summary = format!(
        "RMSE {:.6} cm -> {:.6} cm after {} iterations ({})\ndistance range [{lo:.6}, {hi:.6}] cm\n",
        res.rmse_cm[0],
        res.final_rmse_cm,
        res.iterations,
        if res.converged { "converged" } else { "not converged" }
    );
    Ok(Outcome { report: r, summary })
}
