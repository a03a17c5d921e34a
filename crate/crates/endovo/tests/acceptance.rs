//! Acceptance checks: one PASS/FAIL line per criterion, non-zero exit status
//! when any of them fails. Oracles are written independently of the library
//! code they check (SVD instead of quaternion alignment, explicit loops
//! instead of matrix products, and so on).

use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use endovo::core::augmentation::AugmentSpec;
use endovo::core::esab::{esab_forward, Conv1x1, EsabWeights, Tensor4, INPUT_CHANNELS};
use endovo::core::geometry::HandEye;
use endovo::core::pose_align::{refine_pose, AlignOptions};
use endovo::core::reconstruction::{
    icp_cloud_to_target, ransac_homography, tsai_shah_sfs, IcpOptions, IcpTarget, Point2, PointCloud, RansacOptions,
    SfsOptions, Unit,
};
use endovo::core::stats::spearman;
use endovo::core::temporal_sync::{divergence, sync_offset, FlowField, ScalarSignal, SyncOptions};
use endovo::core::traj_metrics::{evaluate, Trajectory};
use endovo::core::warp_loss::{depth_difference, total_loss, FramePair, LossOptions, LossWeights};
use endovo::core::{CameraIntrinsics, DepthMap, ImageBuffer, Pose};
use endovo::io::{write_depth, write_image};
use nalgebra::{Matrix3, Matrix4, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_unit(r: &mut impl Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0), r.random_range(-1.0..1.0));
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

/// Smooth random texture in `[lo, hi]`.
fn texture(r: &mut impl Rng, w: usize, h: usize, lo: f64, hi: f64) -> ImageBuffer {
    let waves: Vec<(f64, f64, f64)> = (0..4)
        .map(|_| (r.random_range(-0.6..0.6), r.random_range(-0.6..0.6), r.random_range(0.0..2.0 * PI)))
        .collect();
    ImageBuffer::from_fn_gray(w, h, |x, y| {
        let s: f64 = waves.iter().map(|(a, b, p)| (a * x as f64 + b * y as f64 + p).sin()).sum::<f64>() / 4.0;
        lo + (hi - lo) * (0.5 + 0.5 * s)
    })
}

// ---------------------------------------------------------------- 1

/// Least-squares similarity by SVD of the cross-covariance (Umeyama).
fn umeyama(src: &[Vector3<f64>], dst: &[Vector3<f64>], with_scale: bool) -> Matrix4<f64> {
    let n = src.len() as f64;
    let ms = src.iter().sum::<Vector3<f64>>() / n;
    let md = dst.iter().sum::<Vector3<f64>>() / n;
    let mut cov = Matrix3::zeros();
    let mut var = 0.0;
    for (s, d) in src.iter().zip(dst) {
        cov += (d - md) * (s - ms).transpose();
        var += (s - ms).norm_squared();
    }
    cov /= n;
    var /= n;
    let svd = cov.svd(true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut fix = Matrix3::identity();
    if (u * vt).determinant() < 0.0 {
        fix[(2, 2)] = -1.0;
    }
    let rot = u * fix * vt;
    let scale = if with_scale { (Matrix3::from_diagonal(&svd.singular_values) * fix).trace() / var } else { 1.0 };
    let t = md - scale * rot * ms;
    let mut m = Matrix4::identity();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&(scale * rot));
    m.fixed_view_mut::<3, 1>(0, 3).copy_from(&t);
    m
}

fn angle_of(m: &Matrix4<f64>) -> f64 {
    let r = m.fixed_view::<3, 3>(0, 0);
    let sin = 0.5 * Vector3::new(r[(2, 1)] - r[(1, 2)], r[(0, 2)] - r[(2, 0)], r[(1, 0)] - r[(0, 1)]).norm();
    let cos = 0.5 * (r.trace() - 1.0);
    sin.atan2(cos)
}

fn random_walk(r: &mut impl Rng, n: usize) -> Vec<Pose> {
    let mut cur = Pose::identity();
    (0..n)
        .map(|_| {
            let step = Pose::from_rotation_vector(
                Vector3::new(r.random_range(-0.15..0.15), r.random_range(-0.15..0.15), r.random_range(-0.15..0.15)),
                Vector3::new(r.random_range(-0.3..0.3), r.random_range(-0.3..0.3), r.random_range(0.05..0.5)),
            );
            cur = cur.compose(&step);
            cur
        })
        .collect()
}

fn metric_oracle() -> Check {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for trial in 0..100u64 {
        let mut r = rng(1000 + trial);
        let gt = random_walk(&mut r, 50);
        let global = Pose::from_rotation_vector(random_unit(&mut r) * r.random_range(0.0..PI), random_unit(&mut r) * 5.0);
        let scale = if trial % 2 == 0 { 1.0 } else { r.random_range(0.3..3.0) };
        let est: Vec<Pose> = gt
            .iter()
            .map(|p| {
                let noise = Pose::from_rotation_vector(random_unit(&mut r) * r.random_range(0.0..0.05), random_unit(&mut r) * r.random_range(0.0..0.1));
                let q = p.compose(&noise);
                global.compose(&Pose::from_parts(*q.rotation(), q.translation() * scale))
            })
            .collect();
        let with_scale = trial % 2 == 1;
        let ev = evaluate(
            &Trajectory::uniform(0.05, gt.clone()).unwrap(),
            &Trajectory::uniform(0.05, est.clone()).unwrap(),
            0.01,
            with_scale,
            1,
        )
        .map_err(|e| format!("trial {trial}: {e}"))?;

        let q: Vec<Matrix4<f64>> = gt.iter().map(Pose::to_matrix).collect();
        let p: Vec<Matrix4<f64>> = est.iter().map(Pose::to_matrix).collect();
        let pos = |m: &Matrix4<f64>| Vector3::new(m[(0, 3)], m[(1, 3)], m[(2, 3)]);
        let s = umeyama(&p.iter().map(pos).collect::<Vec<_>>(), &q.iter().map(pos).collect::<Vec<_>>(), with_scale);
        for i in 0..50 {
            let e = q[i].try_inverse().unwrap() * s * p[i];
            worst = worst.max((pos(&e).norm() - ev.ate.errors[i]).abs());
        }
        for i in 0..49 {
            let dq = q[i].try_inverse().unwrap() * q[i + 1];
            let dp = p[i].try_inverse().unwrap() * p[i + 1];
            let e = dq.try_inverse().unwrap() * dp;
            worst = worst.max((pos(&e).norm() - ev.rpe.trans_errors[i]).abs());
            worst = worst.max((angle_of(&e) - ev.rpe.rot_errors[i]).abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(worst < 1e-9, || format!("max deviation {worst:.3e} ≥ 1e-9"))?;
    ensure(secs < 5.0, || format!("took {secs:.2} s ≥ 5 s"))?;
    Ok(format!("100 pairs, max deviation {worst:.2e}, {secs:.2} s"))
}

// ---------------------------------------------------------------- 2

fn hand_eye() -> Check {
    let table = [
        ("MiroCam", HandEye::miro_cam(), [2.9793, -27.0224, 72.1070]),
        ("HighCam", HandEye::high_cam(), [-46.2017, 20.9074, 94.6349]),
        ("LowCam", HandEye::low_cam(), [6.0169, 39.5114, 101.6431]),
    ];
    for (name, h, want) in table {
        let got = h.apply(&Vector3::zeros());
        for k in 0..3 {
            let rounded = (got[k] * 1e4).round() / 1e4;
            ensure(rounded == want[k], || format!("{name}[{k}] = {:.4}, table {:.4}", got[k], want[k]))?;
        }
    }
    Ok("origins of all three cameras match to 4 decimals".into())
}

// ---------------------------------------------------------------- 3

fn camera(w: usize, h: usize, f: f64) -> CameraIntrinsics {
    CameraIntrinsics::ideal(f, f, (w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0, w as u32, h as u32).unwrap()
}

fn loss_identities() -> Check {
    let (w, h) = (48, 40);
    let k = camera(w, h, 40.0);
    let mut worst = 0.0f64;
    for trial in 0..20u64 {
        let mut r = rng(3000 + trial);
        let img = texture(&mut r, w, h, 0.1, 0.9);
        let depth = DepthMap::constant(w, h, r.random_range(0.5..100.0));
        let pair = FramePair {
            target: &img,
            source: &img,
            depth_target: &depth,
            depth_source: Some(&depth),
            pose: &Pose::identity(),
            intrinsics: &k,
        };
        let rep = total_loss(&pair, &LossWeights::default(), &LossOptions::default()).map_err(|e| e.to_string())?;
        for v in [rep.photometric_masked, rep.smoothness, rep.geometry, rep.total] {
            worst = worst.max(v.abs());
        }
    }
    ensure(worst < 1e-6, || format!("identical pair loss {worst:.3e}"))?;

    let table = [
        ((3.0, 1.0), 0.5),
        ((1.0, 3.0), 0.5),
        ((1.0, 1.0), 0.0),
        ((2.0, 1.0), 1.0 / 3.0),
        ((4.0, 1.0), 0.6),
        ((9.0, 1.0), 0.8),
        ((0.5, 1.5), 0.5),
        ((1e-3, 1.0), 0.999 / 1.001),
    ];
    for ((a, b), want) in table {
        let got = depth_difference(a, b);
        ensure((got - want).abs() < 1e-15, || format!("D_diff({a}, {b}) = {got}, expected {want}"))?;
    }

    let mut r = rng(3100);
    let mut hi = 0.0f64;
    for _ in 0..1_000_000 {
        let a = 10f64.powf(r.random_range(-6.0..6.0));
        let b = 10f64.powf(r.random_range(-6.0..6.0));
        let d = depth_difference(a, b);
        ensure((0.0..1.0).contains(&d), || format!("D_diff({a}, {b}) = {d} outside [0, 1)"))?;
        hi = hi.max(d);
    }
    Ok(format!("identity loss ≤ {worst:.1e}; table exact; 10⁶ samples in [0, {hi:.9}]"))
}

// ---------------------------------------------------------------- 4

fn brightness() -> Check {
    let (w, h) = (40, 32);
    let k = camera(w, h, 35.0);
    let depth = DepthMap::constant(w, h, 10.0);
    let (mut worst_param, mut worst_l2, mut min_off) = (0.0f64, 0.0f64, f64::INFINITY);
    for trial in 0..100u64 {
        let mut r = rng(4000 + trial);
        let a: f64 = r.random_range(0.5..=2.0);
        let c: f64 = r.random_range(-0.2..=0.2);
        // keep a·I + c inside [0, 1]
        let (lo, hi) = ((-c / a).max(0.0), ((1.0 - c) / a).min(1.0));
        let span = hi - lo;
        let src = texture(&mut r, w, h, lo + 0.05 * span, hi - 0.05 * span);
        let target = src.map(|v| a * v + c);
        let pair = FramePair {
            target: &target,
            source: &src,
            depth_target: &depth,
            depth_source: None,
            pose: &Pose::identity(),
            intrinsics: &k,
        };
        let on = total_loss(&pair, &LossWeights::default(), &LossOptions::default()).map_err(|e| e.to_string())?;
        let off = total_loss(&pair, &LossWeights::default(), &LossOptions { brightness_alignment: false, ..Default::default() })
            .map_err(|e| e.to_string())?;
        worst_param = worst_param.max((on.brightness.a - a).abs()).max((on.brightness.c - c).abs());
        worst_l2 = worst_l2.max(on.l2);
        min_off = min_off.min(off.l2);
    }
    ensure(worst_param < 1e-6, || format!("(a, c) off by {worst_param:.3e}"))?;
    ensure(worst_l2 < 1e-9, || format!("aligned L2 {worst_l2:.3e}"))?;
    ensure(min_off > 1e-3, || format!("unaligned L2 only {min_off:.3e}"))?;
    Ok(format!("(a, c) within {worst_param:.1e}, aligned L2 ≤ {worst_l2:.1e}, unaligned L2 ≥ {min_off:.2e}"))
}

// ---------------------------------------------------------------- 5

struct PlaneScene {
    k: CameraIntrinsics,
    depth: f64,
    phase: [f64; 4],
}

impl PlaneScene {
    const W: usize = 64;
    const H: usize = 48;

    fn new(r: &mut impl Rng) -> Self {
        Self {
            k: camera(Self::W, Self::H, 40.0),
            depth: 50.0,
            phase: [0; 4].map(|_| r.random_range(0.0..2.0 * PI)),
        }
    }

    /// Intensity painted on the plane, indexed by reference-view pixel.
    fn paint(&self, x: f64, y: f64) -> f64 {
        let p = self.phase;
        0.4 + 0.12 * (0.15 * x + 0.05 * y + p[0]).sin()
            + 0.1 * (0.08 * x - 0.2 * y + p[1]).cos()
            + 0.06 * (0.4 * y + 0.1 * x + p[2]).sin() * (0.3 * x).cos()
            + 0.04 * (0.45 * x + 0.35 * y + p[3]).sin()
    }

    /// View from a camera whose frame relates to the reference by
    /// `x_cam = pose · x_ref`.
    fn render(&self, pose: &Pose, gain: f64) -> ImageBuffer {
        let (f, cx, cy) = (self.k.fx, self.k.cx, self.k.cy);
        let back = pose.inverse();
        let origin = back.transform_point(&Vector3::zeros());
        ImageBuffer::from_fn_gray(Self::W, Self::H, |u, v| {
            let dir = back.rotation() * Vector3::new((u as f64 - cx) / f, (v as f64 - cy) / f, 1.0);
            let hit = origin + dir * ((self.depth - origin.z) / dir.z);
            (gain * self.paint(f * hit.x / self.depth + cx, f * hit.y / self.depth + cy)).clamp(0.0, 1.0)
        })
    }
}

fn true_motion(r: &mut impl Rng) -> Pose {
    Pose::from_rotation_vector(random_unit(r) * 2f64.to_radians(), random_unit(r) * 5.0)
}

fn direct_alignment() -> Check {
    let start = Instant::now();
    let weights = LossWeights::default();
    let mut worst = (0.0f64, 0.0f64);
    for trial in 0..5u64 {
        let mut r = rng(5000 + trial);
        let scene = PlaneScene::new(&mut r);
        let motion = true_motion(&mut r);
        let target = scene.render(&Pose::identity(), 1.0);
        let source = scene.render(&motion, 1.0);
        let depth = DepthMap::constant(PlaneScene::W, PlaneScene::H, scene.depth);
        let res = refine_pose(&target, &source, &depth, &scene.k, &Pose::identity(), &weights, &AlignOptions::default())
            .map_err(|e| e.to_string())?;
        let err = res.pose.inverse().compose(&motion);
        let dt = (res.pose.translation() - motion.translation()).norm();
        let dr = err.rotation_angle().to_degrees();
        worst = (worst.0.max(dt), worst.1.max(dr));
    }
    ensure(worst.0 < 0.5 && worst.1 < 0.1, || format!("pose error {:.3} mm / {:.4}°", worst.0, worst.1))?;

    let mut wins = 0;
    for trial in 0..50u64 {
        let mut r = rng(5500 + trial);
        let scene = PlaneScene::new(&mut r);
        let motion = true_motion(&mut r);
        let target = scene.render(&Pose::identity(), 1.0);
        let source = scene.render(&motion, 1.3);
        let depth = DepthMap::constant(PlaneScene::W, PlaneScene::H, scene.depth);
        let run = |on: bool| {
            let opts = AlignOptions { brightness_alignment: on, ..AlignOptions::default() };
            refine_pose(&target, &source, &depth, &scene.k, &Pose::identity(), &weights, &opts).map(|r| r.final_loss)
        };
        let (on, off) = (run(true).map_err(|e| e.to_string())?, run(false).map_err(|e| e.to_string())?);
        wins += usize::from(on < off);
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(wins >= 45, || format!("brightness-on lower in only {wins}/50 trials"))?;
    ensure(secs < 60.0, || format!("took {secs:.1} s ≥ 60 s"))?;
    Ok(format!(
        "worst error {:.3} mm / {:.4}°; gain 1.3: on < off in {wins}/50; {secs:.1} s",
        worst.0, worst.1
    ))
}

// ---------------------------------------------------------------- 6

/// Non-local block evaluated position pair by position pair, no pooling.
fn esab_dense(x: &Tensor4, wts: &EsabWeights) -> Tensor4 {
    let [n, c, h, w] = x.shape();
    let hw = h * w;
    let conv = |k: &Conv1x1, input: &dyn Fn(usize) -> f64| -> Vec<f64> {
        (0..k.out_channels())
            .map(|o| k.bias()[o] + (0..k.in_channels()).map(|i| k.weight()[o * k.in_channels() + i] * input(i)).sum::<f64>())
            .collect()
    };
    let mut out = Tensor4::zeros(n, c, h, w);
    for b in 0..n {
        let at = |pos: usize| move |ch: usize| x.get(b, ch, pos / w, pos % w);
        let theta: Vec<Vec<f64>> = (0..hw).map(|p| conv(&wts.theta, &at(p))).collect();
        let phi: Vec<Vec<f64>> = (0..hw).map(|p| conv(&wts.phi, &at(p))).collect();
        let g: Vec<Vec<f64>> = (0..hw).map(|p| conv(&wts.g, &at(p))).collect();
        for i in 0..hw {
            let logits: Vec<f64> = (0..hw)
                .map(|j| {
                    let dot: f64 = theta[i].iter().zip(&phi[j]).map(|(a, b)| a * b).sum();
                    wts.psi.weight * dot.max(0.0) + wts.psi.bias
                })
                .collect();
            let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
            let z: f64 = e.iter().sum();
            let y: Vec<f64> = (0..g[0].len()).map(|k| (0..hw).map(|j| e[j] / z * g[j][k]).sum()).collect();
            let s = conv(&wts.out_proj, &|k| y[k]);
            for ch in 0..c {
                out.set(b, ch, i / w, i % w, s[ch] + x.get(b, ch, i / w, i % w));
            }
        }
    }
    out
}

fn esab() -> Check {
    let mut r = rng(6000);
    let x = Tensor4::from_fn(1, INPUT_CHANNELS, 8, 8, |_, _, _, _| r.random_range(-1.0..1.0));
    let wts = EsabWeights::random(32, 1, &mut r);
    let got = esab_forward(&x, &wts).map_err(|e| e.to_string())?;
    let diff = got.max_abs_diff(&esab_dense(&x, &wts)).ok_or("shape mismatch")?;
    ensure(diff < 1e-5, || format!("dense oracle deviation {diff:.3e}"))?;

    for trial in 0..20 {
        let shape = [r.random_range(1..4), INPUT_CHANNELS, r.random_range(1..20), r.random_range(1..20)];
        let x = Tensor4::from_fn(shape[0], shape[1], shape[2], shape[3], |_, _, _, _| r.random_range(-1.0..1.0));
        let wts = EsabWeights::random(r.random_range(1..40), r.random_range(1..4), &mut r);
        let y = esab_forward(&x, &wts).map_err(|e| e.to_string())?;
        ensure(y.shape() == shape, || format!("shape {trial}: {:?} became {:?}", shape, y.shape()))?;
    }

    let x = Tensor4::from_fn(2, INPUT_CHANNELS, 6, 5, |_, _, _, _| r.random_range(-10.0..10.0));
    let mut wts = EsabWeights::random(32, 2, &mut r);
    wts.out_proj = Conv1x1::zeros(32, INPUT_CHANNELS);
    let y = esab_forward(&x, &wts).map_err(|e| e.to_string())?;
    let same = y.data().iter().zip(x.data()).all(|(a, b)| a.to_bits() == b.to_bits());
    ensure(same, || "zero projection changed the input".into())?;
    Ok(format!("dense deviation {diff:.2e}; 20 shapes kept; zero projection bit-exact"))
}

// ---------------------------------------------------------------- 7

fn temporal_sync() -> Check {
    let (cam_rate, robot_rate) = (20.0, 100.0);
    let mut exact = 0;
    let mut low_score = 0;
    for trial in 0..100u64 {
        let mut r = rng(7000 + trial);
        let lag = r.random_range(-200i64..=200) as isize;
        let waves: Vec<(f64, f64, f64)> = (0..6)
            .map(|_| (r.random_range(0.02..1.5), r.random_range(0.2..1.0), r.random_range(0.0..2.0 * PI)))
            .collect();
        let speed = |t: f64| 2.0 + waves.iter().map(|(f, a, p)| a * (2.0 * PI * f * t + p).sin()).sum::<f64>();
        let robot: Vec<f64> = (0..(800.0 * robot_rate / cam_rate) as usize).map(|i| speed(i as f64 / robot_rate)).collect();
        let cam: Vec<f64> = (0..600)
            .map(|j| 0.01 * speed((j as isize + lag) as f64 / cam_rate) + r.random_range(-0.002..0.002))
            .collect();
        let res = sync_offset(
            &ScalarSignal::new(cam_rate, cam).unwrap(),
            &ScalarSignal::new(robot_rate, robot).unwrap(),
            &SyncOptions { max_lag: Some(250), min_overlap: None },
        )
        .map_err(|e| e.to_string())?;
        if res.score < 0.3 {
            low_score += 1;
        } else if res.lag == lag {
            exact += 1;
        }
    }
    ensure(exact >= 95, || format!("{exact}/100 lags exact ({low_score} below score 0.3)"))?;

    let mut worst = 0.0f64;
    for s in [-0.05, -0.001, 0.0, 0.003, 0.02, 0.1] {
        let f = FlowField::from_fn(40, 30, |x, y| (s * (x as f64 - 19.5), s * (y as f64 - 14.5)));
        worst = worst.max((divergence(&f).map_err(|e| e.to_string())? - 2.0 * s).abs());
    }
    ensure(worst < 1e-9, || format!("zoom divergence off by {worst:.3e}"))?;
    Ok(format!("{exact}/100 lags exact; zoom divergence within {worst:.1e}"))
}

// ---------------------------------------------------------------- 8

fn ransac() -> Check {
    let mut worst = 0.0f64;
    for seed in 0..100u64 {
        let mut r = rng(8000 + seed);
        let h = Matrix3::new(
            r.random_range(0.8..1.2),
            r.random_range(-0.2..0.2),
            r.random_range(-50.0..50.0),
            r.random_range(-0.2..0.2),
            r.random_range(0.8..1.2),
            r.random_range(-50.0..50.0),
            r.random_range(-3e-4..3e-4),
            r.random_range(-3e-4..3e-4),
            1.0,
        );
        let map = |p: &Point2, m: &Matrix3<f64>| {
            let q = m * Vector3::new(p.x, p.y, 1.0);
            Point2::new(q.x / q.z, q.y / q.z)
        };
        let n = 200;
        let mut pairs = Vec::with_capacity(n);
        let mut inliers = Vec::new();
        for i in 0..n {
            let src = Point2::new(r.random_range(0.0..640.0), r.random_range(0.0..480.0));
            if i % 10 < 7 {
                pairs.push((src, map(&src, &h)));
                inliers.push(i);
            } else {
                pairs.push((src, Point2::new(r.random_range(-100.0..740.0), r.random_range(-100.0..580.0))));
            }
        }
        let res = ransac_homography(&pairs, &RansacOptions { seed, ..RansacOptions::default() })
            .map_err(|e| format!("seed {seed}: {e}"))?;
        let est = *res.homography.matrix();
        for &i in &inliers {
            let (s, d) = pairs[i];
            worst = worst.max((map(&s, &est) - d).norm());
        }
        ensure(worst < 0.5, || format!("seed {seed}: inlier error {worst:.3} px"))?;
    }
    Ok(format!("100 seeds, worst inlier error {worst:.2e} px"))
}

// ---------------------------------------------------------------- 9

fn icp() -> Check {
    let mut worst = 0.0f64;
    for trial in 0..5u64 {
        let mut r = rng(9000 + trial);
        let pts: Vec<Vector3<f64>> = (0..10_000)
            .map(|_| {
                let (u, v): (f64, f64) = (r.random_range(0.0..1.0), r.random_range(0.0..1.0));
                Vector3::new(40.0 * u, 30.0 * v, 5.0 * (9.0 * u).sin() * (7.0 * v + 0.5).cos() + 8.0 * u * u)
            })
            .collect();
        let target = PointCloud::new(pts, Unit::Millimeters).unwrap();
        let extent = target.extent();
        let angle = r.random_range(0.0..=10f64.to_radians());
        let shift = random_unit(&mut r) * r.random_range(0.0..=0.1 * extent);
        let perturb = Pose::from_rotation_vector(random_unit(&mut r) * angle, shift);
        let source = target.transformed(&perturb.inverse());
        let opts = IcpOptions::default();
        let res = icp_cloud_to_target(&source, IcpTarget::Cloud(&target), &Pose::identity(), &opts)
            .map_err(|e| format!("trial {trial}: {e}"))?;
        let rmse = res.final_rmse_cm / Unit::Millimeters.to_cm();
        worst = worst.max(rmse);
        ensure(rmse < 1e-6, || {
            format!("trial {trial} ({:.1}°, {:.2} mm): final RMSE {rmse:.3e} mm", angle.to_degrees(), shift.norm())
        })?;
        let first_small = res.rmse_cm.windows(2).position(|w| (w[1] - w[0]).abs() < opts.tolerance_cm);
        ensure(res.converged && first_small == Some(res.rmse_cm.len() - 2), || {
            format!("trial {trial}: stopped after {} updates, first |ΔRMSE| < tol at {first_small:?}", res.rmse_cm.len() - 1)
        })?;
    }
    Ok(format!("5 perturbations ≤ 10° / 10% extent, worst final RMSE {worst:.2e} mm, stopped at first small step"))
}

// ---------------------------------------------------------------- 10

fn shape_from_shading() -> Check {
    let mut worst = f64::INFINITY;
    for (size, radius) in [(64usize, 28.0), (96, 40.0), (80, 30.0)] {
        let c = (size as f64 - 1.0) / 2.0;
        let mut interior = Vec::new();
        let img = ImageBuffer::from_fn_gray(size, size, |x, y| {
            let (dx, dy) = (x as f64 - c, y as f64 - c);
            let r2 = dx * dx + dy * dy;
            if r2 >= radius * radius {
                return 0.0;
            }
            let height = (radius * radius - r2).sqrt();
            if r2 < (0.9 * radius) * (0.9 * radius) {
                // camera-to-surface distance, the sphere centre 200 units away
                interior.push((x, y, 200.0 - height));
            }
            height / radius
        });
        let d = tsai_shah_sfs(&img, &SfsOptions::default()).map_err(|e| e.to_string())?;
        let est: Vec<f64> = interior.iter().map(|&(x, y, _)| d.get(x, y).unwrap_or(f64::NAN)).collect();
        let truth: Vec<f64> = interior.iter().map(|p| p.2).collect();
        let rho = spearman(&est, &truth);
        worst = worst.min(rho);
        ensure(rho >= 0.9, || format!("{size}px hemisphere: Spearman {rho:.4}"))?;

        for gain in [0.5, 0.8] {
            let dim = img.map(|v| gain * v);
            let d2 = tsai_shah_sfs(&dim, &SfsOptions::default()).map_err(|e| e.to_string())?;
            let rank = spearman(d.data(), d2.data());
            ensure(rank == 1.0, || format!("contrast ×{gain}: rank correlation {rank}"))?;
        }
    }
    Ok(format!("worst interior Spearman {worst:.4}; contrast-scaled runs rank-identical"))
}

// ---------------------------------------------------------------- 11

fn run_augment(dir: &Path, out: &str, threads: &str) -> Result<(), String> {
    let o = Command::new(env!("CARGO_BIN_EXE_endovo"))
        .args(["augment", "frames", out, "--spec", "spec.txt", "--depth-dir", "depth"])
        .current_dir(dir)
        .env("ENDOVO_THREADS", threads)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(o.status.success(), || String::from_utf8_lossy(&o.stderr).into_owned())
}

fn augmentation() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let dir = tmp.path();
    std::fs::create_dir(dir.join("frames")).unwrap();
    std::fs::create_dir(dir.join("depth")).unwrap();
    let mut r = rng(11_000);
    for i in 0..100 {
        let img = texture(&mut r, 64, 48, 0.05, 0.95);
        let rgb = ImageBuffer::from_channels(&[img.channel(0), img.map(|v| 1.0 - v).channel(0), img.map(|v| v * v).channel(0)])
            .unwrap();
        write_image(&dir.join(format!("frames/{i:03}.png")), &rgb).unwrap();
        let tilt = r.random_range(-0.01..0.01);
        write_depth(&dir.join(format!("depth/{i:03}.depth")), &DepthMap::from_fn(64, 48, |x, y| 0.05 + tilt * x as f64 + 0.0005 * y as f64 + 0.6))
            .unwrap();
    }
    std::fs::write(
        dir.join("spec.txt"),
        "resize width=56 height=42\nblur alpha=5 beta=1.2 gamma=2\nvignette strength=0.6\nfisheye nu=0.9\ndof focus=0.4 max_sigma=3\nsubsample factor=3\n",
    )
    .unwrap();
    run_augment(dir, "a", "1")?;
    run_augment(dir, "b", "4")?;
    let mut files: Vec<_> = std::fs::read_dir(dir.join("a")).unwrap().map(|e| e.unwrap().file_name()).collect();
    files.sort();
    ensure(files.len() == 35, || format!("expected 34 frames + manifest, got {} files", files.len()))?;
    for f in &files {
        let a = std::fs::read(dir.join("a").join(f)).unwrap();
        let b = std::fs::read(dir.join("b").join(f)).map_err(|e| format!("{f:?}: {e}"))?;
        ensure(a == b, || format!("{f:?} differs between runs"))?;
    }

    let mut worst = 0.0f64;
    let identity = "resize width=40 height=30\nblur alpha=1 beta=1 gamma=4\nvignette strength=0\ndof focus=0.5 max_sigma=0\nsubsample factor=1\n";
    let spec: AugmentSpec = identity.parse().map_err(|e| format!("{e}"))?;
    for _ in 0..10 {
        let img = texture(&mut r, 40, 30, 0.0, 1.0);
        let depth = DepthMap::from_fn(40, 30, |x, y| 1.0 + 0.1 * (x + y) as f64);
        for t in &spec.transforms {
            let single = AugmentSpec::new(vec![*t]).unwrap();
            let out = single.apply(&img, Some(&depth)).map_err(|e| e.to_string())?;
            let d = out.data().iter().zip(img.data()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            worst = worst.max(d);
        }
        ensure(spec.selected_frames(10).len() == 10, || "subsample factor=1 dropped frames".into())?;
    }
    ensure(worst < 1e-9, || format!("identity transforms changed pixels by {worst:.3e}"))?;
    Ok(format!("100 frames → {} files byte-identical across runs; identity transforms within {worst:.1e}", files.len()))
}

fn main() {
    let checks: [(&str, fn() -> Check); 11] = [
        ("trajectory metrics vs matrix oracle", metric_oracle),
        ("hand-eye table origins", hand_eye),
        ("loss identities", loss_identities),
        ("brightness alignment", brightness),
        ("direct photometric alignment", direct_alignment),
        ("ESAB vs dense oracle", esab),
        ("temporal synchronization", temporal_sync),
        ("RANSAC homography", ransac),
        ("ICP registration", icp),
        ("shape from shading", shape_from_shading),
        ("augmentation determinism", augmentation),
    ];
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail} [{secs:.1} s]", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {why} [{secs:.1} s]", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", checks.len() - failed, checks.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
