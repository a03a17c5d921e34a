//! Keypoint detection (difference of Gaussians or Harris corners) with
//! rotation-normalized 4×4×8 gradient-histogram descriptors.

use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::{Euclid, Float};

use super::ReconError;
use crate::imaging::{convolve_separable, gaussian_kernel, ImageBuffer, Raster};

pub const DESCRIPTOR_LEN: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    /// Gaussian scale in input pixels.
    pub scale: f64,
    /// Dominant gradient direction, radians in `[0, 2π)`.
    pub orientation: f64,
    pub response: f64,
}

/// Keypoints with unit-length descriptors, ordered by decreasing response.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureSet {
    keypoints: Vec<Keypoint>,
    descriptors: Vec<f64>,
}

impl FeatureSet {
    /// `descriptors` holds `DESCRIPTOR_LEN` values per keypoint; each row is
    /// rescaled to unit length (rows that are all zero are rejected).
    pub fn new(keypoints: Vec<Keypoint>, mut descriptors: Vec<f64>) -> Result<Self, ReconError> {
        if descriptors.len() != keypoints.len() * DESCRIPTOR_LEN {
            return Err(ReconError::BadParameter("descriptor length must be 128 per keypoint"));
        }
        for row in descriptors.chunks_exact_mut(DESCRIPTOR_LEN) {
            let n = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if !(n > 0.0) || !n.is_finite() {
                return Err(ReconError::BadParameter("descriptor rows must be non-zero and finite"));
            }
            row.iter_mut().for_each(|v| *v /= n);
        }
        Ok(Self { keypoints, descriptors })
    }

    pub fn len(&self) -> usize {
        self.keypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keypoints.is_empty()
    }

    pub fn keypoints(&self) -> &[Keypoint] {
        &self.keypoints
    }

    pub fn descriptor(&self, i: usize) -> &[f64] {
        &self.descriptors[i * DESCRIPTOR_LEN..(i + 1) * DESCRIPTOR_LEN]
    }

    /// All descriptors, row-major.
    pub fn descriptors(&self) -> &[f64] {
        &self.descriptors
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DogParams {
    pub scales_per_octave: usize,
    /// Scale of the first level of every octave.
    pub sigma: f64,
    /// Minimum |DoG| at the refined extremum (intensities in `[0, 1]`).
    pub contrast_threshold: f64,
    /// Maximum ratio of principal curvatures.
    pub edge_ratio: f64,
    pub max_features: usize,
    /// Octaves stop once the shorter side drops below this.
    pub min_octave_size: usize,
}

impl Default for DogParams {
    fn default() -> Self {
        Self {
            scales_per_octave: 3,
            sigma: 1.6,
            contrast_threshold: 0.01,
            edge_ratio: 10.0,
            max_features: 2000,
            min_octave_size: 16,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarrisParams {
    pub derivative_sigma: f64,
    pub integration_sigma: f64,
    pub k: f64,
    /// Responses below this fraction of the strongest are dropped.
    pub relative_threshold: f64,
    pub nms_radius: usize,
    pub max_features: usize,
}

impl Default for HarrisParams {
    fn default() -> Self {
        Self {
            derivative_sigma: 1.0,
            integration_sigma: 2.0,
            k: 0.04,
            relative_threshold: 0.01,
            nms_radius: 3,
            max_features: 2000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Detector {
    Dog(DogParams),
    Harris(HarrisParams),
}

impl Default for Detector {
    fn default() -> Self {
        Detector::Dog(DogParams::default())
    }
}

pub fn detect_and_describe(img: &ImageBuffer, detector: &Detector) -> Result<FeatureSet, ReconError> {
    let gray = img.to_gray().channel(0);
    let mut feats = match detector {
        Detector::Dog(p) => dog_features(&gray, p)?,
        Detector::Harris(p) => harris_features(&gray, p)?,
    };
    let max = match detector {
        Detector::Dog(p) => p.max_features,
        Detector::Harris(p) => p.max_features,
    };
    feats.sort_by(|a, b| {
        b.0.response
            .total_cmp(&a.0.response)
            .then(a.0.y.total_cmp(&b.0.y))
            .then(a.0.x.total_cmp(&b.0.x))
    });
    feats.truncate(max);
    if feats.is_empty() {
        return Err(ReconError::NoFeatures);
    }
    let mut keypoints = Vec::with_capacity(feats.len());
    let mut descriptors = Vec::with_capacity(feats.len() * DESCRIPTOR_LEN);
    for (k, d) in feats {
        keypoints.push(k);
        descriptors.extend_from_slice(&d);
    }
    Ok(FeatureSet { keypoints, descriptors })
}

fn blur(r: &Raster, sigma: f64) -> Raster {
    if sigma <= 1e-6 {
        return r.clone();
    }
    let size = 2 * (3.0 * sigma).ceil() as usize + 1;
    let k = gaussian_kernel(size, sigma).expect("odd size and positive sigma");
    convolve_separable(r, &k)
}

fn downsample(r: &Raster) -> Raster {
    Raster::from_fn(r.width().div_ceil(2), r.height().div_ceil(2), |x, y| r.get(2 * x, 2 * y))
}

/// Central-difference gradient (one-sided at the border) as (magnitude, angle).
#[inline]
fn grad_at(r: &Raster, x: usize, y: usize) -> (f64, f64) {
    let (w, h) = (r.width(), r.height());
    let gx = if x == 0 || x + 1 >= w {
        0.0
    } else {
        0.5 * (r.get(x + 1, y) - r.get(x - 1, y))
    };
    let gy = if y == 0 || y + 1 >= h {
        0.0
    } else {
        0.5 * (r.get(x, y + 1) - r.get(x, y - 1))
    };
    ((gx * gx + gy * gy).sqrt(), gy.atan2(gx))
}

/// Dominant orientation from a 36-bin, Gaussian-weighted histogram of
/// gradient directions around `(x, y)`; `None` in flat regions.
fn dominant_orientation(r: &Raster, x: f64, y: f64, sigma: f64) -> Option<f64> {
    const BINS: usize = 36;
    let sw = 1.5 * sigma;
    let rad = (3.0 * sw).round().max(1.0) as isize;
    let (cx, cy) = (x.round() as isize, y.round() as isize);
    let mut hist = [0.0f64; BINS];
    for dy in -rad..=rad {
        for dx in -rad..=rad {
            let (px, py) = (cx + dx, cy + dy);
            if px <= 0 || py <= 0 || px + 1 >= r.width() as isize || py + 1 >= r.height() as isize {
                continue;
            }
            let (fx, fy) = (px as f64 - x, py as f64 - y);
            let wgt = (-(fx * fx + fy * fy) / (2.0 * sw * sw)).exp();
            let (m, a) = grad_at(r, px as usize, py as usize);
            let b = (Euclid::rem_euclid(&a, &(2.0 * PI)) * BINS as f64 / (2.0 * PI)).floor() as usize % BINS;
            hist[b] += wgt * m;
        }
    }
    for _ in 0..2 {
        let prev = hist;
        for i in 0..BINS {
            hist[i] = (prev[(i + BINS - 1) % BINS] + prev[i] + prev[(i + 1) % BINS]) / 3.0;
        }
    }
    let (best, &peak) = hist.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))?;
    if !(peak > 1e-12) {
        return None;
    }
    let l = hist[(best + BINS - 1) % BINS];
    let rr = hist[(best + 1) % BINS];
    let denom = l - 2.0 * peak + rr;
    let off = if denom.abs() > 1e-15 { 0.5 * (l - rr) / denom } else { 0.0 };
    Some(Euclid::rem_euclid(&((best as f64 + 0.5 + off) * 2.0 * PI / BINS as f64), &(2.0 * PI)))
}

/// 4×4 spatial cells × 8 orientation bins, each cell `3σ` wide, sampled on
/// the pixel grid and rotated into the keypoint frame with trilinear voting.
fn describe(r: &Raster, x: f64, y: f64, sigma: f64, orientation: f64) -> Option<[f64; DESCRIPTOR_LEN]> {
    let cell = 3.0 * sigma;
    let (c, s) = (orientation.cos(), orientation.sin());
    let rad = (cell * 2.0 * core::f64::consts::SQRT_2 + cell).ceil() as isize;
    let (cx, cy) = (x.round() as isize, y.round() as isize);
    let mut d = [0.0f64; DESCRIPTOR_LEN];
    for dy in -rad..=rad {
        for dx in -rad..=rad {
            let (px, py) = (cx + dx, cy + dy);
            if px <= 0 || py <= 0 || px + 1 >= r.width() as isize || py + 1 >= r.height() as isize {
                continue;
            }
            let (fx, fy) = (px as f64 - x, py as f64 - y);
            let rx = (c * fx + s * fy) / cell;
            let ry = (-s * fx + c * fy) / cell;
            let (bx, by) = (rx + 1.5, ry + 1.5);
            if bx <= -1.0 || bx >= 4.0 || by <= -1.0 || by >= 4.0 {
                continue;
            }
            let (m, a) = grad_at(r, px as usize, py as usize);
            if m == 0.0 {
                continue;
            }
            let wgt = m * (-(rx * rx + ry * ry) / 8.0).exp();
            let bo = Euclid::rem_euclid(&(a - orientation), &(2.0 * PI)) * 8.0 / (2.0 * PI);
            let (x0, y0, o0) = (bx.floor(), by.floor(), bo.floor());
            let (ax, ay, ao) = (bx - x0, by - y0, bo - o0);
            for (ix, wx) in [(x0 as isize, 1.0 - ax), (x0 as isize + 1, ax)] {
                if !(0..4).contains(&ix) {
                    continue;
                }
                for (iy, wy) in [(y0 as isize, 1.0 - ay), (y0 as isize + 1, ay)] {
                    if !(0..4).contains(&iy) {
                        continue;
                    }
                    for (io, wo) in [(o0 as usize % 8, 1.0 - ao), ((o0 as usize + 1) % 8, ao)] {
                        d[((iy as usize) * 4 + ix as usize) * 8 + io] += wgt * wx * wy * wo;
                    }
                }
            }
        }
    }
    let normalize = |d: &mut [f64; DESCRIPTOR_LEN]| {
        let n = d.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > 0.0 {
            d.iter_mut().for_each(|v| *v /= n);
        }
        n
    };
    if !(normalize(&mut d) > 1e-12) {
        return None;
    }
    d.iter_mut().for_each(|v| *v = v.min(0.2));
    normalize(&mut d);
    Some(d)
}

type Feature = (Keypoint, [f64; DESCRIPTOR_LEN]);

fn dog_features(gray: &Raster, p: &DogParams) -> Result<Vec<Feature>, ReconError> {
    if p.scales_per_octave == 0 || !(p.sigma > 0.5) || !(p.edge_ratio > 1.0) {
        return Err(ReconError::BadParameter("invalid difference-of-Gaussians parameters"));
    }
    let s = p.scales_per_octave;
    let k = 2f64.powf(1.0 / s as f64);
    // the input is assumed to carry a blur of 0.5 px already
    let mut base = blur(gray, (p.sigma * p.sigma - 0.25).sqrt());
    let mut out = Vec::new();
    let mut octave = 0;
    while base.width().min(base.height()) >= p.min_octave_size.max(4) {
        let mut gauss = Vec::with_capacity(s + 3);
        gauss.push(base.clone());
        for i in 1..s + 3 {
            let prev = p.sigma * k.powi(i as i32 - 1);
            let total = prev * k;
            let next = blur(&gauss[i - 1], (total * total - prev * prev).sqrt());
            gauss.push(next);
        }
        let dog: Vec<Raster> = gauss
            .windows(2)
            .map(|g| Raster::from_fn(g[0].width(), g[0].height(), |x, y| g[1].get(x, y) - g[0].get(x, y)))
            .collect();
        let step = (1usize << octave) as f64;
        let (w, h) = (base.width(), base.height());
        for layer in 1..=s {
            // responses this close to the border depend on the edge padding
            let m = ((3.0 * p.sigma * k.powi(layer as i32 + 1)).ceil() as usize).max(1);
            if 2 * m >= w.min(h) {
                continue;
            }
            for y in m..h - m {
                for x in m..w - m {
                    let v = dog[layer].get(x, y);
                    if v.abs() < 0.5 * p.contrast_threshold || !is_extremum(&dog, layer, x, y) {
                        continue;
                    }
                    let Some((ox, oy, os, value)) = refine(&dog, layer, x, y) else { continue };
                    if value.abs() < p.contrast_threshold || !passes_edge_test(&dog[layer], x, y, p.edge_ratio) {
                        continue;
                    }
                    let (fx, fy) = (x as f64 + ox, y as f64 + oy);
                    let sigma_oct = p.sigma * k.powf(layer as f64 + os);
                    let g = &gauss[layer];
                    let Some(theta) = dominant_orientation(g, fx, fy, sigma_oct) else { continue };
                    let Some(desc) = describe(g, fx, fy, sigma_oct, theta) else { continue };
                    out.push((
                        Keypoint {
                            x: fx * step,
                            y: fy * step,
                            scale: sigma_oct * step,
                            orientation: theta,
                            response: value.abs(),
                        },
                        desc,
                    ));
                }
            }
        }
        base = downsample(&gauss[s]);
        octave += 1;
    }
    Ok(out)
}

fn is_extremum(dog: &[Raster], layer: usize, x: usize, y: usize) -> bool {
    let v = dog[layer].get(x, y);
    let (mut is_max, mut is_min) = (true, true);
    for l in layer - 1..=layer + 1 {
        for yy in y - 1..=y + 1 {
            for xx in x - 1..=x + 1 {
                if l == layer && xx == x && yy == y {
                    continue;
                }
                let n = dog[l].get(xx, yy);
                is_max &= v > n;
                is_min &= v < n;
                if !is_max && !is_min {
                    return false;
                }
            }
        }
    }
    true
}

/// One quadratic step in (x, y, scale). Returns offsets within half a sample
/// and the interpolated value.
fn refine(dog: &[Raster], l: usize, x: usize, y: usize) -> Option<(f64, f64, f64, f64)> {
    let d = |dl: isize, dx: isize, dy: isize| {
        dog[(l as isize + dl) as usize].get((x as isize + dx) as usize, (y as isize + dy) as usize)
    };
    let v = d(0, 0, 0);
    let g = Vector3::new(
        0.5 * (d(0, 1, 0) - d(0, -1, 0)),
        0.5 * (d(0, 0, 1) - d(0, 0, -1)),
        0.5 * (d(1, 0, 0) - d(-1, 0, 0)),
    );
    let dxx = d(0, 1, 0) - 2.0 * v + d(0, -1, 0);
    let dyy = d(0, 0, 1) - 2.0 * v + d(0, 0, -1);
    let dss = d(1, 0, 0) - 2.0 * v + d(-1, 0, 0);
    let dxy = 0.25 * (d(0, 1, 1) - d(0, -1, 1) - d(0, 1, -1) + d(0, -1, -1));
    let dxs = 0.25 * (d(1, 1, 0) - d(1, -1, 0) - d(-1, 1, 0) + d(-1, -1, 0));
    let dys = 0.25 * (d(1, 0, 1) - d(1, 0, -1) - d(-1, 0, 1) + d(-1, 0, -1));
    let hm = Matrix3::new(dxx, dxy, dxs, dxy, dyy, dys, dxs, dys, dss);
    let off = -(hm.try_inverse()? * g);
    if off.iter().any(|o| !o.is_finite() || o.abs() > 0.6) {
        return None;
    }
    Some((off.x, off.y, off.z, v + 0.5 * g.dot(&off)))
}

fn passes_edge_test(r: &Raster, x: usize, y: usize, ratio: f64) -> bool {
    let v = r.get(x, y);
    let dxx = r.get(x + 1, y) - 2.0 * v + r.get(x - 1, y);
    let dyy = r.get(x, y + 1) - 2.0 * v + r.get(x, y - 1);
    let dxy = 0.25 * (r.get(x + 1, y + 1) - r.get(x - 1, y + 1) - r.get(x + 1, y - 1) + r.get(x - 1, y - 1));
    let tr = dxx + dyy;
    let det = dxx * dyy - dxy * dxy;
    det > 0.0 && tr * tr * ratio < (ratio + 1.0) * (ratio + 1.0) * det
}

fn harris_features(gray: &Raster, p: &HarrisParams) -> Result<Vec<Feature>, ReconError> {
    if !(p.derivative_sigma >= 0.0) || !(p.integration_sigma > 0.0) || !(p.relative_threshold >= 0.0) {
        return Err(ReconError::BadParameter("invalid Harris parameters"));
    }
    let (w, h) = (gray.width(), gray.height());
    let smooth = blur(gray, p.derivative_sigma);
    let (mut ixx, mut iyy, mut ixy) = (
        Raster::filled(w, h, 0.0),
        Raster::filled(w, h, 0.0),
        Raster::filled(w, h, 0.0),
    );
    for y in 0..h {
        for x in 0..w {
            let (m, a) = grad_at(&smooth, x, y);
            let (gx, gy) = (m * a.cos(), m * a.sin());
            ixx.set(x, y, gx * gx);
            iyy.set(x, y, gy * gy);
            ixy.set(x, y, gx * gy);
        }
    }
    let (ixx, iyy, ixy) = (
        blur(&ixx, p.integration_sigma),
        blur(&iyy, p.integration_sigma),
        blur(&ixy, p.integration_sigma),
    );
    let resp = Raster::from_fn(w, h, |x, y| {
        let (a, b, c) = (ixx.get(x, y), iyy.get(x, y), ixy.get(x, y));
        a * b - c * c - p.k * (a + b) * (a + b)
    });
    let max = resp.data().iter().copied().fold(0.0, f64::max);
    if !(max > 1e-12) {
        return Ok(Vec::new());
    }
    let r = p.nms_radius.max(1);
    let margin = r + 1;
    let mut out = Vec::new();
    for y in margin..h.saturating_sub(margin) {
        for x in margin..w.saturating_sub(margin) {
            let v = resp.get(x, y);
            if v < p.relative_threshold * max {
                continue;
            }
            let mut is_max = true;
            'nms: for yy in y - r..=y + r {
                for xx in x - r..=x + r {
                    let n = resp.get(xx, yy);
                    // ties resolved towards the first pixel in raster order
                    if (xx, yy) != (x, y) && (n > v || (n == v && (yy, xx) < (y, x))) {
                        is_max = false;
                        break 'nms;
                    }
                }
            }
            if !is_max {
                continue;
            }
            let parabola = |l: f64, c: f64, rr: f64| {
                let den = l - 2.0 * c + rr;
                if den.abs() > 1e-15 {
                    (0.5 * (l - rr) / den).clamp(-0.5, 0.5)
                } else {
                    0.0
                }
            };
            let fx = x as f64 + parabola(resp.get(x - 1, y), v, resp.get(x + 1, y));
            let fy = y as f64 + parabola(resp.get(x, y - 1), v, resp.get(x, y + 1));
            let sigma = p.integration_sigma;
            let Some(theta) = dominant_orientation(&smooth, fx, fy, sigma) else { continue };
            let Some(desc) = describe(&smooth, fx, fy, sigma, theta) else { continue };
            out.push((
                Keypoint {
                    x: fx,
                    y: fy,
                    scale: sigma,
                    orientation: theta,
                    response: v,
                },
                desc,
            ));
        }
    }
    Ok(out)
}
