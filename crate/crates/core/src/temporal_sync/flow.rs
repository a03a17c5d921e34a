use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;

use super::SyncError;
use crate::imaging::{bilinear, check_dims, ImageBuffer, Raster};

/// Dense flow in pixels per frame. Pixels whose structure tensor is
/// ill-conditioned carry zero flow and `confident = false`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    pub u: Raster,
    pub v: Raster,
    pub confident: Vec<bool>,
}

impl FlowField {
    /// A field with every pixel confident.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> (f64, f64)) -> Self {
        let mut u = Raster::filled(width, height, 0.0);
        let mut v = Raster::filled(width, height, 0.0);
        for y in 0..height {
            for x in 0..width {
                let (a, b) = f(x, y);
                u.set(x, y, a);
                v.set(x, y, b);
            }
        }
        Self {
            u,
            v,
            confident: alloc::vec![true; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.u.width()
    }

    pub fn height(&self) -> usize {
        self.u.height()
    }

    #[inline]
    pub fn is_confident(&self, x: usize, y: usize) -> bool {
        self.confident[y * self.width() + x]
    }

    pub fn confident_count(&self) -> usize {
        self.confident.iter().filter(|c| **c).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LkOptions {
    /// Odd window size.
    pub window: usize,
    /// Newton refinements, each resampling the second frame at the current flow.
    pub iterations: usize,
    /// Minimum eigenvalue of the window-averaged structure tensor.
    pub min_eigen: f64,
}

impl Default for LkOptions {
    fn default() -> Self {
        Self {
            window: 7,
            iterations: 3,
            min_eigen: 1e-6,
        }
    }
}

pub fn lk_flow(i1: &ImageBuffer, i2: &ImageBuffer, window: usize) -> Result<FlowField, SyncError> {
    lk_flow_with(
        i1,
        i2,
        &LkOptions {
            window,
            ..LkOptions::default()
        },
    )
}

/// Windowed Lucas–Kanade on the luma of both frames.
///
/// Spatial gradients are central differences of the first frame (one-sided at
/// the border); the window is clipped at the image edge.
pub fn lk_flow_with(i1: &ImageBuffer, i2: &ImageBuffer, opts: &LkOptions) -> Result<FlowField, SyncError> {
    check_dims((i1.width(), i1.height()), (i2.width(), i2.height()))?;
    if opts.window < 3 || opts.window % 2 == 0 {
        return Err(SyncError::BadWindow(opts.window));
    }
    let a = i1.to_gray().channel(0);
    let b = i2.to_gray().channel(0);
    let (w, h) = (a.width(), a.height());
    let (gx, gy) = central_gradients(&a);
    let r = (opts.window / 2) as isize;

    let mut flow = FlowField {
        u: Raster::filled(w, h, 0.0),
        v: Raster::filled(w, h, 0.0),
        confident: alloc::vec![false; w * h],
    };
    let sample_b = |x: f64, y: f64| {
        let x = x.clamp(0.0, (w - 1) as f64);
        let y = y.clamp(0.0, (h - 1) as f64);
        bilinear(w, h, x, y, |ix, iy| Some(b.get(ix, iy))).unwrap_or(0.0)
    };

    for cy in 0..h {
        for cx in 0..w {
            let win = window_coords(cx, cy, r, w, h);
            let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
            for &(x, y) in &win {
                let (ix, iy) = (gx.get(x, y), gy.get(x, y));
                sxx += ix * ix;
                sxy += ix * iy;
                syy += iy * iy;
            }
            let n = win.len() as f64;
            let tr = (sxx + syy) / n;
            let det = (sxx * syy - sxy * sxy) / (n * n);
            let lambda_min = 0.5 * (tr - (tr * tr - 4.0 * det).max(0.0).sqrt());
            if !(lambda_min >= opts.min_eigen) {
                continue;
            }
            let det_raw = sxx * syy - sxy * sxy;
            let (mut u, mut v) = (0.0, 0.0);
            for _ in 0..opts.iterations.max(1) {
                let (mut bx, mut by) = (0.0, 0.0);
                for &(x, y) in &win {
                    let it = sample_b(x as f64 + u, y as f64 + v) - a.get(x, y);
                    bx -= gx.get(x, y) * it;
                    by -= gy.get(x, y) * it;
                }
                let du = (syy * bx - sxy * by) / det_raw;
                let dv = (sxx * by - sxy * bx) / det_raw;
                u += du;
                v += dv;
                if du.abs().max(dv.abs()) < 1e-6 {
                    break;
                }
            }
            flow.u.set(cx, cy, u);
            flow.v.set(cx, cy, v);
            flow.confident[cy * w + cx] = true;
        }
    }
    Ok(flow)
}

fn window_coords(cx: usize, cy: usize, r: isize, w: usize, h: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            let (x, y) = (cx as isize + dx, cy as isize + dy);
            if x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h {
                out.push((x as usize, y as usize));
            }
        }
    }
    out
}

fn central_gradients(r: &Raster) -> (Raster, Raster) {
    let (w, h) = (r.width(), r.height());
    let d = |lo: f64, hi: f64, span: usize| if span == 0 { 0.0 } else { (hi - lo) / span as f64 };
    let gx = Raster::from_fn(w, h, |x, y| {
        let (l, rr) = (x.saturating_sub(1), (x + 1).min(w - 1));
        d(r.get(l, y), r.get(rr, y), rr - l)
    });
    let gy = Raster::from_fn(w, h, |x, y| {
        let (t, b) = (y.saturating_sub(1), (y + 1).min(h - 1));
        d(r.get(x, t), r.get(x, b), b - t)
    });
    (gx, gy)
}

/// Mean of `∂u/∂x + ∂v/∂y` (central differences) over confident pixels whose
/// four neighbors are also confident.
pub fn divergence(f: &FlowField) -> Result<f64, SyncError> {
    let (w, h) = (f.width(), f.height());
    let mut sum = 0.0;
    let mut n = 0usize;
    for y in 1..h.saturating_sub(1) {
        for x in 1..w.saturating_sub(1) {
            let ok = f.is_confident(x, y)
                && f.is_confident(x - 1, y)
                && f.is_confident(x + 1, y)
                && f.is_confident(x, y - 1)
                && f.is_confident(x, y + 1);
            if ok {
                sum += 0.5 * (f.u.get(x + 1, y) - f.u.get(x - 1, y)) + 0.5 * (f.v.get(x, y + 1) - f.v.get(x, y - 1));
                n += 1;
            }
        }
    }
    if n == 0 {
        return Err(SyncError::NoConfidentPixels);
    }
    Ok(sum / n as f64)
}

/// Divergence of the flow between each consecutive pair of frames.
pub fn divergence_series(frames: &[ImageBuffer], opts: &LkOptions) -> Result<Vec<f64>, SyncError> {
    frames
        .windows(2)
        .map(|pair| divergence(&lk_flow_with(&pair[0], &pair[1], opts)?))
        .collect()
}
