//! Minimal raster plots: no fonts, just geometry and colour.

use std::path::Path;

use endovo_core::ImageBuffer;
use nalgebra::Vector2;

use super::{CliError, Classify};
use crate::io::write_image;

const WIDTH: usize = 640;
const HEIGHT: usize = 480;
const MARGIN: f64 = 24.0;

struct Canvas {
    w: usize,
    h: usize,
    rgb: Vec<f64>,
}

impl Canvas {
    fn new(w: usize, h: usize) -> Self {
        Self { w, h, rgb: vec![1.0; w * h * 3] }
    }

    fn put(&mut self, x: f64, y: f64, c: [f64; 3]) {
        let (xi, yi) = (x.round(), y.round());
        if xi < 0.0 || yi < 0.0 || xi >= self.w as f64 || yi >= self.h as f64 {
            return;
        }
        let i = (yi as usize * self.w + xi as usize) * 3;
        self.rgb[i..i + 3].copy_from_slice(&c);
    }

    fn dot(&mut self, p: Vector2<f64>, r: i32, c: [f64; 3]) {
        for dy in -r..=r {
            for dx in -r..=r {
                if dx * dx + dy * dy <= r * r {
                    self.put(p.x + dx as f64, p.y + dy as f64, c);
                }
            }
        }
    }

    fn line(&mut self, a: Vector2<f64>, b: Vector2<f64>, c: [f64; 3]) {
        let steps = (b - a).abs().max().ceil().max(1.0) as usize;
        for s in 0..=steps {
            let p = a + (b - a) * (s as f64 / steps as f64);
            self.put(p.x, p.y, c);
        }
    }

    fn save(self, path: &Path) -> Result<(), CliError> {
        let img = ImageBuffer::from_clamped(self.w, self.h, 3, self.rgb).failed()?;
        write_image(path, &img).failed()
    }
}

/// Maps data coordinates into the plot area with a shared scale on both
/// axes, y pointing up.
struct Frame {
    lo: Vector2<f64>,
    scale: f64,
    offset: Vector2<f64>,
}

impl Frame {
    fn fit<'a>(points: impl Iterator<Item = &'a Vector2<f64>>, w: f64, h: f64) -> Self {
        let (mut lo, mut hi) = (Vector2::repeat(f64::INFINITY), Vector2::repeat(f64::NEG_INFINITY));
        for p in points {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        if !lo.x.is_finite() {
            lo = Vector2::zeros();
            hi = Vector2::repeat(1.0);
        }
        let span = (hi - lo).map(|v| v.max(1e-12));
        let scale = ((w - 2.0 * MARGIN) / span.x).min((h - 2.0 * MARGIN) / span.y);
        let used = span * scale;
        let offset = Vector2::new((w - used.x) / 2.0, (h - used.y) / 2.0);
        Self { lo, scale, offset }
    }

    fn map(&self, p: &Vector2<f64>, h: f64) -> Vector2<f64> {
        let q = (p - self.lo) * self.scale + self.offset;
        Vector2::new(q.x, h - 1.0 - q.y)
    }
}

const GREEN: [f64; 3] = [0.1, 0.6, 0.2];
const RED: [f64; 3] = [0.85, 0.15, 0.1];
const GREY: [f64; 3] = [0.6, 0.6, 0.6];

/// Top view (x, y) of the ground truth in green and the aligned estimate in
/// red, with grey segments joining associated poses.
pub(super) fn trajectories(path: &Path, gt: &[Vector2<f64>], est: &[Vector2<f64>]) -> Result<(), CliError> {
    let mut c = Canvas::new(WIDTH, HEIGHT);
    let h = HEIGHT as f64;
    let frame = Frame::fit(gt.iter().chain(est), WIDTH as f64, h);
    for (g, e) in gt.iter().zip(est) {
        c.line(frame.map(g, h), frame.map(e, h), GREY);
    }
    for (pts, colour) in [(gt, GREEN), (est, RED)] {
        for w in pts.windows(2) {
            c.line(frame.map(&w[0], h), frame.map(&w[1], h), colour);
        }
        if let Some(first) = pts.first() {
            c.dot(frame.map(first, h), 3, colour);
        }
    }
    c.save(path)
}

/// Blue (low) to red (high) ramp through green and yellow.
fn ramp(t: f64) -> [f64; 3] {
    let t = t.clamp(0.0, 1.0);
    let stops = [[0.0, 0.0, 1.0], [0.0, 1.0, 1.0], [0.0, 1.0, 0.0], [1.0, 1.0, 0.0], [1.0, 0.0, 0.0]];
    let x = t * (stops.len() - 1) as f64;
    let i = (x.floor() as usize).min(stops.len() - 2);
    let f = x - i as f64;
    [0, 1, 2].map(|k| stops[i][k] * (1.0 - f) + stops[i + 1][k] * f)
}

/// Points projected on the plane spanned by `axes`, coloured by `values`
/// between `lo` and `hi`. A colour bar on the right runs from `lo` at the
/// bottom to `hi` at the top.
pub(super) fn heatmap(path: &Path, points: &[Vector2<f64>], values: &[f64], lo: f64, hi: f64) -> Result<(), CliError> {
    const BAR: usize = 40;
    let mut c = Canvas::new(WIDTH + BAR, HEIGHT);
    let h = HEIGHT as f64;
    let frame = Frame::fit(points.iter(), WIDTH as f64, h);
    let span = (hi - lo).max(1e-300);
    // draw low values first so the worst regions stay visible
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    for i in order {
        c.dot(frame.map(&points[i], h), 1, ramp((values[i] - lo) / span));
    }
    let top = MARGIN as usize;
    let bottom = HEIGHT - MARGIN as usize;
    for y in top..bottom {
        let colour = ramp((bottom - 1 - y) as f64 / (bottom - top - 1) as f64);
        for x in WIDTH + 10..WIDTH + BAR - 10 {
            c.put(x as f64, y as f64, colour);
        }
    }
    c.save(path)
}
