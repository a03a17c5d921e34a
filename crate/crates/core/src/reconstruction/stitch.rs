//! Panorama stitching: pairwise RANSAC homographies between candidate
//! frames, chaining to a reference per connected component, optional
//! least-squares refinement, and feathered blending.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;

use super::{
    detect_and_describe, dlt_homography, ransac_homography, ratio_matches, Detector, FeatureSet, Homography,
    Point2, RansacOptions, ReconError, DEFAULT_RATIO,
};
use crate::imaging::{bilinear_sample_channel, ImageBuffer, ImagingError, Mask};

const MAX_CANVAS_PIXELS: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StitchOptions {
    /// Frames with the most descriptor matches tried per frame.
    pub candidates: usize,
    pub detector: Detector,
    pub ratio: f64,
    pub ransac: RansacOptions,
    /// RANSAC inliers needed to accept a pair as overlapping.
    pub min_inliers: usize,
    /// Re-estimate chained homographies from all overlapping pairs.
    pub refine: bool,
}

impl Default for StitchOptions {
    fn default() -> Self {
        Self {
            candidates: 6,
            detector: Detector::default(),
            ratio: DEFAULT_RATIO,
            ransac: RansacOptions::default(),
            min_inliers: 12,
            refine: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Panorama {
    pub image: ImageBuffer,
    /// Canvas pixels covered by at least one frame.
    pub coverage: Mask,
    /// Input frame indices, reference first.
    pub frames: Vec<usize>,
    /// Frame pixel → canvas pixel, parallel to `frames`.
    pub homographies: Vec<Homography>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StitchResult {
    /// One panorama per connected component of the match graph, ordered by
    /// their lowest frame index.
    pub panoramas: Vec<Panorama>,
    /// More than one component was found.
    pub disconnected: bool,
}

/// Accepted overlap: `h` maps points of frame `a` onto frame `b`.
struct Edge {
    a: usize,
    b: usize,
    h: Homography,
    pairs: Vec<(Point2, Point2)>,
}

fn feature_point(f: &FeatureSet, i: usize) -> Point2 {
    let k = f.keypoints()[i];
    Point2::new(k.x, k.y)
}

pub fn stitch(frames: &[ImageBuffer], opts: &StitchOptions) -> Result<StitchResult, ReconError> {
    if frames.is_empty() {
        return Err(ReconError::EmptySet);
    }
    let n = frames.len();
    let features: Vec<Option<FeatureSet>> = frames
        .iter()
        .map(|f| match detect_and_describe(f, &opts.detector) {
            Ok(fs) => Ok(Some(fs)),
            Err(ReconError::NoFeatures) => Ok(None),
            Err(e) => Err(e),
        })
        .collect::<Result<_, _>>()?;

    // candidate pairs: for each frame the `candidates` frames with most matches
    let mut tried = vec![false; n * n];
    let mut edges = Vec::new();
    for i in 0..n {
        let Some(fi) = &features[i] else { continue };
        let mut scored = Vec::new();
        for (j, fj) in features.iter().enumerate() {
            let Some(fj) = fj else { continue };
            if i != j {
                let m = ratio_matches(fi, fj, opts.ratio)?;
                scored.push((m.len(), j, m));
            }
        }
        scored.sort_by(|x, y| y.0.cmp(&x.0).then(x.1.cmp(&y.1)));
        for (count, j, matches) in scored.into_iter().take(opts.candidates) {
            let (a, b) = (i.min(j), i.max(j));
            if tried[a * n + b] || count < opts.min_inliers.max(4) {
                continue;
            }
            tried[a * n + b] = true;
            let fj = features[j].as_ref().expect("scored frames have features");
            let pairs: Vec<(Point2, Point2)> = matches
                .iter()
                .map(|m| (feature_point(fi, m.query), feature_point(fj, m.train)))
                .collect();
            let fit = match ransac_homography(&pairs, &opts.ransac) {
                Ok(r) => r,
                Err(ReconError::NoConsensus | ReconError::DegenerateHomography) => continue,
                Err(e) => return Err(e),
            };
            if fit.inliers.len() < opts.min_inliers {
                continue;
            }
            let inl: Vec<(Point2, Point2)> = fit.inliers.iter().map(|&k| pairs[k]).collect();
            edges.push(Edge {
                a: i,
                b: j,
                h: fit.homography,
                pairs: inl,
            });
        }
    }

    let chains = chain_components(n, &edges)?;
    let mut panoramas = Vec::with_capacity(chains.len());
    for mut chain in chains {
        if opts.refine && chain.len() > 2 {
            refine_chain(&mut chain, &edges)?;
        }
        let imgs: Vec<&ImageBuffer> = chain.iter().map(|(f, _)| &frames[*f]).collect();
        let homs: Vec<Homography> = chain.iter().map(|(_, h)| *h).collect();
        let mut pano = compose_panorama(&imgs, &homs)?;
        pano.frames = chain.iter().map(|(f, _)| *f).collect();
        panoramas.push(pano);
    }
    let disconnected = panoramas.len() > 1;
    Ok(StitchResult { panoramas, disconnected })
}

/// Breadth-first traversal from the lowest index of every component;
/// returns `(frame, frame → reference)` lists.
fn chain_components(n: usize, edges: &[Edge]) -> Result<Vec<Vec<(usize, Homography)>>, ReconError> {
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (e, edge) in edges.iter().enumerate() {
        adj[edge.a].push((edge.b, e));
        adj[edge.b].push((edge.a, e));
    }
    adj.iter_mut().for_each(|a| a.sort_unstable());
    let mut to_ref: Vec<Option<Homography>> = vec![None; n];
    let mut out = Vec::new();
    for root in 0..n {
        if to_ref[root].is_some() {
            continue;
        }
        to_ref[root] = Some(Homography::identity());
        let mut chain = vec![(root, Homography::identity())];
        let mut queue = VecDeque::from([root]);
        while let Some(u) = queue.pop_front() {
            let hu = to_ref[u].expect("visited");
            for &(v, e) in &adj[u] {
                if to_ref[v].is_some() {
                    continue;
                }
                let edge = &edges[e];
                // need v → u
                let v_to_u = if edge.a == v { edge.h } else { edge.h.inverse()? };
                let hv = hu.compose(&v_to_u)?;
                to_ref[v] = Some(hv);
                chain.push((v, hv));
                queue.push_back(v);
            }
        }
        out.push(chain);
    }
    Ok(out)
}

/// Block-coordinate least squares: each non-reference frame's homography is
/// refit by DLT to the reference-frame positions predicted by all its
/// overlapping neighbours, sweeping until the estimates settle.
fn refine_chain(chain: &mut [(usize, Homography)], edges: &[Edge]) -> Result<(), ReconError> {
    const SWEEPS: usize = 5;
    for _ in 0..SWEEPS {
        for k in 1..chain.len() {
            let frame = chain[k].0;
            let mut pairs = Vec::new();
            for edge in edges {
                let (other, own_is_src) = if edge.a == frame {
                    (edge.b, true)
                } else if edge.b == frame {
                    (edge.a, false)
                } else {
                    continue;
                };
                let Some(&(_, h_other)) = chain.iter().find(|(f, _)| *f == other) else { continue };
                for (pa, pb) in &edge.pairs {
                    let (own, theirs) = if own_is_src { (pa, pb) } else { (pb, pa) };
                    if let Some(target) = h_other.apply(theirs) {
                        pairs.push((*own, target));
                    }
                }
            }
            if pairs.len() >= 4 {
                if let Ok(h) = dlt_homography(&pairs) {
                    chain[k].1 = h;
                }
            }
        }
    }
    Ok(())
}

/// Feathered blend of `frames` warped by `homographies` (frame → common
/// plane). The canvas is the integer bounding box of the warped frame
/// corners; the returned homographies include the canvas offset.
///
/// Each frame pixel is weighted by its distance to the frame border
/// (`min(x+1, w−x, y+1, h−y)`), accumulated as a running weighted mean so
/// that identical contributions reproduce the input exactly.
pub fn compose_panorama(frames: &[&ImageBuffer], homographies: &[Homography]) -> Result<Panorama, ReconError> {
    if frames.is_empty() {
        return Err(ReconError::EmptySet);
    }
    if frames.len() != homographies.len() {
        return Err(ReconError::BadParameter("one homography per frame required"));
    }
    let channels = frames[0].channels();
    if let Some(f) = frames.iter().find(|f| f.channels() != channels) {
        return Err(ImagingError::ChannelMismatch {
            expected: channels,
            got: f.channels(),
        }
        .into());
    }
    let (mut lo, mut hi) = (Point2::repeat(f64::INFINITY), Point2::repeat(f64::NEG_INFINITY));
    for (f, h) in frames.iter().zip(homographies) {
        let (w, hh) = ((f.width() - 1) as f64, (f.height() - 1) as f64);
        for c in [Point2::new(0.0, 0.0), Point2::new(w, 0.0), Point2::new(0.0, hh), Point2::new(w, hh)] {
            let p = h.apply(&c).ok_or(ReconError::DegenerateHomography)?;
            lo = lo.inf(&p);
            hi = hi.sup(&p);
        }
    }
    let (x0, y0) = (lo.x.floor(), lo.y.floor());
    let (cw, ch) = (hi.x.floor() - x0 + 1.0, hi.y.floor() - y0 + 1.0);
    if !(cw * ch <= MAX_CANVAS_PIXELS) {
        return Err(ReconError::CanvasTooLarge { width: cw, height: ch });
    }
    let (cw, ch) = (cw as usize, ch as usize);
    let offset = Homography::translation(-x0, -y0);
    let to_canvas: Vec<Homography> = homographies
        .iter()
        .map(|h| offset.compose(h))
        .collect::<Result<_, _>>()?;
    let from_canvas: Vec<Homography> = to_canvas.iter().map(|h| h.inverse()).collect::<Result<_, _>>()?;

    let mut mean = vec![0.0; cw * ch * channels];
    let mut weight = vec![0.0; cw * ch];
    for (f, inv) in frames.iter().zip(&from_canvas) {
        let (w, h) = (f.width() as f64, f.height() as f64);
        for y in 0..ch {
            for x in 0..cw {
                let Some(p) = inv.apply(&Point2::new(x as f64, y as f64)) else { continue };
                let wt = (p.x + 1.0).min(w - p.x).min(p.y + 1.0).min(h - p.y);
                if !(wt > 0.0) {
                    continue;
                }
                let samples: Option<Vec<f64>> =
                    (0..channels).map(|c| bilinear_sample_channel(f, p.x, p.y, c)).collect();
                let Some(samples) = samples else { continue };
                let i = y * cw + x;
                weight[i] += wt;
                let share = wt / weight[i];
                for (c, v) in samples.into_iter().enumerate() {
                    let m = &mut mean[i * channels + c];
                    *m += (v - *m) * share;
                }
            }
        }
    }
    let coverage = Mask::from_fn(cw, ch, |x, y| weight[y * cw + x] > 0.0);
    let image = ImageBuffer::new(cw, ch, channels, mean)?;
    Ok(Panorama {
        image,
        coverage,
        frames: (0..frames.len()).collect(),
        homographies: to_canvas,
    })
}
