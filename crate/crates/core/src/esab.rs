//! Forward pass of the spatial non-local attention block.
//!
//! For one batch item with input `X` (64 channels, `H×W` positions):
//!
//! ```text
//! θ, φ, g = 1×1 convs of X, max-pooled by `pool`      (B × M each, M pooled positions)
//! P       = ψ(ReLU(θᵀ·φ))                              (M × M affinity)
//! Y       = softmax_rows(P) · gᵀ                       (M × B)
//! S       = out_proj(upsample_nearest(Y))              (64 × H × W)
//! F       = S + X
//! ```
//!
//! `ψ` is a learned scalar affine map applied elementwise to the affinity.

use alloc::vec::Vec;

use nalgebra::DMatrix;
#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;
use rand::Rng;
use thiserror::Error;

/// Channel count the block is defined for.
pub const INPUT_CHANNELS: usize = 64;
pub const DEFAULT_BOTTLENECK: usize = 32;
pub const DEFAULT_POOL: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EsabError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(&'static str),
    #[error("channel chain broken: {0}")]
    ChannelChainBroken(&'static str),
}

/// Dense `n × c × h × w` activations, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4 {
    n: usize,
    c: usize,
    h: usize,
    w: usize,
    data: Vec<f64>,
}

impl Tensor4 {
    pub fn new(n: usize, c: usize, h: usize, w: usize, data: Vec<f64>) -> Result<Self, EsabError> {
        if n == 0 || c == 0 || h == 0 || w == 0 {
            return Err(EsabError::ShapeMismatch("every dimension must be positive"));
        }
        if data.len() != n * c * h * w {
            return Err(EsabError::ShapeMismatch("data length must equal n·c·h·w"));
        }
        Ok(Self { n, c, h, w, data })
    }

    pub fn zeros(n: usize, c: usize, h: usize, w: usize) -> Self {
        Self {
            n,
            c,
            h,
            w,
            data: alloc::vec![0.0; n * c * h * w],
        }
    }

    pub fn from_fn(n: usize, c: usize, h: usize, w: usize, mut f: impl FnMut(usize, usize, usize, usize) -> f64) -> Self {
        let mut t = Self::zeros(n, c, h, w);
        for b in 0..n {
            for ch in 0..c {
                for y in 0..h {
                    for x in 0..w {
                        let i = t.index(b, ch, y, x);
                        t.data[i] = f(b, ch, y, x);
                    }
                }
            }
        }
        t
    }

    pub fn shape(&self) -> [usize; 4] {
        [self.n, self.c, self.h, self.w]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    fn index(&self, b: usize, c: usize, y: usize, x: usize) -> usize {
        ((b * self.c + c) * self.h + y) * self.w + x
    }

    #[inline]
    pub fn get(&self, b: usize, c: usize, y: usize, x: usize) -> f64 {
        self.data[self.index(b, c, y, x)]
    }

    #[inline]
    pub fn set(&mut self, b: usize, c: usize, y: usize, x: usize, v: f64) {
        let i = self.index(b, c, y, x);
        self.data[i] = v;
    }

    pub fn max_abs_diff(&self, other: &Tensor4) -> Option<f64> {
        if self.shape() != other.shape() {
            return None;
        }
        Some(self.data.iter().zip(&other.data).fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }
}

/// A 1×1 convolution: `out[o] = Σ_i weight[o·in + i]·x[i] + bias[o]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv1x1 {
    in_channels: usize,
    out_channels: usize,
    weight: Vec<f64>,
    bias: Vec<f64>,
}

impl Conv1x1 {
    pub fn new(in_channels: usize, out_channels: usize, weight: Vec<f64>, bias: Vec<f64>) -> Result<Self, EsabError> {
        if in_channels == 0 || out_channels == 0 {
            return Err(EsabError::ShapeMismatch("convolution channels must be positive"));
        }
        if weight.len() != in_channels * out_channels || bias.len() != out_channels {
            return Err(EsabError::ShapeMismatch("convolution weight or bias length"));
        }
        Ok(Self {
            in_channels,
            out_channels,
            weight,
            bias,
        })
    }

    pub fn zeros(in_channels: usize, out_channels: usize) -> Self {
        Self {
            in_channels,
            out_channels,
            weight: alloc::vec![0.0; in_channels * out_channels],
            bias: alloc::vec![0.0; out_channels],
        }
    }

    /// Weights uniform in `±1/√in`, biases in `±0.1`.
    pub fn random(in_channels: usize, out_channels: usize, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / (in_channels as f64).sqrt();
        Self {
            in_channels,
            out_channels,
            weight: (0..in_channels * out_channels).map(|_| rng.random_range(-bound..bound)).collect(),
            bias: (0..out_channels).map(|_| rng.random_range(-0.1..0.1)).collect(),
        }
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn weight(&self) -> &[f64] {
        &self.weight
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            weight: self.weight.iter().map(|w| w * factor).collect(),
            bias: self.bias.iter().map(|b| b * factor).collect(),
            ..self.clone()
        }
    }

    /// Applies the convolution to a `in × positions` matrix.
    fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let w = DMatrix::from_row_slice(self.out_channels, self.in_channels, &self.weight);
        let mut out = w * x;
        for (o, mut row) in out.row_iter_mut().enumerate() {
            row.add_scalar_mut(self.bias[o]);
        }
        out
    }
}

/// Elementwise `ψ(a) = weight·a + bias` on the affinity matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarAffine {
    pub weight: f64,
    pub bias: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EsabWeights {
    pub theta: Conv1x1,
    pub phi: Conv1x1,
    pub g: Conv1x1,
    pub psi: ScalarAffine,
    pub out_proj: Conv1x1,
    /// Max-pooling factor for the θ, φ and g branches (1 disables pooling).
    pub pool: usize,
}

impl EsabWeights {
    pub fn random(bottleneck: usize, pool: usize, rng: &mut impl Rng) -> Self {
        Self {
            theta: Conv1x1::random(INPUT_CHANNELS, bottleneck, rng),
            phi: Conv1x1::random(INPUT_CHANNELS, bottleneck, rng),
            g: Conv1x1::random(INPUT_CHANNELS, bottleneck, rng),
            psi: ScalarAffine {
                weight: rng.random_range(0.5..1.5),
                bias: rng.random_range(-0.1..0.1),
            },
            out_proj: Conv1x1::random(bottleneck, INPUT_CHANNELS, rng),
            pool,
        }
    }

    pub fn bottleneck(&self) -> usize {
        self.theta.out_channels
    }

    pub fn validate(&self) -> Result<(), EsabError> {
        if self.pool == 0 {
            return Err(EsabError::ShapeMismatch("pool factor must be at least 1"));
        }
        for conv in [&self.theta, &self.phi, &self.g] {
            if conv.in_channels != INPUT_CHANNELS {
                return Err(EsabError::ChannelChainBroken("theta/phi/g must take 64 input channels"));
            }
            if conv.out_channels != self.theta.out_channels {
                return Err(EsabError::ChannelChainBroken("theta/phi/g bottlenecks differ"));
            }
        }
        if self.out_proj.in_channels != self.theta.out_channels {
            return Err(EsabError::ChannelChainBroken("output projection input must equal the bottleneck"));
        }
        if self.out_proj.out_channels != INPUT_CHANNELS {
            return Err(EsabError::ChannelChainBroken("output projection must produce 64 channels"));
        }
        if !self.psi.weight.is_finite() || !self.psi.bias.is_finite() {
            return Err(EsabError::ShapeMismatch("psi must be finite"));
        }
        Ok(())
    }
}

/// Max over `pool × pool` blocks (partial blocks at the right/bottom edge).
/// Input is `channels × (h·w)`, output `channels × (ph·pw)`.
fn max_pool(m: &DMatrix<f64>, h: usize, w: usize, pool: usize) -> DMatrix<f64> {
    if pool == 1 {
        return m.clone();
    }
    let (ph, pw) = (h.div_ceil(pool), w.div_ceil(pool));
    let mut out = DMatrix::from_element(m.nrows(), ph * pw, f64::NEG_INFINITY);
    for y in 0..h {
        for x in 0..w {
            let dst = (y / pool) * pw + x / pool;
            for c in 0..m.nrows() {
                let v = m[(c, y * w + x)];
                if v > out[(c, dst)] {
                    out[(c, dst)] = v;
                }
            }
        }
    }
    out
}

/// Row-wise softmax with max subtraction.
fn softmax_rows(p: &mut DMatrix<f64>) {
    for mut row in p.row_iter_mut() {
        let max = row.max();
        row.apply(|v| *v = (*v - max).exp());
        let sum = row.sum();
        row /= sum;
        debug_assert!((row.sum() - 1.0).abs() < 1e-6, "attention row does not sum to 1");
    }
}

pub fn esab_forward(x: &Tensor4, weights: &EsabWeights) -> Result<Tensor4, EsabError> {
    weights.validate()?;
    if x.c != INPUT_CHANNELS {
        return Err(EsabError::ShapeMismatch("input must have 64 channels"));
    }
    let (h, w, pool) = (x.h, x.w, weights.pool);
    let hw = h * w;
    let pw = w.div_ceil(pool);
    let mut out = Tensor4::zeros(x.n, x.c, h, w);
    for b in 0..x.n {
        let base = b * x.c * hw;
        let xm = DMatrix::from_row_slice(x.c, hw, &x.data[base..base + x.c * hw]);
        let theta = max_pool(&weights.theta.apply(&xm), h, w, pool);
        let phi = max_pool(&weights.phi.apply(&xm), h, w, pool);
        let g = max_pool(&weights.g.apply(&xm), h, w, pool);

        let mut p = theta.transpose() * phi;
        let psi = weights.psi;
        p.apply(|v| *v = psi.weight * v.max(0.0) + psi.bias);
        softmax_rows(&mut p);
        let y = p * g.transpose(); // M × B

        let mut up = DMatrix::zeros(y.ncols(), hw);
        for yy in 0..h {
            for xx in 0..w {
                let src = (yy / pool) * pw + xx / pool;
                up.column_mut(yy * w + xx).copy_from(&y.row(src).transpose());
            }
        }
        let s = weights.out_proj.apply(&up);
        for c in 0..x.c {
            for i in 0..hw {
                out.data[base + c * hw + i] = s[(c, i)] + x.data[base + c * hw + i];
            }
        }
    }
    Ok(out)
}
