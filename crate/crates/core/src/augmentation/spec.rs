use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use super::transforms::fisheye_depth;
use super::{
    depth_of_field, fisheye, gaussian_blur_repeated, resize, resize_depth, vignette, AugmentError, DofParams,
};
use crate::imaging::ImageBuffer;
use crate::warp_loss::DepthMap;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Transform {
    Resize { width: usize, height: usize },
    /// `alpha × alpha` kernel, sigma `beta`, applied `gamma` times.
    Blur { alpha: usize, beta: f64, gamma: usize },
    Vignette { strength: f64 },
    Fisheye { nu: f64 },
    DepthOfField(DofParams),
    /// Keep every `factor`-th frame of the sequence.
    Subsample { factor: usize },
}

impl Transform {
    fn validate(&self) -> Result<(), AugmentError> {
        match *self {
            Transform::Resize { width, height } if width == 0 || height == 0 => Err(AugmentError::BadSize(width, height)),
            Transform::Blur { alpha, beta, gamma } => {
                if alpha == 0 || alpha % 2 == 0 || !(beta > 0.0) || !beta.is_finite() {
                    Err(AugmentError::BadParameter("blur needs an odd kernel size and a positive sigma"))
                } else if gamma == 0 {
                    Err(AugmentError::BadParameter("blur repetitions must be at least 1"))
                } else {
                    Ok(())
                }
            }
            Transform::Vignette { strength } if !(0.0..=1.0).contains(&strength) => {
                Err(AugmentError::BadParameter("vignette strength must lie in [0, 1]"))
            }
            Transform::Fisheye { nu } if !(nu > 0.0 && nu <= 1.0) => Err(AugmentError::BadRatio(nu)),
            Transform::DepthOfField(p) if !(0.0..=1.0).contains(&p.focus) => {
                Err(AugmentError::BadParameter("focus must lie in [0, 1]"))
            }
            Transform::Subsample { factor: 0 } => Err(AugmentError::BadParameter("subsample factor must be at least 1")),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Transform::Resize { width, height } => write!(f, "resize width={width} height={height}"),
            Transform::Blur { alpha, beta, gamma } => write!(f, "blur alpha={alpha} beta={beta} gamma={gamma}"),
            Transform::Vignette { strength } => write!(f, "vignette strength={strength}"),
            Transform::Fisheye { nu } => write!(f, "fisheye nu={nu}"),
            Transform::DepthOfField(p) => {
                write!(f, "dof focus={} max_sigma={}", p.focus, p.max_sigma)?;
                if let Some((near, far)) = p.depth_range {
                    write!(f, " near={near} far={far}")?;
                }
                Ok(())
            }
            Transform::Subsample { factor } => write!(f, "subsample factor={factor}"),
        }
    }
}

/// Ordered list of transforms.
///
/// Text form: one transform per line, `name key=value ...`; blank lines and
/// `#` comments are ignored.
///
/// ```text
/// resize width=100 height=100
/// blur alpha=5 beta=5 gamma=5
/// vignette strength=0.4
/// fisheye nu=0.7
/// dof focus=0.0821 max_sigma=8
/// subsample factor=5
/// ```
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AugmentSpec {
    pub transforms: Vec<Transform>,
}

impl AugmentSpec {
    pub fn new(transforms: Vec<Transform>) -> Result<Self, AugmentError> {
        for t in &transforms {
            t.validate()?;
        }
        Ok(Self { transforms })
    }

    pub fn needs_depth(&self) -> bool {
        self.transforms.iter().any(|t| matches!(t, Transform::DepthOfField(_)))
    }

    /// Combined frame-dropping factor of all `subsample` entries.
    pub fn subsample_factor(&self) -> usize {
        self.transforms
            .iter()
            .map(|t| match t {
                Transform::Subsample { factor } => *factor,
                _ => 1,
            })
            .product()
    }

    /// Indices of the frames kept from a sequence of `n`.
    pub fn selected_frames(&self, n: usize) -> Vec<usize> {
        (0..n).step_by(self.subsample_factor().max(1)).collect()
    }

    /// Runs the per-image transforms in order. Geometric transforms are applied
    /// to the depth map too (nearest sampling) so later defocus stays aligned.
    pub fn apply(&self, img: &ImageBuffer, depth: Option<&DepthMap>) -> Result<ImageBuffer, AugmentError> {
        let mut img = img.clone();
        let mut depth = depth.cloned();
        for t in &self.transforms {
            match *t {
                Transform::Resize { width, height } => {
                    img = resize(&img, width, height)?;
                    depth = depth.map(|d| resize_depth(&d, width, height)).transpose()?;
                }
                Transform::Blur { alpha, beta, gamma } => img = gaussian_blur_repeated(&img, alpha, beta, gamma)?,
                Transform::Vignette { strength } => img = vignette(&img, strength)?,
                Transform::Fisheye { nu } => {
                    img = fisheye(&img, nu)?;
                    depth = depth.map(|d| fisheye_depth(&d, nu));
                }
                Transform::DepthOfField(p) => {
                    let d = depth.as_ref().ok_or(AugmentError::MissingDepth)?;
                    img = depth_of_field(&img, d, &p)?;
                }
                Transform::Subsample { .. } => {}
            }
        }
        Ok(img)
    }
}

impl fmt::Display for AugmentSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for t in &self.transforms {
            writeln!(f, "{t}")?;
        }
        Ok(())
    }
}

impl FromStr for AugmentSpec {
    type Err = AugmentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut transforms = Vec::new();
        for (i, raw) in s.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let t = parse_line(line).map_err(|message| AugmentError::Parse { line: i + 1, message })?;
            t.validate().map_err(|e| AugmentError::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
            transforms.push(t);
        }
        Ok(Self { transforms })
    }
}

struct Params<'a> {
    pairs: Vec<(&'a str, &'a str)>,
    used: Vec<bool>,
}

impl<'a> Params<'a> {
    fn parse(tokens: core::str::SplitWhitespace<'a>) -> Result<Self, String> {
        let mut pairs = Vec::new();
        for tok in tokens {
            let (k, v) = tok.split_once('=').ok_or_else(|| format!("expected key=value, got `{tok}`"))?;
            if pairs.iter().any(|(pk, _)| *pk == k) {
                return Err(format!("duplicate key `{k}`"));
            }
            pairs.push((k, v));
        }
        let used = alloc::vec![false; pairs.len()];
        Ok(Self { pairs, used })
    }

    fn optional<T: FromStr>(&mut self, key: &str) -> Result<Option<T>, String> {
        match self.pairs.iter().position(|(k, _)| *k == key) {
            None => Ok(None),
            Some(i) => {
                self.used[i] = true;
                let v = self.pairs[i].1;
                v.parse().map(Some).map_err(|_| format!("invalid value `{v}` for `{key}`"))
            }
        }
    }

    fn required<T: FromStr>(&mut self, key: &str) -> Result<T, String> {
        self.optional(key)?.ok_or_else(|| format!("missing `{key}`"))
    }

    fn finish(self) -> Result<(), String> {
        match self.pairs.iter().zip(&self.used).find(|(_, u)| !**u) {
            Some(((k, _), _)) => Err(format!("unknown key `{k}`")),
            None => Ok(()),
        }
    }
}

fn parse_line(line: &str) -> Result<Transform, String> {
    let mut tokens = line.split_whitespace();
    let name = tokens.next().unwrap_or_default();
    let mut p = Params::parse(tokens)?;
    let t = match name {
        "resize" => Transform::Resize {
            width: p.required("width")?,
            height: p.required("height")?,
        },
        "blur" => Transform::Blur {
            alpha: p.required("alpha")?,
            beta: p.required("beta")?,
            gamma: p.required("gamma")?,
        },
        "vignette" => Transform::Vignette {
            strength: p.required("strength")?,
        },
        "fisheye" => Transform::Fisheye { nu: p.required("nu")? },
        "dof" => {
            let mut params = DofParams::new(p.required("focus")?);
            if let Some(s) = p.optional("max_sigma")? {
                params.max_sigma = s;
            }
            match (p.optional::<f64>("near")?, p.optional::<f64>("far")?) {
                (Some(near), Some(far)) => params.depth_range = Some((near, far)),
                (None, None) => {}
                _ => return Err("`near` and `far` must be given together".to_string()),
            }
            Transform::DepthOfField(params)
        }
        "subsample" => Transform::Subsample {
            factor: p.required("factor")?,
        },
        other => return Err(format!("unknown transform `{other}`")),
    };
    p.finish()?;
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "# robustness sweep\nresize width=100 height=100\nblur alpha=5 beta=5 gamma=5\n\nvignette strength=0.4\nfisheye nu=0.7 # discard outer ring\ndof focus=0.0821 max_sigma=8 near=0 far=0.2\nsubsample factor=5\n";

    #[test]
    fn parse_and_roundtrip() {
        let spec: AugmentSpec = SAMPLE.parse().unwrap();
        assert_eq!(spec.transforms.len(), 6);
        assert_eq!(spec.transforms[0], Transform::Resize { width: 100, height: 100 });
        assert_eq!(spec.subsample_factor(), 5);
        assert!(spec.needs_depth());
        let again: AugmentSpec = spec.to_string().parse().unwrap();
        assert_eq!(again, spec);
        assert_eq!(spec.selected_frames(12), alloc::vec![0, 5, 10]);
    }

    #[test]
    fn parse_errors_carry_line() {
        let bad = "resize width=10 height=10\nblur alpha=4 beta=1 gamma=1\n";
        match bad.parse::<AugmentSpec>() {
            Err(AugmentError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        for bad in ["sharpen amount=2", "resize width=10", "fisheye nu=0.5 extra=1", "fisheye nu=x", "dof focus=0.5 near=1"] {
            assert!(matches!(bad.parse::<AugmentSpec>(), Err(AugmentError::Parse { line: 1, .. })), "{bad}");
        }
    }

    #[test]
    fn dof_without_depth_fails() {
        let spec: AugmentSpec = "dof focus=0.5".parse().unwrap();
        let img = ImageBuffer::filled(4, 4, 1, 0.5);
        assert_eq!(spec.apply(&img, None), Err(AugmentError::MissingDepth));
    }

    #[test]
    fn pipeline_is_deterministic() {
        let spec: AugmentSpec = SAMPLE.parse().unwrap();
        let img = ImageBuffer::from_fn_gray(64, 48, |x, y| ((x * 7 + y * 13) % 17) as f64 / 16.0);
        let depth = DepthMap::from_fn(64, 48, |x, _| 0.01 + 0.002 * x as f64);
        let a = spec.apply(&img, Some(&depth)).unwrap();
        let b = spec.apply(&img, Some(&depth)).unwrap();
        assert_eq!((a.width(), a.height()), (100, 100));
        assert!(a.data().iter().zip(b.data()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}
