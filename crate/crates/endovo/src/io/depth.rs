use std::io::Cursor;
use std::path::Path;

use endovo_core::DepthMap;
use image::{DynamicImage, ImageBuffer as RawImage, ImageFormat, Luma};

use super::{read_bytes, write_atomic, IoError};

/// 16-bit PNG depth: `meters = value / 5000`; 0 marks a missing sample.
pub const DEPTH_PNG_SCALE: f64 = 5000.0;

/// Raw depth files start with this line, then `<width> <height>\n`, then
/// `width·height` little-endian float32 values in row-major order.
pub const RAW_DEPTH_MAGIC: &[u8] = b"DEPTHF32\n";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DepthFormat {
    Png16,
    RawF32,
}

impl DepthFormat {
    /// `.png` selects 16-bit PNG, anything else the raw format.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("png") => DepthFormat::Png16,
            _ => DepthFormat::RawF32,
        }
    }
}

/// Reads either depth format, recognized by content rather than extension.
/// Non-positive and non-finite samples load as invalid.
pub fn read_depth(path: &Path) -> Result<DepthMap, IoError> {
    let bytes = read_bytes(path)?;
    if let Some(rest) = bytes.strip_prefix(RAW_DEPTH_MAGIC) {
        return read_raw(path, rest);
    }
    let img = image::load_from_memory(&bytes).map_err(|source| IoError::Image {
        path: path.to_path_buf(),
        source,
    })?;
    let DynamicImage::ImageLuma16(img) = img else {
        return Err(IoError::unsupported(path, "depth PNG (expected 16-bit grayscale)"));
    };
    let (w, h) = (img.width() as usize, img.height() as usize);
    let depth = img.into_raw().into_iter().map(|v| v as f64 / DEPTH_PNG_SCALE).collect();
    DepthMap::new(w, h, depth).map_err(|e| IoError::parse(path, e.to_string()))
}

fn read_raw(path: &Path, rest: &[u8]) -> Result<DepthMap, IoError> {
    let nl = rest
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| IoError::parse(path, "missing size line"))?;
    let size = std::str::from_utf8(&rest[..nl]).map_err(|_| IoError::parse(path, "size line is not text"))?;
    let dims: Vec<usize> = size
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| IoError::parse(path, format!("bad size token {t:?}"))))
        .collect::<Result<_, _>>()?;
    let [w, h] = dims[..] else {
        return Err(IoError::parse(path, "size line must hold width and height"));
    };
    let body = &rest[nl + 1..];
    let expected = w.checked_mul(h).and_then(|n| n.checked_mul(4));
    if expected != Some(body.len()) {
        return Err(IoError::parse(
            path,
            format!("{w}x{h} needs {} bytes of samples, found {}", w * h * 4, body.len()),
        ));
    }
    let depth = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    DepthMap::new(w, h, depth).map_err(|e| IoError::parse(path, e.to_string()))
}

/// Writes `depth` in the format chosen by [`DepthFormat::from_path`]. Invalid
/// samples are stored as 0. PNG output fails rather than clipping when a
/// depth does not fit the 16-bit range (above 13.107 m).
pub fn write_depth(path: &Path, depth: &DepthMap) -> Result<(), IoError> {
    let (w, h) = (depth.width(), depth.height());
    let sample = |x, y| depth.get(x, y).unwrap_or(0.0);
    let bytes = match DepthFormat::from_path(path) {
        DepthFormat::RawF32 => {
            let mut out = RAW_DEPTH_MAGIC.to_vec();
            out.extend_from_slice(format!("{w} {h}\n").as_bytes());
            for y in 0..h {
                for x in 0..w {
                    out.extend_from_slice(&(sample(x, y) as f32).to_le_bytes());
                }
            }
            out
        }
        DepthFormat::Png16 => {
            let mut raw = Vec::with_capacity(w * h);
            for y in 0..h {
                for x in 0..w {
                    let v = (sample(x, y) * DEPTH_PNG_SCALE).round();
                    if v > u16::MAX as f64 {
                        return Err(IoError::parse(
                            path,
                            format!("depth {} m at ({x}, {y}) exceeds the 16-bit PNG range", sample(x, y)),
                        ));
                    }
                    raw.push(v as u16);
                }
            }
            let img: RawImage<Luma<u16>, _> = RawImage::from_raw(w as u32, h as u32, raw).expect("length matches");
            let mut out = Cursor::new(Vec::new());
            DynamicImage::ImageLuma16(img)
                .write_to(&mut out, ImageFormat::Png)
                .map_err(|source| IoError::Image {
                    path: path.to_path_buf(),
                    source,
                })?;
            out.into_inner()
        }
    };
    write_atomic(path, &bytes)
}
