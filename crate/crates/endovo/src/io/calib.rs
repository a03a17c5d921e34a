use std::collections::BTreeMap;
use std::path::Path;

use endovo_core::{CameraIntrinsics, CameraModel};

use super::{read_text, write_atomic, IoError};

const KEYS: [&str; 10] = ["model", "fx", "fy", "s", "cx", "cy", "k1", "k2", "width", "height"];

/// Parses `key = value` lines (`:` or plain whitespace also separate; `#`
/// starts a comment). `fx fy cx cy width height` are required; `s`, `k1`,
/// `k2` default to 0 and `model` to `pinhole`.
pub fn parse_calibration(text: &str) -> Result<CameraIntrinsics, String> {
    let mut values = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once(['=', ':'])
            .or_else(|| line.split_once(char::is_whitespace))
            .ok_or_else(|| format!("line {}: expected `key = value`", n + 1))?;
        let (key, value) = (key.trim().to_ascii_lowercase(), value.trim());
        if !KEYS.contains(&key.as_str()) {
            return Err(format!("line {}: unknown key {key:?}", n + 1));
        }
        if values.insert(key.clone(), value.to_string()).is_some() {
            return Err(format!("line {}: {key} given twice", n + 1));
        }
    }
    let number = |key: &str, default: Option<f64>| -> Result<f64, String> {
        match values.get(key) {
            Some(v) => v.parse().map_err(|_| format!("{key}: {v:?} is not a number")),
            None => default.ok_or_else(|| format!("missing {key}")),
        }
    };
    let size = |key: &str| -> Result<u32, String> {
        let v = values.get(key).ok_or_else(|| format!("missing {key}"))?;
        v.parse().map_err(|_| format!("{key}: {v:?} is not a pixel count"))
    };
    let model = match values.get("model").map(|m| m.to_ascii_lowercase()) {
        None => CameraModel::Pinhole,
        Some(m) if m == "pinhole" => CameraModel::Pinhole,
        Some(m) if m == "fisheye" => CameraModel::Fisheye,
        Some(m) => return Err(format!("model: {m:?} is neither pinhole nor fisheye")),
    };
    CameraIntrinsics::new(
        model,
        number("fx", None)?,
        number("fy", None)?,
        number("s", Some(0.0))?,
        number("cx", None)?,
        number("cy", None)?,
        number("k1", Some(0.0))?,
        number("k2", Some(0.0))?,
        size("width")?,
        size("height")?,
    )
    .map_err(|e| e.to_string())
}

pub fn read_calibration(path: &Path) -> Result<CameraIntrinsics, IoError> {
    parse_calibration(&read_text(path)?).map_err(|m| IoError::parse(path, m))
}

pub fn format_calibration(k: &CameraIntrinsics) -> String {
    let model = match k.model {
        CameraModel::Pinhole => "pinhole",
        CameraModel::Fisheye => "fisheye",
    };
    format!(
        "model = {model}\nfx = {}\nfy = {}\ns = {}\ncx = {}\ncy = {}\nk1 = {}\nk2 = {}\nwidth = {}\nheight = {}\n",
        k.fx, k.fy, k.skew, k.cx, k.cy, k.k1, k.k2, k.width, k.height
    )
}

pub fn write_calibration(path: &Path, k: &CameraIntrinsics) -> Result<(), IoError> {
    write_atomic(path, format_calibration(k).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn high_cam_parses() {
        let k = parse_calibration(
            "# HighCam\nfx = 957.4119\nfy: 959.3861\ns 5.6242\ncx = 282.1921\ncy = 170.7316\nk1 = -0.3\nk2=0.1\nwidth = 640\nheight = 480\n",
        )
        .unwrap();
        assert_eq!((k.fx, k.fy, k.skew, k.cx, k.cy), (957.4119, 959.3861, 5.6242, 282.1921, 170.7316));
        assert_eq!((k.k1, k.k2, k.width, k.height, k.model), (-0.3, 0.1, 640, 480, CameraModel::Pinhole));
    }

    #[test]
    fn format_parse_roundtrip() {
        for k in [CameraIntrinsics::high_cam(), CameraIntrinsics::miro_cam(), CameraIntrinsics::pill_cam1()] {
            assert_eq!(parse_calibration(&format_calibration(&k)).unwrap(), k);
        }
    }

    #[test]
    fn errors_are_specific() {
        assert!(parse_calibration("fx = 1\n").unwrap_err().contains("missing fy"));
        assert!(parse_calibration("fx = 1\nfx = 2\n").unwrap_err().contains("twice"));
        assert!(parse_calibration("focal = 1\n").unwrap_err().contains("unknown key"));
        let base = "fy = 1\ncx = 1\ncy = 1\nwidth = 4\nheight = 4\n";
        assert!(parse_calibration(&format!("fx = -1\n{base}")).is_err());
        assert!(parse_calibration(&format!("fx = 1\n{base}model = orthographic\n")).is_err());
    }
}
