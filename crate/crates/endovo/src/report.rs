//! Versioned JSON reports.
//!
//! Every report is an object with `"schema": 1` and `"command"`. Keys are
//! sorted and every float is written with 17 significant digits, so equal
//! inputs give byte-identical files. Non-finite values become `null`.

use std::io;
use std::path::Path;

use endovo_core::stats::MetricStats;
use endovo_core::warp_loss::LossReport;
use endovo_core::Pose;
use serde_json::ser::Formatter;
use serde_json::{json, Map, Value};

use crate::io::{write_atomic, IoError};

pub const SCHEMA_VERSION: u64 = 1;

struct SeventeenDigits;

impl Formatter for SeventeenDigits {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

/// Serializes `value` on one line followed by a newline.
pub fn to_bytes(value: &Value) -> Vec<u8> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, SeventeenDigits);
    serde::Serialize::serialize(value, &mut ser).expect("serializing a Value into memory cannot fail");
    out.push(b'\n');
    out
}

pub fn write_report(path: &Path, value: &Value) -> Result<(), IoError> {
    write_atomic(path, &to_bytes(value))
}

/// Starts a report object for `command`.
pub fn header(command: &str) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("schema".into(), json!(SCHEMA_VERSION));
    m.insert("command".into(), json!(command));
    m
}

/// A float, or `null` when it is not finite.
pub fn num(v: f64) -> Value {
    serde_json::Number::from_f64(v).map_or(Value::Null, Value::Number)
}

pub fn nums(v: &[f64]) -> Value {
    Value::Array(v.iter().map(|x| num(*x)).collect())
}

pub fn stats(s: &MetricStats) -> Value {
    json!({
        "rmse": num(s.rmse),
        "mean": num(s.mean),
        "std": num(s.std),
        "min": num(s.min),
        "max": num(s.max),
        "median": num(s.median),
        "count": s.count,
    })
}

pub fn pose(p: &Pose) -> Value {
    json!({
        "translation": nums(p.translation().as_slice()),
        "quaternion_xyzw": nums(&p.quaternion_xyzw()),
        "rotation_deg": num(p.rotation_angle().to_degrees()),
    })
}

pub fn loss_report(r: &LossReport) -> Value {
    json!({
        "total": num(r.total),
        "photometric_masked": num(r.photometric_masked),
        "photometric": num(r.photometric),
        "l2": num(r.l2),
        "ssim": num(r.ssim),
        "smoothness": num(r.smoothness),
        "geometry": num(r.geometry),
        "brightness": { "a": num(r.brightness.a), "c": num(r.brightness.c) },
        "brightness_degenerate": r.brightness_degenerate,
        "valid_pixels": r.valid_pixels,
        "consistency_pixels": r.consistency_pixels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_keep_seventeen_digits_and_roundtrip() {
        let v = json!({ "b": num(0.1), "a": num(1.0 / 3.0), "n": num(f64::NAN), "i": 3 });
        let text = String::from_utf8(to_bytes(&v)).unwrap();
        assert_eq!(
            text,
            "{\"a\":3.3333333333333331e-1,\"b\":1.0000000000000001e-1,\"i\":3,\"n\":null}\n"
        );
        let back: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(back["a"].as_f64(), Some(1.0 / 3.0));
        assert_eq!(back["b"].as_f64(), Some(0.1));
    }

    #[test]
    fn negative_zero_and_tiny_values_are_valid_json() {
        for x in [-0.0, 5e-324, -1.7976931348623157e308] {
            let text = to_bytes(&json!([num(x)]));
            let back: Value = serde_json::from_slice(&text).unwrap();
            assert_eq!(back[0].as_f64(), Some(x));
        }
    }
}
