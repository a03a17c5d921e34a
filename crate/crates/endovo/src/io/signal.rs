use std::path::Path;

use endovo_core::temporal_sync::ScalarSignal;

use super::{read_text, write_atomic, IoError};

/// `# rate_hz = <Hz>` on the first line, then one value per line. Blank
/// lines and further `#` lines are ignored.
pub fn read_signal(path: &Path) -> Result<ScalarSignal, IoError> {
    let text = read_text(path)?;
    let mut rate = None;
    let mut values = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(comment) = line.strip_prefix('#') {
            if let Some((k, v)) = comment.split_once('=') {
                if k.trim() == "rate_hz" {
                    let r = v.trim().parse::<f64>().map_err(|_| IoError::parse(path, format!("line {}: bad rate", n + 1)))?;
                    rate = Some(r);
                }
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let v = line
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| IoError::parse(path, format!("line {}: {line:?} is not a finite number", n + 1)))?;
        values.push(v);
    }
    let rate = rate.ok_or_else(|| IoError::parse(path, "missing `# rate_hz = ...` line"))?;
    ScalarSignal::new(rate, values).map_err(|e| IoError::parse(path, e.to_string()))
}

pub fn write_signal(path: &Path, sig: &ScalarSignal) -> Result<(), IoError> {
    let mut text = format!("# rate_hz = {}\n", sig.rate_hz);
    for v in &sig.values {
        text.push_str(&format!("{v:?}\n"));
    }
    write_atomic(path, text.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.txt");
        let s = ScalarSignal::new(20.0, vec![0.1, -2.5e-7, 1.0 / 3.0]).unwrap();
        write_signal(&p, &s).unwrap();
        assert_eq!(read_signal(&p).unwrap(), s);
    }

    #[test]
    fn rate_is_required_and_values_must_be_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.txt");
        std::fs::write(&p, "1\n2\n").unwrap();
        assert!(read_signal(&p).is_err());
        std::fs::write(&p, "# rate_hz = 10\n1\nnan\n").unwrap();
        assert!(read_signal(&p).is_err());
        std::fs::write(&p, "# rate_hz = 10\n\n1\n# note\n2\n").unwrap();
        assert_eq!(read_signal(&p).unwrap().values, [1.0, 2.0]);
    }
}
