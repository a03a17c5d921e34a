use std::path::Path;

use endovo_core::traj_metrics::Trajectory;
use endovo_core::Pose;
use nalgebra::Vector3;

use super::{read_bytes, write_atomic, IoError};

const COLUMNS: usize = 8;

/// Reads `timestamp, tx, ty, tz, qx, qy, qz, qw` rows (seconds, meters,
/// quaternion x-y-z-w) after one header row, keeping every `decimate`-th pose
/// (1 keeps all; 1 kHz robot logs are usually thinned on ingest).
pub fn read_trajectory(path: &Path, decimate: usize) -> Result<Trajectory, IoError> {
    if decimate == 0 {
        return Err(IoError::parse(path, "decimation factor must be at least 1"));
    }
    let bytes = read_bytes(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(bytes.as_slice());
    let mut stamps = Vec::new();
    let mut poses = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| IoError::parse(path, e.to_string()))?;
        let line = record.position().map_or(i + 2, |p| p.line() as usize);
        if record.len() != COLUMNS {
            return Err(IoError::parse(
                path,
                format!("line {line}: expected {COLUMNS} columns, found {}", record.len()),
            ));
        }
        if i % decimate != 0 {
            continue;
        }
        let mut v = [0.0; COLUMNS];
        for (slot, field) in v.iter_mut().zip(record.iter()) {
            *slot = field
                .parse()
                .map_err(|_| IoError::parse(path, format!("line {line}: {field:?} is not a number")))?;
        }
        let pose = Pose::new([v[4], v[5], v[6], v[7]], [v[1], v[2], v[3]])
            .map_err(|e| IoError::parse(path, format!("line {line}: {e}")))?;
        stamps.push(v[0]);
        poses.push(pose);
    }
    Trajectory::new(stamps, poses).map_err(|e| IoError::parse(path, e.to_string()))
}

/// Timestamps and positions of a pose CSV (the robot log used for speed).
pub fn read_positions(path: &Path, decimate: usize) -> Result<(Vec<f64>, Vec<Vector3<f64>>), IoError> {
    let traj = read_trajectory(path, decimate)?;
    Ok((traj.timestamps().to_vec(), traj.positions()))
}

/// Writes a trajectory with a header row; values keep 17 significant digits
/// so a read-back is exact.
pub fn write_trajectory(path: &Path, traj: &Trajectory) -> Result<(), IoError> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| IoError::parse(path, e.to_string());
    writer
        .write_record(["timestamp", "tx", "ty", "tz", "qx", "qy", "qz", "qw"])
        .map_err(csv_err)?;
    for (t, p) in traj.timestamps().iter().zip(traj.poses()) {
        let tr = p.translation();
        let q = p.quaternion_xyzw();
        let row = [*t, tr.x, tr.y, tr.z, q[0], q[1], q[2], q[3]].map(|v| format!("{v:.16e}"));
        writer.write_record(&row).map_err(csv_err)?;
    }
    let bytes = writer.into_inner().map_err(|e| IoError::parse(path, e.to_string()))?;
    write_atomic(path, &bytes)
}
