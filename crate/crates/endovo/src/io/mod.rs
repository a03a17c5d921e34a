//! On-disk formats.
//!
//! | what            | format                                                      |
//! |-----------------|-------------------------------------------------------------|
//! | images          | PNG (8/16-bit), PGM/PPM                                     |
//! | depth maps      | 16-bit PNG (`meters = value / 5000`) or raw `DEPTHF32`      |
//! | trajectories    | CSV `timestamp, tx, ty, tz, qx, qy, qz, qw`                 |
//! | calibration     | `key = value` text (`fx fy s cx cy k1 k2 width height model`)|
//! | clouds / meshes | PLY, ASCII or binary little-endian                          |
//! | ESAB weights    | text manifest + little-endian float32 blob                  |
//! | 1-D signals     | text, `# rate_hz = <Hz>` then one value per line            |
//!
//! Every writer goes through [`write_atomic`], so a failed job never leaves a
//! truncated file behind.

mod calib;
mod depth;
mod esab;
mod image;
mod ply;
mod pose_csv;
mod signal;

pub use calib::{format_calibration, parse_calibration, read_calibration, write_calibration};
pub use depth::{read_depth, write_depth, DepthFormat, DEPTH_PNG_SCALE, RAW_DEPTH_MAGIC};
pub use esab::{read_esab_weights, write_esab_weights};
pub use image::{list_images, read_gray, read_image, write_image};
pub use ply::{parse_unit, read_ply, unit_name, write_ply, PlyData, PlyFormat};
pub use pose_csv::{read_positions, read_trajectory, write_trajectory};
pub use signal::{read_signal, write_signal};

use std::io::Write;
use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Image { path: PathBuf, source: ::image::ImageError },
    #[error("{path}: unsupported {what}")]
    Unsupported { path: PathBuf, what: String },
}

impl IoError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        IoError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub(crate) fn parse(path: &Path, message: impl Into<String>) -> Self {
        IoError::Parse {
            path: path.to_path_buf(),
            message: message.into(),
        }
    }

    pub(crate) fn unsupported(path: &Path, what: impl Into<String>) -> Self {
        IoError::Unsupported {
            path: path.to_path_buf(),
            what: what.into(),
        }
    }
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>, IoError> {
    std::fs::read(path).map_err(|e| IoError::io(path, e))
}

pub fn read_text(path: &Path) -> Result<String, IoError> {
    std::fs::read_to_string(path).map_err(|e| IoError::io(path, e))
}

/// Writes `bytes` to a temporary file next to `path`, syncs it and renames it
/// into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::Builder::new()
        .prefix(".endovo-")
        .tempfile_in(dir)
        .map_err(|e| IoError::io(path, e))?;
    tmp.write_all(bytes).map_err(|e| IoError::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| IoError::io(path, e))?;
    #[cfg(unix)]
    {
        // temp files are created private; outputs should look like any other file
        use std::os::unix::fs::PermissionsExt;
        std::fs::set_permissions(tmp.path(), std::fs::Permissions::from_mode(0o644)).map_err(|e| IoError::io(path, e))?;
    }
    tmp.persist(path).map_err(|e| IoError::io(path, e.error))?;
    Ok(())
}
