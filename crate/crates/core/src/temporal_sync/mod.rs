//! Camera-to-robot temporal alignment.
//!
//! Forward motion of an endoscope shows up as positive divergence of the optical
//! flow, while the robot log gives the tip speed directly. Correlating the two
//! series over integer lags recovers the offset between the recordings.

mod filter;
mod flow;
mod sync;

pub use filter::{butterworth_magnitude, filtfilt, Biquad};
pub use flow::{divergence, divergence_series, lk_flow, lk_flow_with, FlowField, LkOptions};
pub use sync::{resample_to_rate, robot_speed, sync_offset, SyncOptions, SyncResult, RELIABLE_SCORE};

use alloc::vec::Vec;

use thiserror::Error;

use crate::imaging::ImagingError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SyncError {
    #[error(transparent)]
    Imaging(#[from] ImagingError),
    #[error("no confident flow pixels")]
    NoConfidentPixels,
    #[error("samples are not uniformly spaced (index {0})")]
    NonUniformSampling(usize),
    #[error("signal too short: need {needed} samples, got {got}")]
    SignalTooShort { needed: usize, got: usize },
    #[error("cutoff {cutoff_hz} Hz must lie strictly between 0 and the Nyquist rate {nyquist_hz} Hz")]
    BadCutoff { cutoff_hz: f64, nyquist_hz: f64 },
    #[error("sample rate must be positive and finite, got {0}")]
    BadRate(f64),
    #[error("window must be odd and at least 3, got {0}")]
    BadWindow(usize),
}

/// Uniformly sampled series. Units depend on the source: divergence is
/// 1/frame, robot speed is distance/s.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarSignal {
    pub rate_hz: f64,
    pub values: Vec<f64>,
}

impl ScalarSignal {
    pub fn new(rate_hz: f64, values: Vec<f64>) -> Result<Self, SyncError> {
        if !(rate_hz > 0.0 && rate_hz.is_finite()) {
            return Err(SyncError::BadRate(rate_hz));
        }
        Ok(Self { rate_hz, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}
