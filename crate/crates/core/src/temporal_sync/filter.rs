use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;

use super::SyncError;

/// Second-order section in transposed direct form II, with `a0 = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    /// Second-order Butterworth low-pass from the bilinear transform with
    /// frequency prewarping, so the -3 dB point lands exactly on `cutoff_hz`.
    pub fn butterworth_lowpass(cutoff_hz: f64, sample_rate_hz: f64) -> Result<Self, SyncError> {
        if !(sample_rate_hz > 0.0 && sample_rate_hz.is_finite()) {
            return Err(SyncError::BadRate(sample_rate_hz));
        }
        let nyquist_hz = sample_rate_hz / 2.0;
        if !(cutoff_hz > 0.0 && cutoff_hz < nyquist_hz) {
            return Err(SyncError::BadCutoff { cutoff_hz, nyquist_hz });
        }
        let k = (core::f64::consts::PI * cutoff_hz / sample_rate_hz).tan();
        let sqrt2 = core::f64::consts::SQRT_2;
        let norm = 1.0 / (1.0 + sqrt2 * k + k * k);
        let b0 = k * k * norm;
        Ok(Self {
            b: [b0, 2.0 * b0, b0],
            a: [2.0 * (k * k - 1.0) * norm, (1.0 - sqrt2 * k + k * k) * norm],
        })
    }

    /// State that makes a constant input `x0` pass through unchanged.
    fn steady_state(&self, x0: f64) -> [f64; 2] {
        let gain = (self.b[0] + self.b[1] + self.b[2]) / (1.0 + self.a[0] + self.a[1]);
        let y = gain * x0;
        let z2 = self.b[2] * x0 - self.a[1] * y;
        let z1 = self.b[1] * x0 - self.a[0] * y + z2;
        [z1, z2]
    }

    fn run(&self, x: &mut [f64]) {
        let Some(&x0) = x.first() else { return };
        let [mut z1, mut z2] = self.steady_state(x0);
        for v in x.iter_mut() {
            let xi = *v;
            let y = self.b[0] * xi + z1;
            z1 = self.b[1] * xi - self.a[0] * y + z2;
            z2 = self.b[2] * xi - self.a[1] * y;
            *v = y;
        }
    }
}

/// Magnitude response `|H|` of [`Biquad::butterworth_lowpass`] at `freq_hz`.
pub fn butterworth_magnitude(freq_hz: f64, cutoff_hz: f64, sample_rate_hz: f64) -> f64 {
    let wa = (core::f64::consts::PI * freq_hz / sample_rate_hz).tan();
    let wc = (core::f64::consts::PI * cutoff_hz / sample_rate_hz).tan();
    1.0 / (1.0 + (wa / wc).powi(4)).sqrt()
}

/// Zero-phase filtering: forward pass, then backward pass.
///
/// The signal is padded at both ends by point reflection about the end samples
/// (9 samples, or fewer for short inputs) and each pass starts from the
/// steady state of its first sample, which suppresses start-up transients.
pub fn filtfilt(filter: &Biquad, x: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n < 2 {
        return x.to_vec();
    }
    let pad = 9.min(n - 1);
    let mut ext = Vec::with_capacity(n + 2 * pad);
    for i in (1..=pad).rev() {
        ext.push(2.0 * x[0] - x[i]);
    }
    ext.extend_from_slice(x);
    for i in 1..=pad {
        ext.push(2.0 * x[n - 1] - x[n - 1 - i]);
    }
    filter.run(&mut ext);
    ext.reverse();
    filter.run(&mut ext);
    ext.reverse();
    ext[pad..pad + n].to_vec()
}
