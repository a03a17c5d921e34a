use alloc::vec::Vec;

use nalgebra::Vector3;
#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;

use super::{filtfilt, Biquad, ScalarSignal, SyncError};
use crate::stats::pearson;

/// Correlation below this is reported as unreliable.
pub const RELIABLE_SCORE: f64 = 0.3;

/// Relative tolerance on the sample spacing accepted as uniform.
const UNIFORM_TOL: f64 = 1e-3;

/// Tip speed `‖X_k − X_{k−1}‖ / T` low-passed with a zero-phase second-order
/// Butterworth filter. The output has one sample fewer than the input and its
/// units are position units per second.
pub fn robot_speed(stamps: &[f64], positions: &[Vector3<f64>], cutoff_hz: f64) -> Result<ScalarSignal, SyncError> {
    if stamps.len() != positions.len() || stamps.len() < 2 {
        return Err(SyncError::SignalTooShort {
            needed: 2,
            got: stamps.len().min(positions.len()),
        });
    }
    let n = stamps.len();
    let period = (stamps[n - 1] - stamps[0]) / (n - 1) as f64;
    if !(period > 0.0 && period.is_finite()) {
        return Err(SyncError::NonUniformSampling(1));
    }
    for i in 1..n {
        if ((stamps[i] - stamps[i - 1]) - period).abs() > UNIFORM_TOL * period {
            return Err(SyncError::NonUniformSampling(i));
        }
    }
    let rate = 1.0 / period;
    let raw: Vec<f64> = positions.windows(2).map(|w| (w[1] - w[0]).norm() / period).collect();
    let filter = Biquad::butterworth_lowpass(cutoff_hz, rate)?;
    ScalarSignal::new(rate, filtfilt(&filter, &raw))
}

/// Resamples to `rate_hz`. Downsampling averages the input samples within half
/// an output period of each output instant; upsampling interpolates linearly.
/// Sample `j` of the output sits at time `j / rate_hz` relative to the first
/// input sample.
pub fn resample_to_rate(sig: &ScalarSignal, rate_hz: f64) -> Result<ScalarSignal, SyncError> {
    if !(rate_hz > 0.0 && rate_hz.is_finite()) {
        return Err(SyncError::BadRate(rate_hz));
    }
    let len = sig.len();
    if len == 0 {
        return ScalarSignal::new(rate_hz, Vec::new());
    }
    let r = sig.rate_hz / rate_hz;
    let out_len = ((len - 1) as f64 / r + 1e-9).floor() as usize + 1;
    let values = (0..out_len)
        .map(|j| {
            let center = j as f64 * r;
            if r > 1.0 {
                let lo = ((center - 0.5 * r).ceil().max(0.0)) as usize;
                let hi_excl = (center + 0.5 * r).ceil().min(len as f64) as usize;
                let hi_excl = hi_excl.max(lo + 1).min(len);
                let s: f64 = sig.values[lo..hi_excl].iter().sum();
                s / (hi_excl - lo) as f64
            } else {
                let i0 = (center.floor() as usize).min(len - 1);
                let i1 = (i0 + 1).min(len - 1);
                let f = center - i0 as f64;
                sig.values[i0] * (1.0 - f) + sig.values[i1] * f
            }
        })
        .collect();
    ScalarSignal::new(rate_hz, values)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyncOptions {
    /// Largest |lag| scanned, in camera samples; `None` scans every lag that
    /// leaves enough overlap.
    pub max_lag: Option<usize>,
    /// Minimum overlap in camera samples; `None` means half the shorter signal.
    pub min_overlap: Option<usize>,
}

impl Default for SyncOptions {
    fn default() -> Self {
        Self {
            max_lag: None,
            min_overlap: None,
        }
    }
}

/// Best alignment: camera sample `j` corresponds to resampled robot sample
/// `j + lag`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyncResult {
    /// In camera samples.
    pub lag: isize,
    /// The same lag in robot samples.
    pub lag_robot_samples: isize,
    /// Pearson correlation over the overlap at the chosen lag.
    pub score: f64,
    pub reliable: bool,
    /// Robot samples per camera sample.
    pub ratio: f64,
}

impl SyncResult {
    /// Robot sample index matching camera frame `frame`.
    pub fn robot_sample_for_frame(&self, frame: usize) -> isize {
        ((frame as f64 + self.lag as f64) * self.ratio).round() as isize
    }
}

/// Scans integer lags and returns the one with the highest normalized
/// cross-correlation (ties go to the smaller |lag|, then the negative one).
pub fn sync_offset(cam: &ScalarSignal, robot: &ScalarSignal, opts: &SyncOptions) -> Result<SyncResult, SyncError> {
    let rs = resample_to_rate(robot, cam.rate_hz)?;
    let (nc, nr) = (cam.len() as isize, rs.len() as isize);
    let min_overlap = opts.min_overlap.unwrap_or((nc.min(nr) / 2) as usize).max(3) as isize;
    if nc.min(nr) < min_overlap {
        return Err(SyncError::SignalTooShort {
            needed: min_overlap as usize,
            got: nc.min(nr) as usize,
        });
    }
    let max_lag = opts.max_lag.map(|m| m as isize).unwrap_or(isize::MAX);
    let (k_lo, k_hi) = ((min_overlap - nc).max(-max_lag), (nr - min_overlap).min(max_lag));
    let mut best: Option<(isize, f64)> = None;
    for k in k_lo..=k_hi {
        let j0 = 0.max(-k);
        let j1 = nc.min(nr - k);
        if j1 - j0 < min_overlap {
            continue;
        }
        let a = &cam.values[j0 as usize..j1 as usize];
        let b = &rs.values[(j0 + k) as usize..(j1 + k) as usize];
        let score = pearson(a, b);
        if !score.is_finite() {
            continue;
        }
        let better = match best {
            None => true,
            Some((bk, bs)) => score > bs || (score == bs && (k.abs(), k) < (bk.abs(), bk)),
        };
        if better {
            best = Some((k, score));
        }
    }
    let (lag, score) = best.ok_or(SyncError::SignalTooShort {
        needed: min_overlap as usize,
        got: nc.min(nr) as usize,
    })?;
    let ratio = robot.rate_hz / cam.rate_hz;
    Ok(SyncResult {
        lag,
        lag_robot_samples: (lag as f64 * ratio).round() as isize,
        score,
        reliable: score >= RELIABLE_SCORE,
        ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::temporal_sync::butterworth_magnitude;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn smooth_noise(rng: &mut impl Rng, n: usize) -> Vec<f64> {
        let raw: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let f = Biquad::butterworth_lowpass(0.05, 1.0).unwrap();
        filtfilt(&f, &raw)
    }

    #[test]
    fn constant_positions_zero_speed() {
        let stamps: Vec<f64> = (0..100).map(|i| i as f64 * 1e-3).collect();
        let pos = alloc::vec![Vector3::new(1.0, 2.0, 3.0); 100];
        let s = robot_speed(&stamps, &pos, 300.0).unwrap();
        assert_eq!(s.len(), 99);
        assert!((s.rate_hz - 1000.0).abs() < 1e-6);
        assert!(s.values.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn linear_motion_constant_speed() {
        let stamps: Vec<f64> = (0..500).map(|i| i as f64 * 1e-3).collect();
        let dir = Vector3::new(3.0, 4.0, 0.0) / 5.0;
        let pos: Vec<Vector3<f64>> = stamps.iter().map(|t| dir * (10.0 * t)).collect();
        let s = robot_speed(&stamps, &pos, 300.0).unwrap();
        assert!(s.values.iter().all(|v| (v - 10.0).abs() < 1e-6));
    }

    #[test]
    fn sine_attenuation_matches_transfer_function() {
        let fs = 1000.0;
        let (v0, amp) = (50.0, 20.0);
        for f_sig in [50.0, 150.0, 250.0, 320.0] {
            let w = 2.0 * core::f64::consts::PI * f_sig;
            let t: Vec<f64> = (0..4000).map(|i| i as f64 / fs).collect();
            let pos: Vec<Vector3<f64>> = t.iter().map(|t| Vector3::new(v0 * t - amp / w * (w * t).cos(), 0.0, 0.0)).collect();
            let s = robot_speed(&t, &pos, 300.0).unwrap();
            // least-squares fit of a sinusoid at ω on the interior samples
            // (sample k is the difference between positions k and k+1, centered at (k+½)/fs)
            let (mut cc, mut ss, mut cs, mut yc, mut ys) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for (k, v) in s.values.iter().enumerate().skip(500).take(3000) {
                let tc = (k as f64 + 0.5) / fs;
                let (c, sn) = ((w * tc).cos(), (w * tc).sin());
                let y = v - v0;
                cc += c * c;
                ss += sn * sn;
                cs += c * sn;
                yc += y * c;
                ys += y * sn;
            }
            let det = cc * ss - cs * cs;
            let a = (yc * ss - ys * cs) / det;
            let b = (ys * cc - yc * cs) / det;
            let measured = (a * a + b * b).sqrt();
            let half = w / (2.0 * fs);
            let expected = amp * (half.sin() / half) * butterworth_magnitude(f_sig, 300.0, fs).powi(2);
            assert!((measured / expected - 1.0).abs() < 0.01, "{f_sig} Hz: {measured} vs {expected}");
        }
    }

    #[test]
    fn non_uniform_rejected() {
        let stamps = [0.0, 0.001, 0.0025, 0.003];
        let pos = [Vector3::zeros(); 4];
        assert!(matches!(robot_speed(&stamps, &pos, 100.0), Err(SyncError::NonUniformSampling(_))));
    }

    #[test]
    fn resample_by_averaging() {
        let s = ScalarSignal::new(4.0, (0..12).map(|i| i as f64).collect()).unwrap();
        let r = resample_to_rate(&s, 1.0).unwrap();
        // windows centered on 0, 4, 8: {0,1}, {2..5}, {6..9}
        assert_eq!(r.values, alloc::vec![0.5, 3.5, 7.5]);
        let same = resample_to_rate(&s, 4.0).unwrap();
        assert_eq!(same.values, s.values);
    }

    #[test]
    fn identical_signals_lag_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = smooth_noise(&mut rng, 400);
        let s = ScalarSignal::new(20.0, x).unwrap();
        let r = sync_offset(&s, &s, &SyncOptions::default()).unwrap();
        assert_eq!(r.lag, 0);
        assert!((r.score - 1.0).abs() < 1e-12);
        assert!(r.reliable);
    }

    #[test]
    fn delayed_signal_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let base = smooth_noise(&mut rng, 1000);
        for k in [-150isize, -7, 0, 1, 42, 150] {
            let cam: Vec<f64> = base[300..700].to_vec();
            let robot: Vec<f64> = base[(300 - k) as usize..(700 - k) as usize].to_vec();
            let r = sync_offset(
                &ScalarSignal::new(20.0, cam).unwrap(),
                &ScalarSignal::new(20.0, robot).unwrap(),
                &SyncOptions::default(),
            )
            .unwrap();
            assert_eq!(r.lag, k);
            assert_eq!(r.lag_robot_samples, k);
        }
    }

    #[test]
    fn higher_robot_rate_converts_lag() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let base = smooth_noise(&mut rng, 600);
        let cam: Vec<f64> = base[100..500].to_vec();
        // robot at 5x the camera rate, delayed by 12 camera frames
        let robot: Vec<f64> = (0..2000)
            .map(|i| {
                let t = i as f64 / 5.0 + 100.0 - 12.0;
                let i0 = t.floor() as usize;
                base[i0] * (1.0 - (t - i0 as f64)) + base[i0 + 1] * (t - i0 as f64)
            })
            .collect();
        let r = sync_offset(
            &ScalarSignal::new(20.0, cam).unwrap(),
            &ScalarSignal::new(100.0, robot).unwrap(),
            &SyncOptions::default(),
        )
        .unwrap();
        assert_eq!(r.lag, 12);
        assert_eq!(r.lag_robot_samples, 60);
        assert_eq!(r.robot_sample_for_frame(3), 75);
    }

    #[test]
    fn independent_noise_is_unreliable() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut unreliable = 0;
        for _ in 0..50 {
            let a: Vec<f64> = (0..600).map(|_| rng.random_range(-1.0..1.0)).collect();
            let b: Vec<f64> = (0..600).map(|_| rng.random_range(-1.0..1.0)).collect();
            let r = sync_offset(
                &ScalarSignal::new(20.0, a).unwrap(),
                &ScalarSignal::new(20.0, b).unwrap(),
                &SyncOptions::default(),
            )
            .unwrap();
            if !r.reliable {
                unreliable += 1;
            }
        }
        assert_eq!(unreliable, 50);
    }
}
