//! Uniformly sampled signals and the scalar statistics used across the crate.
//!
//! Kurtosis follows the non-excess population convention: central moments are
//! divided by `N`, and a Gaussian sample scores about 3.

use crate::error::{Error, Result};
use crate::noise;

/// A uniformly sampled, finite, real-valued time series.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    samples: Vec<f64>,
    sample_rate_hz: f64,
}

impl Signal {
    pub const MIN_LEN: usize = 4;

    pub fn new(samples: Vec<f64>, sample_rate_hz: f64) -> Result<Self> {
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(Error::InvalidSampleRate(sample_rate_hz));
        }
        if samples.len() < Self::MIN_LEN {
            return Err(Error::TooShort {
                min: Self::MIN_LEN,
                got: samples.len(),
            });
        }
        if let Some(index) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self {
            samples,
            sample_rate_hz,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }

    /// New signal at the same rate; the samples are validated again.
    pub fn with_samples(&self, samples: Vec<f64>) -> Result<Self> {
        Self::new(samples, self.sample_rate_hz)
    }
}

pub fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().sum::<f64>() / x.len() as f64
}

/// Mean of squares.
pub fn power(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
}

/// Population standard deviation.
pub fn std_dev(x: &[f64]) -> f64 {
    central_moment(x, mean(x), 2).sqrt()
}

fn central_moment(x: &[f64], mu: f64, order: i32) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().map(|v| (v - mu).powi(order)).sum::<f64>() / x.len() as f64
}

pub fn rms_of(x: &[f64]) -> f64 {
    power(x).sqrt()
}

pub fn rms(s: &Signal) -> f64 {
    rms_of(s.samples())
}

/// `m4 / m2^2` over raw samples.
pub fn kurtosis_of(x: &[f64]) -> Result<f64> {
    let mu = mean(x);
    let m2 = central_moment(x, mu, 2);
    // Relative test so that a constant offset with rounding noise still counts as flat.
    let scale = x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if m2 <= (4.0 * scale * f64::EPSILON).powi(2) {
        return Err(Error::ZeroVariance);
    }
    let m4 = central_moment(x, mu, 4);
    Ok(m4 / (m2 * m2))
}

pub fn kurtosis(s: &Signal) -> Result<f64> {
    kurtosis_of(s.samples())
}

/// Pearson correlation; 0 when either side has zero variance.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "pearson needs equal lengths");
    let ma = mean(a);
    let mb = mean(b);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let dx = x - ma;
        let dy = y - mb;
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    sab / (saa.sqrt() * sbb.sqrt())
}

/// One-based ranks; tied values share the mean of their ranks.
pub fn ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut r = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let shared = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            r[k] = shared;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation: Pearson correlation of the ranks.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    pearson(&ranks(a), &ranks(b))
}

/// `10 log10(P_signal / P_noise)` with power as mean square.
pub fn snr_db(signal: &[f64], noise: &[f64]) -> f64 {
    10.0 * (power(signal) / power(noise)).log10()
}

/// Adds white Gaussian noise whose realized power puts the mix at `snr_db`.
///
/// The drawn noise is rescaled so the ratio holds on the realization, not just
/// in expectation.
pub fn mix_to_snr(clean: &Signal, noise_seed: u64, snr_db: f64) -> Result<Signal> {
    if !snr_db.is_finite() {
        return Err(Error::InvalidParameter(format!("snr_db must be finite, got {snr_db}")));
    }
    let p_clean = power(clean.samples());
    if p_clean == 0.0 {
        return Err(Error::ZeroPower);
    }
    let mut w = noise::generate_white(1.0, clean.len(), noise_seed)?;
    let p_target = p_clean / 10f64.powf(snr_db / 10.0);
    let gain = (p_target / power(&w)).sqrt();
    for v in w.iter_mut() {
        *v *= gain;
    }
    let mixed = clean.samples().iter().zip(&w).map(|(c, n)| c + n).collect();
    clean.with_samples(mixed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn ranks_average_ties() {
        assert_eq!(ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
        let up = [1.0, 2.0, 5.0, 9.0];
        assert_relative_eq!(spearman(&up, &[0.1, 0.2, 7.0, 8.0]), 1.0);
        assert_relative_eq!(spearman(&up, &[4.0, 3.0, 2.0, -1.0]), -1.0);
    }

    fn sig(x: Vec<f64>) -> Signal {
        Signal::new(x, 1000.0).unwrap()
    }

    #[test]
    fn rejects_invalid_signals() {
        assert!(matches!(Signal::new(vec![1.0; 3], 1.0), Err(Error::TooShort { .. })));
        assert!(matches!(Signal::new(vec![1.0; 8], 0.0), Err(Error::InvalidSampleRate(_))));
        assert!(matches!(
            Signal::new(vec![0.0, 1.0, f64::NAN, 2.0], 1.0),
            Err(Error::NonFinite { index: 2 })
        ));
    }

    #[test]
    fn rms_zero_and_sine() {
        assert_eq!(rms(&sig(vec![0.0; 16])), 0.0);
        let n = 10_000;
        let x: Vec<f64> = (0..n).map(|i| 10.0 * (2.0 * PI * 50.0 * i as f64 / 1e4).sin()).collect();
        assert_relative_eq!(rms(&sig(x)), 10.0 / 2f64.sqrt(), max_relative = 1e-3);
    }

    #[test]
    fn kurtosis_two_point_is_one() {
        let x: Vec<f64> = (0..100).map(|i| if i % 2 == 0 { -1.0 } else { 1.0 }).collect();
        assert_eq!(kurtosis(&sig(x)).unwrap(), 1.0);
    }

    #[test]
    fn kurtosis_gaussian_is_three() {
        let x = noise::generate_white(1.0, 1_000_000, 17).unwrap();
        let k = kurtosis(&sig(x)).unwrap();
        assert!((k - 3.0).abs() < 0.05, "kurtosis {k}");
    }

    #[test]
    fn kurtosis_of_constant_fails() {
        assert_eq!(kurtosis(&sig(vec![2.5; 32])), Err(Error::ZeroVariance));
    }

    #[test]
    fn mix_zero_db_and_determinism() {
        let clean = sig((0..4096).map(|i| (i as f64 * 0.01).sin()).collect());
        let a = mix_to_snr(&clean, 9, 0.0).unwrap();
        let b = mix_to_snr(&clean, 9, 0.0).unwrap();
        assert_eq!(a, b);
        let noise: Vec<f64> = a.samples().iter().zip(clean.samples()).map(|(m, c)| m - c).collect();
        assert!(snr_db(clean.samples(), &noise).abs() < 0.01);
    }

    #[test]
    fn mix_rejects_silence() {
        assert_eq!(mix_to_snr(&sig(vec![0.0; 8]), 1, 3.0), Err(Error::ZeroPower));
    }

    proptest! {
        #[test]
        fn rms_is_homogeneous(c in -1e3f64..1e3, seed in 0u64..1000) {
            let x = noise::generate_white(1.0, 64, seed).unwrap();
            let scaled: Vec<f64> = x.iter().map(|v| v * c).collect();
            let lhs = rms_of(&scaled);
            let rhs = c.abs() * rms_of(&x);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1e-300));
        }

        #[test]
        fn kurtosis_is_affine_invariant(a in prop_oneof![-50.0f64..-0.01, 0.01f64..50.0], b in -100.0f64..100.0, seed in 0u64..1000) {
            let x = noise::generate_white(1.0, 256, seed).unwrap();
            let y: Vec<f64> = x.iter().map(|v| a * v + b).collect();
            let kx = kurtosis_of(&x).unwrap();
            let ky = kurtosis_of(&y).unwrap();
            prop_assert!((kx - ky).abs() <= 1e-9 * kx);
        }

        #[test]
        fn mix_hits_requested_snr(snr in -40.0f64..40.0, seed in 0u64..1000) {
            let clean = sig((0..2048).map(|i| (i as f64 * 0.05).sin() + 0.3).collect());
            let mixed = mix_to_snr(&clean, seed, snr).unwrap();
            let noise: Vec<f64> = mixed.samples().iter().zip(clean.samples()).map(|(m, c)| m - c).collect();
            prop_assert!((snr_db(clean.samples(), &noise) - snr).abs() < 0.01);
        }
    }
}
