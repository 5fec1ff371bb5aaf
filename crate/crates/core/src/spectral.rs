//! Hilbert envelopes, envelope spectra and defect-peak detection.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{mean, Signal};

pub const MIN_SPECTRAL_LEN: usize = 8;
/// Calibrated so MI-selected IMFs of pure white noise (10 kHz, 5000 samples,
/// NPCEEMD defaults) clear it in well under 1% of runs; 5 gave about 2%.
pub const DEFAULT_PEAK_RATIO: f64 = 8.0;
pub const DEFAULT_HARMONIC_RATIO: f64 = 3.0;
pub const DEFAULT_HARMONICS: usize = 3;
/// Amplitudes below this fraction of the mean envelope are FFT roundoff; the
/// floor never drops under it, so a flat envelope cannot produce "peaks".
pub const NUMERICAL_FLOOR_REL: f64 = 1e-10;

fn check_len(n: usize) -> Result<()> {
    if n < MIN_SPECTRAL_LEN {
        return Err(Error::TooShort { min: MIN_SPECTRAL_LEN, got: n });
    }
    Ok(())
}

/// Analytic signal by the one-sided spectrum method: DC (and Nyquist, for
/// even lengths) kept, positive frequencies doubled, negative ones zeroed.
pub fn analytic_signal(x: &[f64]) -> Vec<Complex<f64>> {
    let n = x.len();
    let mut planner = FftPlanner::new();
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    planner.plan_fft_forward(n).process(&mut buf);
    let half = n / 2;
    let doubled_end = if n % 2 == 0 { half } else { half + 1 };
    for (k, c) in buf.iter_mut().enumerate() {
        if k == 0 || (n % 2 == 0 && k == half) {
            continue;
        }
        if k < doubled_end {
            *c *= 2.0;
        } else {
            *c = Complex::new(0.0, 0.0);
        }
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let inv = 1.0 / n as f64;
    buf.iter_mut().for_each(|c| *c *= inv);
    buf
}

pub fn envelope_of(x: &[f64]) -> Result<Vec<f64>> {
    check_len(x.len())?;
    Ok(analytic_signal(x).iter().map(|c| c.norm()).collect())
}

/// Modulus of the analytic signal.
pub fn analytic_envelope(s: &Signal) -> Result<Vec<f64>> {
    envelope_of(s.samples())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeSpectrum {
    pub frequencies_hz: Vec<f64>,
    pub amplitudes: Vec<f64>,
    pub resolution_hz: f64,
    /// Mean of the envelope, removed before the transform.
    pub envelope_mean: f64,
}

impl EnvelopeSpectrum {
    pub fn nyquist_hz(&self) -> f64 {
        *self.frequencies_hz.last().unwrap_or(&0.0)
    }

    /// Median amplitude over every bin except DC, bounded below by
    /// `NUMERICAL_FLOOR_REL * envelope_mean`.
    pub fn median_floor(&self) -> f64 {
        let mut a: Vec<f64> = self.amplitudes.iter().skip(1).copied().collect();
        if a.is_empty() {
            return 0.0;
        }
        a.sort_by(f64::total_cmp);
        let m = a.len() / 2;
        let median = if a.len() % 2 == 1 { a[m] } else { 0.5 * (a[m - 1] + a[m]) };
        median.max(NUMERICAL_FLOOR_REL * self.envelope_mean.abs())
    }

    /// Largest non-DC bin as `(bin, amplitude)`; ties go to the lower bin.
    pub fn dominant_bin(&self) -> Option<(usize, f64)> {
        self.amplitudes
            .iter()
            .enumerate()
            .skip(1)
            .fold(None, |best: Option<(usize, f64)>, (i, &a)| match best {
                Some((_, b)) if b >= a => best,
                _ => Some((i, a)),
            })
    }

    pub fn bin_of(&self, hz: f64) -> usize {
        ((hz / self.resolution_hz).round() as usize).min(self.amplitudes.len().saturating_sub(1))
    }

    /// Strongest bin within `±1` bin of `hz`, excluding DC.
    fn peak_near(&self, hz: f64) -> (usize, f64) {
        let last = self.amplitudes.len() - 1;
        let c = self.bin_of(hz);
        let lo = c.saturating_sub(1).max(1);
        let hi = (c + 1).min(last);
        (lo..=hi).fold((lo, f64::NEG_INFINITY), |best, b| {
            if self.amplitudes[b] > best.1 {
                (b, self.amplitudes[b])
            } else {
                best
            }
        })
    }
}

/// Single-sided `2/N` magnitude spectrum of the mean-removed envelope, DC
/// forced to zero.
pub fn envelope_spectrum_of(x: &[f64], sample_rate_hz: f64) -> Result<EnvelopeSpectrum> {
    let env = envelope_of(x)?;
    let n = env.len();
    let mu = mean(&env);
    let mut buf: Vec<Complex<f64>> = env.iter().map(|&v| Complex::new(v - mu, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let bins = n / 2 + 1;
    let resolution_hz = sample_rate_hz / n as f64;
    let scale = 2.0 / n as f64;
    let mut amplitudes: Vec<f64> = buf[..bins].iter().map(|c| c.norm() * scale).collect();
    amplitudes[0] = 0.0;
    Ok(EnvelopeSpectrum {
        frequencies_hz: (0..bins).map(|k| k as f64 * resolution_hz).collect(),
        amplitudes,
        resolution_hz,
        envelope_mean: mu,
    })
}

pub fn envelope_spectrum(s: &Signal) -> Result<EnvelopeSpectrum> {
    envelope_spectrum_of(s.samples(), s.sample_rate_hz())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionThresholds {
    /// The target peak must exceed this multiple of the median floor.
    pub peak_ratio: f64,
    /// Harmonic peaks must exceed this multiple of the median floor.
    pub harmonic_ratio: f64,
}

impl Default for DetectionThresholds {
    fn default() -> Self {
        Self {
            peak_ratio: DEFAULT_PEAK_RATIO,
            harmonic_ratio: DEFAULT_HARMONIC_RATIO,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HarmonicMatch {
    pub harmonic: usize,
    pub bin: usize,
    pub frequency_hz: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub found: bool,
    pub target_hz: f64,
    /// Target-window maximum over the median floor.
    pub peak_ratio: f64,
    pub peak_frequency_hz: f64,
    /// Multiples `1..=n_harmonics` of the target that clear the harmonic ratio.
    pub matched_bins: Vec<HarmonicMatch>,
}

pub fn detect_defect_peak(spec: &EnvelopeSpectrum, target_hz: f64, n_harmonics: usize) -> Result<Detection> {
    detect_defect_peak_with(spec, target_hz, n_harmonics, &DetectionThresholds::default())
}

pub fn detect_defect_peak_with(
    spec: &EnvelopeSpectrum,
    target_hz: f64,
    n_harmonics: usize,
    thresholds: &DetectionThresholds,
) -> Result<Detection> {
    let nyquist_hz = spec.nyquist_hz();
    if target_hz >= nyquist_hz {
        return Err(Error::TargetAboveNyquist { target_hz, nyquist_hz });
    }
    if !(target_hz > 0.0) {
        return Err(Error::InvalidParameter(format!("target must be positive, got {target_hz}")));
    }
    let floor = spec.median_floor();
    let ratio = |a: f64| if floor > 0.0 { a / floor } else if a > 0.0 { f64::INFINITY } else { 0.0 };

    let (bin, amp) = spec.peak_near(target_hz);
    let peak_ratio = ratio(amp);
    let matched_bins = (1..=n_harmonics)
        .filter(|&h| (h as f64) * target_hz < nyquist_hz)
        .filter_map(|h| {
            let (b, a) = spec.peak_near(h as f64 * target_hz);
            let r = ratio(a);
            (r > thresholds.harmonic_ratio).then(|| HarmonicMatch {
                harmonic: h,
                bin: b,
                frequency_hz: spec.frequencies_hz[b],
                ratio: r,
            })
        })
        .collect();
    Ok(Detection {
        found: peak_ratio > thresholds.peak_ratio,
        target_hz,
        peak_ratio,
        peak_frequency_hz: spec.frequencies_hz[bin],
        matched_bins,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::generate_white;
    use crate::signal::pearson;
    use std::f64::consts::PI;

    fn am(n: usize, fs: f64) -> (Vec<f64>, Vec<f64>) {
        let modulator: Vec<f64> = (0..n)
            .map(|i| 1.0 + 0.5 * (2.0 * PI * 60.0 * i as f64 / fs).sin())
            .collect();
        let x = modulator
            .iter()
            .enumerate()
            .map(|(i, m)| m * (2.0 * PI * 1000.0 * i as f64 / fs).sin())
            .collect();
        (x, modulator)
    }

    #[test]
    fn envelope_of_tone_is_its_amplitude() {
        let fs = 8000.0;
        let x: Vec<f64> = (0..8000).map(|i| 3.0 * (2.0 * PI * 250.0 * i as f64 / fs).sin()).collect();
        let env = envelope_of(&x).unwrap();
        for v in &env[800..7200] {
            assert!((v - 3.0).abs() < 0.03);
        }
    }

    #[test]
    fn envelope_recovers_am_modulator() {
        let (x, m) = am(10_000, 10_000.0);
        let env = envelope_of(&x).unwrap();
        assert!(pearson(&env[1000..9000], &m[1000..9000]) >= 0.99);
        let spec = envelope_spectrum_of(&x, 10_000.0).unwrap();
        let (bin, _) = spec.dominant_bin().unwrap();
        assert!((spec.frequencies_hz[bin] - 60.0).abs() <= spec.resolution_hz);
    }

    #[test]
    fn zero_in_zero_out() {
        assert!(envelope_of(&[0.0; 64]).unwrap().iter().all(|v| *v == 0.0));
        assert!(envelope_of(&[1.0; 7]).is_err());
    }

    #[test]
    fn analytic_energy_is_twice_input_energy() {
        for n in [1000usize, 1001] {
            let x = generate_white(1.0, n, n as u64).unwrap();
            let z = analytic_signal(&x);
            let ez: f64 = z.iter().map(|c| c.norm_sqr()).sum();
            let ex: f64 = x.iter().map(|v| v * v).sum();
            let mut spec: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
            FftPlanner::new().plan_fft_forward(n).process(&mut spec);
            let mut correction = spec[0].norm_sqr();
            if n % 2 == 0 {
                correction += spec[n / 2].norm_sqr();
            }
            let expected = 2.0 * ex - correction / n as f64;
            assert!((ez - expected).abs() <= 1e-6 * expected);
            assert!(z.iter().all(|c| c.norm() >= 0.0));
        }
    }

    #[test]
    fn flat_envelope_has_no_peaks() {
        let fs = 10_000.0;
        let x: Vec<f64> = (0..10_000).map(|i| (2.0 * PI * 1234.0 * i as f64 / fs).sin()).collect();
        let spec = envelope_spectrum_of(&x, fs).unwrap();
        let floor = spec.median_floor();
        assert!(spec.amplitudes.iter().all(|a| *a <= 5.0 * floor));
    }

    #[test]
    fn spectrum_scales_with_input() {
        let (x, _) = am(4096, 8192.0);
        let a = envelope_spectrum_of(&x, 8192.0).unwrap();
        let scaled: Vec<f64> = x.iter().map(|v| -4.0 * v).collect();
        let b = envelope_spectrum_of(&scaled, 8192.0).unwrap();
        for (u, v) in a.amplitudes.iter().zip(&b.amplitudes) {
            assert!((4.0 * u - v).abs() <= 1e-12 * v.abs().max(1e-300) + 1e-15);
        }
    }

    #[test]
    fn am_peak_is_detected_with_threshold_monotonicity() {
        let (x, _) = am(10_000, 10_000.0);
        let spec = envelope_spectrum_of(&x, 10_000.0).unwrap();
        let d = detect_defect_peak(&spec, 60.0, 3).unwrap();
        assert!(d.found);
        assert_eq!(d.matched_bins[0].harmonic, 1);
        let mut last = true;
        for ratio in [1.0, 5.0, 50.0, 1e6, 1e12, f64::INFINITY] {
            let t = DetectionThresholds { peak_ratio: ratio, ..Default::default() };
            let found = detect_defect_peak_with(&spec, 60.0, 3, &t).unwrap().found;
            assert!(last || !found);
            last = found;
        }
        assert!(matches!(
            detect_defect_peak(&spec, 5000.0, 1),
            Err(Error::TargetAboveNyquist { .. })
        ));
    }

    #[test]
    fn white_noise_rarely_triggers() {
        let fs = 10_000.0;
        let alarms = (0..100)
            .filter(|&seed| {
                let x = generate_white(1.0, 5000, 1000 + seed).unwrap();
                let spec = envelope_spectrum_of(&x, fs).unwrap();
                detect_defect_peak(&spec, 66.67, 3).unwrap().found
            })
            .count();
        assert!(alarms <= 1, "{alarms} false alarms");
    }
}
