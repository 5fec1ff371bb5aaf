//! Synthetic fixtures: a 20 Hz tone, a 20 Hz-periodic train of decaying
//! 1400 Hz bursts, their sum (optionally with white noise at a given SNR), and
//! a run-to-failure bearing response built from jittered, shaft-modulated
//! resonance bursts.

use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::{derive_seed, generate_white, rng_from_seed};
use crate::signal::{mix_to_snr, Signal};

/// Sample rate and length of the tone/impulse fixtures.
pub const FIXTURE_RATE_HZ: f64 = 32768.0;
pub const FIXTURE_LEN: usize = 32768;
pub const TONE_HZ: f64 = 20.0;
pub const TONE_AMPLITUDE: f64 = 10.0;
pub const IMPULSE_CARRIER_HZ: f64 = 1400.0;
pub const IMPULSE_AMPLITUDE: f64 = 100.0;
pub const IMPULSE_DECAY: f64 = 900.0;
pub const IMPULSE_PERIOD_S: f64 = 1.0 / 20.0;

const STREAM_JITTER: u64 = 11;
const STREAM_MEASUREMENT_NOISE: u64 = 12;
const STREAM_SPECIMEN: u64 = 13;

/// Fixture time axis: `t_i = i / fs` for `i = 1..=N`.
pub fn fixture_time(i: usize) -> f64 {
    (i + 1) as f64 / FIXTURE_RATE_HZ
}

pub fn tone_value(t: f64) -> f64 {
    TONE_AMPLITUDE * (2.0 * TONE_HZ * PI * t).sin()
}

pub fn impulse_value(t: f64) -> f64 {
    let t2 = t % IMPULSE_PERIOD_S;
    IMPULSE_AMPLITUDE * (2.0 * IMPULSE_CARRIER_HZ * PI * t).sin() * (-IMPULSE_DECAY * t2).exp()
}

/// Ideal envelope of the impulse train, `100 exp(-900 t2)`.
pub fn impulse_envelope_value(t: f64) -> f64 {
    IMPULSE_AMPLITUDE * (-IMPULSE_DECAY * (t % IMPULSE_PERIOD_S)).exp()
}

fn fixture(f: impl Fn(f64) -> f64) -> Signal {
    let x = (0..FIXTURE_LEN).map(|i| f(fixture_time(i))).collect();
    Signal::new(x, FIXTURE_RATE_HZ).expect("fixture samples are finite")
}

pub fn gen_tone() -> Signal {
    fixture(tone_value)
}

pub fn gen_impulses() -> Signal {
    fixture(impulse_value)
}

/// Tone plus impulses; with `snr_db`, white noise is mixed in at that SNR.
pub fn gen_combined(snr_db: Option<f64>, seed: u64) -> Result<Signal> {
    let tone = gen_tone();
    let imp = gen_impulses();
    let sum = tone
        .samples()
        .iter()
        .zip(imp.samples())
        .map(|(a, b)| a + b)
        .collect();
    let clean = tone.with_samples(sum)?;
    match snr_db {
        Some(db) => mix_to_snr(&clean, seed, db),
        None => Ok(clean),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DefectSimParams {
    /// Shaft frequency modulating burst amplitudes (Hz).
    pub f_m: f64,
    /// Mean impulse period (s).
    pub t_prime: f64,
    /// Resonance frequency of each burst (Hz).
    pub f_n: f64,
    /// Exponential decay factor of each burst (1/s).
    pub decay: f64,
    /// Base burst amplitude, multiplied by severity.
    pub amplitude_scale: f64,
    /// Onset jitter as a fraction of `t_prime`, uniform in `±jitter_frac * t_prime`.
    pub jitter_frac: f64,
    /// Standard deviation of the additive white measurement noise.
    pub noise_sigma: f64,
    pub sample_rate_hz: f64,
    pub duration_s: f64,
    pub seed: u64,
}

impl Default for DefectSimParams {
    fn default() -> Self {
        Self {
            f_m: 25.0,
            t_prime: 0.015,
            f_n: 2000.0,
            decay: 900.0,
            amplitude_scale: 5.0,
            jitter_frac: 0.02,
            noise_sigma: 1.0,
            sample_rate_hz: 10_000.0,
            duration_s: 0.5,
            seed: 0,
        }
    }
}

impl DefectSimParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("f_m", self.f_m),
            ("t_prime", self.t_prime),
            ("f_n", self.f_n),
            ("decay", self.decay),
            ("amplitude_scale", self.amplitude_scale),
            ("sample_rate_hz", self.sample_rate_hz),
            ("duration_s", self.duration_s),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.jitter_frac >= 0.0 && self.jitter_frac < 0.5) {
            return Err(Error::InvalidParameter(format!(
                "jitter_frac must lie in [0, 0.5), got {}",
                self.jitter_frac
            )));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "noise_sigma must be nonnegative, got {}",
                self.noise_sigma
            )));
        }
        if self.f_n >= self.sample_rate_hz / 2.0 {
            return Err(Error::InvalidParameter(format!(
                "resonance {} Hz must be below Nyquist",
                self.f_n
            )));
        }
        if self.t_prime <= 1.0 / self.f_n {
            return Err(Error::InvalidParameter(
                "impulse period must exceed one resonance cycle".into(),
            ));
        }
        Ok(())
    }

    /// Repetition frequency `1 / t_prime` of the bursts.
    pub fn defect_frequency_hz(&self) -> f64 {
        1.0 / self.t_prime
    }

    pub fn sample_count(&self) -> usize {
        (self.duration_s * self.sample_rate_hz).round() as usize
    }

    /// Number of bursts, `floor(duration / t_prime)`.
    pub fn burst_count(&self) -> usize {
        // Guard against 0.5 / 0.015 landing a hair under an integer.
        ((self.duration_s / self.t_prime) * (1.0 + 1e-12)).floor() as usize
    }
}

/// Onset times `i * t_prime + xi_i` for `i = 1..=burst_count`.
pub fn burst_onsets(p: &DefectSimParams) -> Vec<f64> {
    let mut rng = rng_from_seed(derive_seed(p.seed, STREAM_JITTER, 0));
    let spread = p.jitter_frac * p.t_prime;
    (1..=p.burst_count())
        .map(|i| {
            let xi = if spread > 0.0 {
                rng.random_range(-1.0..=1.0) * spread
            } else {
                0.0
            };
            i as f64 * p.t_prime + xi
        })
        .collect()
}

/// Simulated bearing response at the given severity.
///
/// Burst `i` starts at `tau_i = i T' + xi_i` with amplitude
/// `severity * amplitude_scale * cos(2 pi f_m tau_i)` and rings as
/// `exp(-B (t - tau_i)) cos(2 pi f_n (t - tau_i))` until the next onset.
pub fn gen_defect_signal(p: &DefectSimParams, severity: f64) -> Result<Signal> {
    p.validate()?;
    if !(severity >= 0.0 && severity.is_finite()) {
        return Err(Error::InvalidParameter(format!("severity must be nonnegative, got {severity}")));
    }
    let n = p.sample_count();
    let onsets = burst_onsets(p);
    let amplitude = p.amplitude_scale * severity;
    let mut x = vec![0.0; n];
    for (i, &tau) in onsets.iter().enumerate() {
        let end = onsets.get(i + 1).copied().unwrap_or(f64::INFINITY);
        let gain = (2.0 * PI * p.f_m * tau).cos();
        let first = ((tau * p.sample_rate_hz).ceil().max(0.0)) as usize;
        for (k, v) in x.iter_mut().enumerate().skip(first) {
            let t = k as f64 / p.sample_rate_hz;
            if t >= end {
                break;
            }
            let dt = t - tau;
            if dt < 0.0 {
                continue;
            }
            let shape = gain * (-p.decay * dt).exp() * (2.0 * PI * p.f_n * dt).cos();
            *v = amplitude * shape;
        }
    }
    if p.noise_sigma > 0.0 {
        let w = generate_white(
            p.noise_sigma,
            n,
            derive_seed(p.seed, STREAM_MEASUREMENT_NOISE, 0),
        )?;
        for (v, e) in x.iter_mut().zip(&w) {
            *v += e;
        }
    }
    Signal::new(x, p.sample_rate_hz)
}

/// Piecewise-linear growth of fault severity with running time.
///
/// `severity(m) = base + early_slope * m + gain * max(0, (m - knee) / span)`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeverityLaw {
    pub base: f64,
    pub early_slope: f64,
    pub gain: f64,
    pub knee_minute: f64,
    pub span_minutes: f64,
}

impl Default for SeverityLaw {
    fn default() -> Self {
        Self {
            base: 1.0,
            early_slope: 0.002,
            gain: 9.0,
            knee_minute: 300.0,
            span_minutes: 200.0,
        }
    }
}

impl SeverityLaw {
    pub fn at(&self, minute: f64) -> f64 {
        self.base + self.early_slope * minute + self.gain * ((minute - self.knee_minute) / self.span_minutes).max(0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DegradationRun {
    /// Specimen `i` was recorded at minute `i + 1`.
    pub specimens: Vec<Signal>,
    pub severities: Vec<f64>,
    pub interval_minutes: f64,
}

/// Parameters of the specimen recorded at `minute` (its own derived seed).
pub fn specimen_params(p: &DefectSimParams, minute: usize) -> DefectSimParams {
    DefectSimParams {
        seed: derive_seed(p.seed, STREAM_SPECIMEN, minute as u64),
        ..*p
    }
}

/// One specimen per minute, `1..=n_specimens`.
pub fn gen_degradation_run(
    p: &DefectSimParams,
    n_specimens: usize,
    law: &SeverityLaw,
) -> Result<DegradationRun> {
    p.validate()?;
    if n_specimens == 0 {
        return Err(Error::InvalidParameter("need at least one specimen".into()));
    }
    let severities: Vec<f64> = (1..=n_specimens).map(|m| law.at(m as f64)).collect();
    let specimens = (1..=n_specimens)
        .into_par_iter()
        .map(|m| gen_defect_signal(&specimen_params(p, m), severities[m - 1]))
        .collect::<Result<Vec<_>>>()?;
    Ok(DegradationRun {
        specimens,
        severities,
        interval_minutes: 1.0,
    })
}

/// The specimen at `minute` of a run, without generating the whole run.
pub fn gen_specimen(p: &DefectSimParams, minute: usize, law: &SeverityLaw) -> Result<Signal> {
    gen_defect_signal(&specimen_params(p, minute), law.at(minute as f64))
}
