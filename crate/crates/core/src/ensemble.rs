//! Noise-assisted ensemble decompositions.
//!
//! | method   | noise                  | trials per ensemble member         |
//! |----------|------------------------|------------------------------------|
//! | EEMD     | white                  | `x + w_j`                          |
//! | CEEMD    | white                  | `x + w_j` and `x - w_j`            |
//! | NPCEEMD  | fractional Gaussian    | `x + g_j` and `x - g_j`            |
//! | CEEMDAN  | white, mode by mode    | one IMF per stage from `r + e E(w)`|
//!
//! Trial `j` always draws its noise from `derive_seed(master_seed, stream, j)`,
//! so trials run in parallel and the result is bit-identical to a sequential
//! run. IMFs of the same order are averaged; trials that produced fewer IMFs
//! are padded with zero IMFs, and the output has as many IMFs as the longest
//! trial.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::emd::{emd, emd_samples, find_extrema, ImfLimit, ImfSet, SiftConfig};
use crate::error::{Error, Result};
use crate::noise::{derive_seed, generate_white, FgnGenerator};
use crate::signal::{std_dev, Signal};

const STREAM_EEMD: u64 = 1;
const STREAM_CEEMD: u64 = 2;
const STREAM_NPCEEMD: u64 = 3;
const STREAM_CEEMDAN: u64 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Emd,
    Eemd,
    Ceemd,
    Ceemdan,
    Npceemd,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Emd,
        Method::Eemd,
        Method::Ceemd,
        Method::Ceemdan,
        Method::Npceemd,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Emd => "emd",
            Method::Eemd => "eemd",
            Method::Ceemd => "ceemd",
            Method::Ceemdan => "ceemdan",
            Method::Npceemd => "npceemd",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidParameter(format!("unknown method '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub method: Method,
    /// Ensemble members. CEEMD and NPCEEMD run two decompositions per member.
    pub ensemble_size: usize,
    /// Noise standard deviation as a fraction of the input's standard deviation.
    pub noise_scale: f64,
    /// Hurst exponent of the fGn; read by NPCEEMD only.
    pub hurst: f64,
    pub master_seed: u64,
    pub sift: SiftConfig,
}

impl EnsembleConfig {
    pub const DEFAULT_ENSEMBLE_SIZE: usize = 10;
    pub const DEFAULT_NOISE_SCALE: f64 = 0.2;
    pub const DEFAULT_HURST: f64 = 0.1;

    pub fn new(method: Method, master_seed: u64) -> Self {
        Self {
            method,
            ensemble_size: Self::DEFAULT_ENSEMBLE_SIZE,
            noise_scale: Self::DEFAULT_NOISE_SCALE,
            hurst: Self::DEFAULT_HURST,
            master_seed,
            sift: SiftConfig::default(),
        }
    }

    pub fn with_method(self, method: Method) -> Self {
        Self { method, ..self }
    }

    pub fn with_ensemble_size(self, ensemble_size: usize) -> Self {
        Self { ensemble_size, ..self }
    }

    pub fn with_noise_scale(self, noise_scale: f64) -> Self {
        Self { noise_scale, ..self }
    }

    pub fn with_hurst(self, hurst: f64) -> Self {
        Self { hurst, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        self.sift.validate()?;
        if self.method == Method::Emd {
            return Ok(());
        }
        if self.ensemble_size == 0 {
            return Err(Error::InvalidParameter("ensemble_size must be at least 1".into()));
        }
        if !(self.noise_scale.is_finite() && self.noise_scale > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "noise_scale must be positive, got {}",
                self.noise_scale
            )));
        }
        if self.method == Method::Npceemd && !(self.hurst > 0.0 && self.hurst < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "hurst must lie in (0, 1), got {}",
                self.hurst
            )));
        }
        Ok(())
    }

    fn expect(&self, method: Method) -> Result<()> {
        if self.method != method {
            return Err(Error::InvalidParameter(format!(
                "config selects {} but {} was called",
                self.method, method
            )));
        }
        self.validate()
    }
}

/// Runs whichever method `cfg` selects.
pub fn decompose(s: &Signal, cfg: &EnsembleConfig) -> Result<ImfSet> {
    match cfg.method {
        Method::Emd => {
            cfg.validate()?;
            emd(s, &cfg.sift)
        }
        Method::Eemd => eemd(s, cfg),
        Method::Ceemd => ceemd(s, cfg),
        Method::Ceemdan => ceemdan(s, cfg),
        Method::Npceemd => npceemd(s, cfg),
    }
}

/// Running per-order sums of IMFs with zero padding.
struct ModeAccumulator {
    n: usize,
    imfs: Vec<Vec<f64>>,
    residue: Vec<f64>,
    count: usize,
}

impl ModeAccumulator {
    fn new(n: usize) -> Self {
        Self {
            n,
            imfs: Vec::new(),
            residue: vec![0.0; n],
            count: 0,
        }
    }

    fn add(&mut self, imfs: &[Vec<f64>], residue: &[f64], weight: usize) {
        while self.imfs.len() < imfs.len() {
            self.imfs.push(vec![0.0; self.n]);
        }
        for (acc, imf) in self.imfs.iter_mut().zip(imfs) {
            for (a, v) in acc.iter_mut().zip(imf) {
                *a += v;
            }
        }
        for (a, v) in self.residue.iter_mut().zip(residue) {
            *a += v;
        }
        self.count += weight;
    }

    fn finish(mut self, sample_rate_hz: f64) -> ImfSet {
        let inv = 1.0 / self.count as f64;
        for imf in &mut self.imfs {
            imf.iter_mut().for_each(|v| *v *= inv);
        }
        self.residue.iter_mut().for_each(|v| *v *= inv);
        ImfSet {
            imfs: self.imfs,
            residue: self.residue,
            sample_rate_hz,
        }
    }
}

fn add_offset(x: &[f64], noise: &[f64], sign: f64) -> Vec<f64> {
    x.iter().zip(noise).map(|(a, b)| a + sign * b).collect()
}

/// Noise standard deviation for a given input.
pub fn noise_sigma(s: &Signal, cfg: &EnsembleConfig) -> f64 {
    cfg.noise_scale * std_dev(s.samples())
}

/// The noise realization injected in trial `j` (before any `±` sign).
///
/// EEMD, CEEMD and CEEMDAN draw white noise; NPCEEMD draws fGn. CEEMDAN's
/// noise is unit-variance because its stage gains are applied later.
pub fn trial_noise(s: &Signal, cfg: &EnsembleConfig, j: usize) -> Result<Vec<f64>> {
    let n = s.len();
    let sigma = match cfg.method {
        Method::Ceemdan => 1.0,
        _ => noise_sigma(s, cfg),
    };
    if sigma == 0.0 {
        return Ok(vec![0.0; n]);
    }
    match cfg.method {
        Method::Emd => Ok(vec![0.0; n]),
        Method::Eemd => generate_white(sigma, n, derive_seed(cfg.master_seed, STREAM_EEMD, j as u64)),
        Method::Ceemd => generate_white(sigma, n, derive_seed(cfg.master_seed, STREAM_CEEMD, j as u64)),
        Method::Ceemdan => generate_white(sigma, n, derive_seed(cfg.master_seed, STREAM_CEEMDAN, j as u64)),
        Method::Npceemd => FgnGenerator::new(cfg.hurst, n)?
            .generate(sigma, derive_seed(cfg.master_seed, STREAM_NPCEEMD, j as u64)),
    }
}

pub fn eemd(s: &Signal, cfg: &EnsembleConfig) -> Result<ImfSet> {
    cfg.expect(Method::Eemd)?;
    let x = s.samples();
    let trials: Vec<(Vec<Vec<f64>>, Vec<f64>)> = (0..cfg.ensemble_size)
        .into_par_iter()
        .map(|j| -> Result<_> {
            let w = trial_noise(s, cfg, j)?;
            Ok(emd_samples(&add_offset(x, &w, 1.0), &cfg.sift))
        })
        .collect::<Result<_>>()?;
    let mut acc = ModeAccumulator::new(x.len());
    for (imfs, residue) in &trials {
        acc.add(imfs, residue, 1);
    }
    Ok(acc.finish(s.sample_rate_hz()))
}

/// Shared complementary-pair engine. `sign` flips which member of each pair is
/// `x + n`; the output does not depend on it.
fn complementary<F>(s: &Signal, cfg: &EnsembleConfig, sign: f64, noise_for: F) -> Result<ImfSet>
where
    F: Fn(usize) -> Result<Vec<f64>> + Sync,
{
    let x = s.samples();
    let n = x.len();
    let pairs: Vec<(Vec<Vec<f64>>, Vec<f64>)> = (0..cfg.ensemble_size)
        .into_par_iter()
        .map(|j| -> Result<_> {
            let noise = noise_for(j)?;
            let (imfs_a, res_a) = emd_samples(&add_offset(x, &noise, sign), &cfg.sift);
            let (imfs_b, res_b) = emd_samples(&add_offset(x, &noise, -sign), &cfg.sift);
            // a + b is commutative in IEEE arithmetic, so the pair sum is the
            // same whichever member carries the plus sign.
            let depth = imfs_a.len().max(imfs_b.len());
            let zero = vec![0.0; n];
            let imfs = (0..depth)
                .map(|k| {
                    let a = imfs_a.get(k).unwrap_or(&zero);
                    let b = imfs_b.get(k).unwrap_or(&zero);
                    a.iter().zip(b).map(|(u, v)| u + v).collect()
                })
                .collect();
            let residue = res_a.iter().zip(&res_b).map(|(u, v)| u + v).collect();
            Ok((imfs, residue))
        })
        .collect::<Result<_>>()?;
    let mut acc = ModeAccumulator::new(n);
    for (imfs, residue) in &pairs {
        acc.add(imfs, residue, 2);
    }
    Ok(acc.finish(s.sample_rate_hz()))
}

pub fn ceemd(s: &Signal, cfg: &EnsembleConfig) -> Result<ImfSet> {
    cfg.expect(Method::Ceemd)?;
    complementary(s, cfg, 1.0, |j| trial_noise(s, cfg, j))
}

/// CEEMD with fractional Gaussian noise pairs in place of white noise.
pub fn npceemd(s: &Signal, cfg: &EnsembleConfig) -> Result<ImfSet> {
    cfg.expect(Method::Npceemd)?;
    npceemd_signed(s, cfg, 1.0)
}

fn npceemd_signed(s: &Signal, cfg: &EnsembleConfig, sign: f64) -> Result<ImfSet> {
    let sigma = noise_sigma(s, cfg);
    let generator = FgnGenerator::new(cfg.hurst, s.len())?;
    complementary(s, cfg, sign, |j| {
        if sigma == 0.0 {
            return Ok(vec![0.0; s.len()]);
        }
        generator.generate(sigma, derive_seed(cfg.master_seed, STREAM_NPCEEMD, j as u64))
    })
}

fn first_mode(x: &[f64], sift: &SiftConfig) -> Vec<f64> {
    let one = SiftConfig {
        max_imfs: ImfLimit::Fixed(1),
        ..*sift
    };
    let (mut imfs, _) = emd_samples(x, &one);
    imfs.pop().unwrap_or_else(|| vec![0.0; x.len()])
}

/// Complete ensemble EMD with adaptive noise.
///
/// Stage 1 averages the first mode of `x + e_0 w_j`. Stage `k > 1` averages the
/// first mode of `r_{k-1} + e_{k-1} E_{k-1}(w_j)`, where `E_m(w)` is the m-th
/// EMD mode of the stored noise and `e = noise_scale * std(current residue)`.
/// The final residue is whatever remains, so the decomposition telescopes.
pub fn ceemdan(s: &Signal, cfg: &EnsembleConfig) -> Result<ImfSet> {
    cfg.expect(Method::Ceemdan)?;
    let x = s.samples();
    let n = x.len();
    let limit = cfg.sift.max_imfs.resolve(n);

    let noises: Vec<Vec<f64>> = (0..cfg.ensemble_size)
        .into_par_iter()
        .map(|j| trial_noise(s, cfg, j))
        .collect::<Result<_>>()?;
    let noise_modes: Vec<Vec<Vec<f64>>> = noises
        .par_iter()
        .map(|w| {
            let unbounded = SiftConfig {
                max_imfs: ImfLimit::Unbounded,
                ..cfg.sift
            };
            emd_samples(w, &unbounded).0
        })
        .collect();

    let zero = vec![0.0; n];
    let mut residue = x.to_vec();
    let mut imfs: Vec<Vec<f64>> = Vec::new();
    while imfs.len() < limit {
        let ex = find_extrema(&residue);
        if ex.count() < 3 || ex.maxima.is_empty() || ex.minima.is_empty() {
            break;
        }
        let stage = imfs.len();
        let eps = cfg.noise_scale * std_dev(&residue);
        let modes: Vec<Vec<f64>> = (0..cfg.ensemble_size)
            .into_par_iter()
            .map(|j| {
                let perturbation = if stage == 0 {
                    &noises[j]
                } else {
                    noise_modes[j].get(stage - 1).unwrap_or(&zero)
                };
                first_mode(&add_offset(&residue, perturbation, eps), &cfg.sift)
            })
            .collect();
        let mut imf = vec![0.0; n];
        for m in &modes {
            for (a, v) in imf.iter_mut().zip(m) {
                *a += v;
            }
        }
        let inv = 1.0 / cfg.ensemble_size as f64;
        imf.iter_mut().for_each(|v| *v *= inv);
        if imf.iter().all(|v| *v == 0.0) {
            break;
        }
        for (r, v) in residue.iter_mut().zip(&imf) {
            *r -= v;
        }
        imfs.push(imf);
    }
    Ok(ImfSet {
        imfs,
        residue,
        sample_rate_hz: s.sample_rate_hz(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn two_tone(n: usize) -> Signal {
        let fs = 1000.0;
        let x = (0..n)
            .map(|i| {
                let t = i as f64 / fs;
                (2.0 * PI * 7.0 * t).sin() + 0.4 * (2.0 * PI * 90.0 * t).sin() + 0.2 * t
            })
            .collect();
        Signal::new(x, fs).unwrap()
    }

    fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).fold(0.0f64, |m, (u, v)| m.max((u - v).abs()))
    }

    fn assert_close_to_emd(method: Method) {
        let s = two_tone(1024);
        let plain = emd(&s, &SiftConfig::default()).unwrap();
        let cfg = EnsembleConfig::new(method, 11)
            .with_noise_scale(1e-8)
            .with_ensemble_size(4);
        let out = decompose(&s, &cfg).unwrap();
        assert_eq!(out.len(), plain.len(), "{method}");
        for (a, b) in out.imfs.iter().zip(&plain.imfs) {
            assert!(max_abs_diff(a, b) < 1e-6, "{method}: {}", max_abs_diff(a, b));
        }
    }

    #[test]
    fn vanishing_noise_recovers_plain_emd() {
        for m in [Method::Eemd, Method::Ceemd, Method::Ceemdan, Method::Npceemd] {
            assert_close_to_emd(m);
        }
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("vmd".parse::<Method>().is_err());
    }

    #[test]
    fn wrong_method_is_rejected() {
        let s = two_tone(256);
        let cfg = EnsembleConfig::new(Method::Eemd, 0);
        assert!(ceemd(&s, &cfg).is_err());
        assert!(eemd(&s, &cfg.with_noise_scale(0.0)).is_err());
        assert!(npceemd(&s, &cfg.with_method(Method::Npceemd).with_hurst(1.0)).is_err());
    }

    #[test]
    fn complementary_pairs_ignore_sign_convention() {
        let s = two_tone(1024);
        let cfg = EnsembleConfig::new(Method::Npceemd, 5).with_ensemble_size(3);
        let plus = npceemd_signed(&s, &cfg, 1.0).unwrap();
        let minus = npceemd_signed(&s, &cfg, -1.0).unwrap();
        assert_eq!(plus, minus);
    }

    #[test]
    fn ensembles_are_deterministic() {
        let s = two_tone(1024);
        for m in [Method::Eemd, Method::Ceemd, Method::Ceemdan, Method::Npceemd] {
            let cfg = EnsembleConfig::new(m, 99).with_ensemble_size(3);
            assert_eq!(decompose(&s, &cfg).unwrap(), decompose(&s, &cfg).unwrap(), "{m}");
        }
    }

    #[test]
    fn complementary_methods_reconstruct() {
        let s = two_tone(2048);
        for m in [Method::Ceemd, Method::Npceemd] {
            let out = decompose(&s, &EnsembleConfig::new(m, 3).with_ensemble_size(4)).unwrap();
            assert!(out.reconstruction_error(s.samples()) < 1e-9, "{m}");
        }
        let out = decompose(&s, &EnsembleConfig::new(Method::Ceemdan, 3).with_ensemble_size(4)).unwrap();
        assert!(out.reconstruction_error(s.samples()) < 1e-6);
    }

    #[test]
    fn noise_is_linear_in_scale() {
        let s = two_tone(512);
        for m in [Method::Eemd, Method::Ceemd, Method::Npceemd] {
            let cfg = EnsembleConfig::new(m, 21);
            let a = trial_noise(&s, &cfg, 2).unwrap();
            let b = trial_noise(&s, &cfg.with_noise_scale(2.0 * cfg.noise_scale), 2).unwrap();
            for (u, v) in a.iter().zip(&b) {
                assert_eq!(2.0 * u, *v, "{m}");
            }
        }
    }

    #[test]
    fn averaging_pads_short_trials_with_zeros() {
        let mut acc = ModeAccumulator::new(2);
        acc.add(&[vec![1.0, 1.0], vec![2.0, 2.0]], &[0.0, 0.0], 1);
        acc.add(&[vec![3.0, 3.0]], &[1.0, 1.0], 1);
        let set = acc.finish(1.0);
        assert_eq!(set.imfs, vec![vec![2.0, 2.0], vec![1.0, 1.0]]);
        assert_eq!(set.residue, vec![0.5, 0.5]);
    }
}
