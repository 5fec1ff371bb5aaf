//! White Gaussian noise and exact fractional Gaussian noise.
//!
//! fGn is synthesised by circulant embedding of its autocovariance
//! (Davies–Harte): the covariance row is wrapped into a circulant of size
//! `2n`, diagonalised with one FFT, and a complex Gaussian vector shaped by
//! the square-rooted eigenvalues is transformed back. The real part of the
//! result has exactly the target covariance.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Largest circulant the fGn generator will allocate.
pub const DEFAULT_EMBEDDING_CAP: usize = 1 << 26;

/// Mixes a master seed with stream coordinates (splitmix64 finaliser).
///
/// Used for every per-trial and per-specimen seed so that results never
/// depend on scheduling order.
pub fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    let mut z = master;
    for word in [stream, index] {
        z = splitmix(z ^ splitmix(word.wrapping_add(0x9E37_79B9_7F4A_7C15)));
    }
    z
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// i.i.d. `N(0, sigma^2)` samples.
pub fn generate_white(sigma: f64, length: usize, seed: u64) -> Result<Vec<f64>> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")));
    }
    let mut rng = rng_from_seed(seed);
    Ok((0..length)
        .map(|_| sigma * rng.sample::<f64, _>(StandardNormal))
        .collect())
}

/// Autocovariance of unit-step fGn at integer lag `k`:
/// `(sigma^2 / 2) (|k-1|^{2H} - 2|k|^{2H} + |k+1|^{2H})`.
pub fn fgn_autocovariance(hurst: f64, sigma: f64, lag: u64) -> f64 {
    let k = lag as f64;
    let h2 = 2.0 * hurst;
    0.5 * sigma * sigma * ((k - 1.0).abs().powf(h2) - 2.0 * k.powf(h2) + (k + 1.0).powf(h2))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FgnParams {
    pub hurst: f64,
    pub sigma: f64,
    pub length: usize,
    pub seed: u64,
}

impl FgnParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.hurst > 0.0 && self.hurst < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "hurst must lie in (0, 1), got {}",
                self.hurst
            )));
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        if self.length == 0 {
            return Err(Error::InvalidParameter("fGn length must be positive".into()));
        }
        Ok(())
    }
}

/// Reusable fGn sampler for one `(hurst, length)` pair.
///
/// Building it costs one FFT of size `2 * length`; every realisation after
/// that costs one more.
#[derive(Clone)]
pub struct FgnGenerator {
    hurst: f64,
    length: usize,
    /// `sqrt(lambda_k / m)` for each circulant eigenvalue.
    shaping: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for FgnGenerator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FgnGenerator")
            .field("hurst", &self.hurst)
            .field("length", &self.length)
            .field("embedding", &self.shaping.len())
            .finish()
    }
}

impl FgnGenerator {
    pub fn new(hurst: f64, length: usize) -> Result<Self> {
        Self::with_cap(hurst, length, DEFAULT_EMBEDDING_CAP)
    }

    pub fn with_cap(hurst: f64, length: usize, cap: usize) -> Result<Self> {
        FgnParams {
            hurst,
            sigma: 1.0,
            length,
            seed: 0,
        }
        .validate()?;
        let m = 2 * length;
        if m > cap {
            return Err(Error::LengthTooLarge { size: m, cap });
        }

        let mut row: Vec<Complex<f64>> = (0..m)
            .map(|j| {
                let lag = if j <= length { j } else { m - j };
                Complex::new(fgn_autocovariance(hurst, 1.0, lag as u64), 0.0)
            })
            .collect();
        let fft = FftPlanner::new().plan_fft_forward(m);
        fft.process(&mut row);

        let max_eig = row.iter().fold(0.0f64, |a, c| a.max(c.re));
        let mut worst_negative = 0.0f64;
        let shaping = row
            .iter()
            .map(|c| {
                if c.re < 0.0 {
                    worst_negative = worst_negative.max(-c.re);
                    0.0
                } else {
                    (c.re / m as f64).sqrt()
                }
            })
            .collect();
        if worst_negative > 1e-8 * max_eig {
            log::warn!(
                "fGn embedding (H = {hurst}, n = {length}) clamped a negative eigenvalue of {worst_negative:e}"
            );
        }

        Ok(Self {
            hurst,
            length,
            shaping,
            fft,
        })
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    pub fn len(&self) -> usize {
        self.length
    }

    pub fn is_empty(&self) -> bool {
        self.length == 0
    }

    /// One zero-mean realisation with standard deviation `sigma`.
    pub fn generate(&self, sigma: f64, seed: u64) -> Result<Vec<f64>> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")));
        }
        let mut rng = rng_from_seed(seed);
        let mut buf: Vec<Complex<f64>> = self
            .shaping
            .iter()
            .map(|&s| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex::new(s * re, s * im)
            })
            .collect();
        self.fft.process(&mut buf);
        Ok(buf[..self.length].iter().map(|c| c.re * sigma).collect())
    }
}

pub fn generate_fgn(p: &FgnParams) -> Result<Vec<f64>> {
    p.validate()?;
    FgnGenerator::new(p.hurst, p.length)?.generate(p.sigma, p.seed)
}
