//! Empirical mode decomposition by sifting.
//!
//! A signal is split into intrinsic mode functions (IMFs), ordered from the
//! highest local frequency down, plus a residue:
//! `x = imf_1 + imf_2 + ... + imf_N + residue`.
//!
//! Conventions:
//! - Extrema are strict interior local maxima/minima. A flat run of equal
//!   values counts once, at its midpoint index (rounded down).
//! - Envelopes are natural cubic splines through the extrema, extended at each
//!   end by mirroring the two nearest extrema about the first/last sample.
//! - Sifting stops when the Cauchy-type SD criterion
//!   `sum((h_prev - h)^2) / sum(h_prev^2)` drops below `sd_threshold`, or after
//!   `max_sift_iterations`.
//! - Decomposition stops once the residue has fewer than three extrema, or
//!   when `max_imfs` IMFs have been extracted.

use crate::error::{Error, Result};
use crate::signal::Signal;
use crate::spline::NaturalSpline;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extremum {
    pub index: usize,
    pub value: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Extrema {
    pub maxima: Vec<Extremum>,
    pub minima: Vec<Extremum>,
}

impl Extrema {
    pub fn count(&self) -> usize {
        self.maxima.len() + self.minima.len()
    }
}

/// Upper bound on the number of IMFs extracted by [`emd`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImfLimit {
    /// `floor(log2(N))` for a signal of length `N`.
    #[default]
    Log2Len,
    Fixed(usize),
    Unbounded,
}

impl ImfLimit {
    pub fn resolve(self, n: usize) -> usize {
        match self {
            ImfLimit::Log2Len => (usize::BITS - 1 - n.max(1).leading_zeros()) as usize,
            ImfLimit::Fixed(k) => k,
            ImfLimit::Unbounded => usize::MAX,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SiftConfig {
    pub max_sift_iterations: usize,
    pub sd_threshold: f64,
    pub max_imfs: ImfLimit,
}

impl Default for SiftConfig {
    fn default() -> Self {
        Self {
            max_sift_iterations: 50,
            sd_threshold: 0.2,
            max_imfs: ImfLimit::Log2Len,
        }
    }
}

impl SiftConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_sift_iterations == 0 {
            return Err(Error::InvalidParameter("max_sift_iterations must be at least 1".into()));
        }
        if !(self.sd_threshold.is_finite() && self.sd_threshold > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sd_threshold must be positive, got {}",
                self.sd_threshold
            )));
        }
        if self.max_imfs == ImfLimit::Fixed(0) {
            return Err(Error::InvalidParameter("max_imfs must be positive".into()));
        }
        Ok(())
    }
}

/// IMFs plus residue of one decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct ImfSet {
    pub imfs: Vec<Vec<f64>>,
    pub residue: Vec<f64>,
    pub sample_rate_hz: f64,
}

impl ImfSet {
    pub fn len(&self) -> usize {
        self.imfs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.imfs.is_empty()
    }

    pub fn source_length(&self) -> usize {
        self.residue.len()
    }

    /// Element-wise sum of every IMF and the residue.
    pub fn reconstruct(&self) -> Vec<f64> {
        let mut out = self.residue.clone();
        for imf in &self.imfs {
            for (o, v) in out.iter_mut().zip(imf) {
                *o += v;
            }
        }
        out
    }

    /// Sum of the IMFs at the given zero-based positions.
    pub fn sum_of(&self, indices: &[usize]) -> Vec<f64> {
        let mut out = vec![0.0; self.source_length()];
        for &i in indices {
            for (o, v) in out.iter_mut().zip(&self.imfs[i]) {
                *o += v;
            }
        }
        out
    }

    /// `max|x - reconstruct()| / max|x|`.
    pub fn reconstruction_error(&self, x: &[f64]) -> f64 {
        let scale = x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let err = self
            .reconstruct()
            .iter()
            .zip(x)
            .fold(0.0f64, |a, (r, v)| a.max((r - v).abs()));
        if scale == 0.0 {
            err
        } else {
            err / scale
        }
    }
}

pub fn find_extrema(x: &[f64]) -> Extrema {
    let n = x.len();
    let mut out = Extrema::default();
    let mut i = 1;
    while i + 1 < n {
        if x[i] == x[i - 1] {
            i += 1;
            continue;
        }
        let rising = x[i] > x[i - 1];
        let mut j = i;
        while j + 1 < n && x[j + 1] == x[i] {
            j += 1;
        }
        if j + 1 >= n {
            break;
        }
        let index = (i + j) / 2;
        if rising && x[j + 1] < x[i] {
            out.maxima.push(Extremum { index, value: x[i] });
        } else if !rising && x[j + 1] > x[i] {
            out.minima.push(Extremum { index, value: x[i] });
        }
        i = j + 1;
    }
    out
}

/// Sign changes, with exact zeros bridged (`+, 0, -` is one crossing).
pub fn count_zero_crossings(x: &[f64]) -> usize {
    let mut last = 0.0f64;
    let mut count = 0;
    for &v in x {
        if v == 0.0 {
            continue;
        }
        if last != 0.0 && (v > 0.0) != (last > 0.0) {
            count += 1;
        }
        last = v;
    }
    count
}

/// `|#extrema - #zero crossings| <= 1`.
pub fn satisfies_imf_criterion(x: &[f64]) -> bool {
    let e = find_extrema(x).count() as i64;
    let z = count_zero_crossings(x) as i64;
    (e - z).abs() <= 1
}

/// Mirrors the two nearest extrema about each end sample, then fits a natural
/// cubic spline and samples it at `0..n`.
pub fn spline_envelope(extrema: &[Extremum], n: usize) -> Result<Vec<f64>> {
    if extrema.is_empty() || n == 0 {
        return Err(Error::TooFewExtrema(extrema.len()));
    }
    let last = (n - 1) as f64;
    let take = extrema.len().min(2);
    let mut xs = Vec::with_capacity(extrema.len() + 4);
    let mut ys = Vec::with_capacity(extrema.len() + 4);
    for e in extrema[..take].iter().rev() {
        xs.push(-(e.index as f64));
        ys.push(e.value);
    }
    for e in extrema {
        xs.push(e.index as f64);
        ys.push(e.value);
    }
    for e in extrema[extrema.len() - take..].iter().rev() {
        xs.push(2.0 * last - e.index as f64);
        ys.push(e.value);
    }
    // An extremum sitting on the first or last sample would mirror onto itself.
    let mut kx = Vec::with_capacity(xs.len());
    let mut ky = Vec::with_capacity(ys.len());
    for (x, y) in xs.into_iter().zip(ys) {
        if kx.last().is_some_and(|&p| x <= p) {
            continue;
        }
        kx.push(x);
        ky.push(y);
    }
    if kx.len() < 2 {
        return Err(Error::TooFewExtrema(kx.len()));
    }
    Ok(NaturalSpline::new(kx, ky)?.eval_grid(n))
}

/// `h - (upper + lower) / 2`.
pub fn sift_once(h: &[f64]) -> Result<Vec<f64>> {
    let ex = find_extrema(h);
    if ex.maxima.is_empty() || ex.minima.is_empty() {
        return Err(Error::TooFewExtrema(ex.count()));
    }
    let upper = spline_envelope(&ex.maxima, h.len())?;
    let lower = spline_envelope(&ex.minima, h.len())?;
    Ok(h
        .iter()
        .zip(upper.iter().zip(&lower))
        .map(|(v, (u, l))| v - 0.5 * (u + l))
        .collect())
}

fn sd_change(prev: &[f64], next: &[f64]) -> f64 {
    let num: f64 = prev.iter().zip(next).map(|(a, b)| (a - b) * (a - b)).sum();
    let den: f64 = prev.iter().map(|a| a * a).sum();
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

fn extract_imf(residue: &[f64], cfg: &SiftConfig) -> Vec<f64> {
    let mut h = residue.to_vec();
    for _ in 0..cfg.max_sift_iterations {
        let next = match sift_once(&h) {
            Ok(next) => next,
            Err(_) => break,
        };
        let sd = sd_change(&h, &next);
        h = next;
        if sd < cfg.sd_threshold {
            break;
        }
    }
    h
}

/// Decomposes raw samples; the caller guarantees they are finite.
pub fn emd_samples(x: &[f64], cfg: &SiftConfig) -> (Vec<Vec<f64>>, Vec<f64>) {
    let limit = cfg.max_imfs.resolve(x.len());
    let mut residue = x.to_vec();
    let mut imfs = Vec::new();
    while imfs.len() < limit {
        let ex = find_extrema(&residue);
        if ex.count() < 3 || ex.maxima.is_empty() || ex.minima.is_empty() {
            break;
        }
        let imf = extract_imf(&residue, cfg);
        for (r, v) in residue.iter_mut().zip(&imf) {
            *r -= v;
        }
        imfs.push(imf);
    }
    (imfs, residue)
}

pub fn emd(s: &Signal, cfg: &SiftConfig) -> Result<ImfSet> {
    cfg.validate()?;
    let (imfs, residue) = emd_samples(s.samples(), cfg);
    Ok(ImfSet {
        imfs,
        residue,
        sample_rate_hz: s.sample_rate_hz(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::pearson;
    use std::f64::consts::PI;

    fn sine(n: usize, cycles: f64, amp: f64) -> Vec<f64> {
        (0..n).map(|i| amp * (2.0 * PI * cycles * i as f64 / n as f64).sin()).collect()
    }

    #[test]
    fn extrema_of_one_period() {
        let ex = find_extrema(&sine(1000, 1.0, 1.0));
        assert_eq!(ex.maxima.len(), 1);
        assert_eq!(ex.minima.len(), 1);
        assert_eq!(ex.maxima[0].index, 250);
        assert_eq!(ex.minima[0].index, 750);
    }

    #[test]
    fn ramp_has_no_extrema() {
        let ramp: Vec<f64> = (0..100).map(|i| i as f64 * 0.5).collect();
        assert_eq!(find_extrema(&ramp).count(), 0);
    }

    #[test]
    fn plateau_reports_midpoint_once() {
        let ex = find_extrema(&[0.0, 1.0, 1.0, 0.0]);
        assert_eq!(ex.maxima, vec![Extremum { index: 1, value: 1.0 }]);
        assert!(ex.minima.is_empty());
        let ex = find_extrema(&[3.0, 1.0, 1.0, 1.0, 2.0, 2.0]);
        assert_eq!(ex.minima, vec![Extremum { index: 2, value: 1.0 }]);
        assert!(ex.maxima.is_empty());
    }

    #[test]
    fn edge_plateaus_are_not_extrema() {
        assert_eq!(find_extrema(&[1.0, 1.0, 0.0, -1.0]).count(), 0);
        assert_eq!(find_extrema(&[0.0, 1.0, 2.0, 2.0]).count(), 0);
    }

    #[test]
    fn zero_crossings_bridge_zeros() {
        assert_eq!(count_zero_crossings(&[1.0, 0.0, -1.0, 0.0, 0.0, 2.0]), 2);
        assert_eq!(count_zero_crossings(&[1.0, 0.0, 1.0]), 0);
    }

    #[test]
    fn envelope_hits_knots_and_flat_pairs_stay_flat() {
        let ex = [Extremum { index: 10, value: 2.0 }, Extremum { index: 30, value: 2.0 }];
        let env = spline_envelope(&ex, 41).unwrap();
        assert!(env.iter().all(|v| (v - 2.0).abs() < 1e-9));

        let x: Vec<f64> = (0..300).map(|i| (i as f64 * 0.21).sin() * (1.0 + i as f64 / 100.0)).collect();
        let maxima = find_extrema(&x).maxima;
        let env = spline_envelope(&maxima, x.len()).unwrap();
        for e in &maxima {
            assert!((env[e.index] - e.value).abs() < 1e-9);
        }
    }

    #[test]
    fn envelope_without_extrema_fails() {
        assert_eq!(spline_envelope(&[], 10), Err(Error::TooFewExtrema(0)));
    }

    #[test]
    fn envelope_of_sine_maxima_is_flat_inside() {
        let x = sine(4000, 20.0, 1.0);
        let ex = find_extrema(&x);
        let env = spline_envelope(&ex.maxima, x.len()).unwrap();
        for v in &env[1000..3000] {
            assert!((v - 1.0).abs() < 0.01, "{v}");
        }
    }

    #[test]
    fn sift_leaves_a_sine_alone() {
        let x = sine(4000, 20.0, 1.0);
        let h = sift_once(&x).unwrap();
        let err = x[400..3600]
            .iter()
            .zip(&h[400..3600])
            .fold(0.0f64, |a, (u, v)| a.max((u - v).abs()));
        assert!(err < 0.02, "{err}");
        assert!(sd_change(&x, &h) < SiftConfig::default().sd_threshold);
    }

    #[test]
    fn sift_removes_offset() {
        let c = 5.0;
        let x: Vec<f64> = sine(4000, 20.0, 1.0).iter().map(|v| v + c).collect();
        let h = sift_once(&x).unwrap();
        let m = h.iter().sum::<f64>() / h.len() as f64;
        assert!(m.abs() < 0.01 * c, "{m}");
    }

    #[test]
    fn sift_needs_both_extremum_kinds() {
        let ramp: Vec<f64> = (0..50).map(|i| i as f64).collect();
        assert!(matches!(sift_once(&ramp), Err(Error::TooFewExtrema(_))));
    }

    #[test]
    fn emd_of_sine_is_one_mode() {
        let fs = 1000.0;
        let x: Vec<f64> = (0..2000).map(|i| (2.0 * PI * 20.0 * i as f64 / fs).sin()).collect();
        let set = emd(&Signal::new(x.clone(), fs).unwrap(), &SiftConfig::default()).unwrap();
        assert!(!set.is_empty());
        assert!(pearson(&set.imfs[0], &x) >= 0.99);
        let res_max = set.residue.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        assert!(res_max < 0.05, "{res_max}");
        assert!(set.reconstruction_error(&x) <= 1e-9);
    }

    #[test]
    fn emd_of_ramp_is_all_residue() {
        let x: Vec<f64> = (0..64).map(|i| 0.25 * i as f64 - 3.0).collect();
        let set = emd(&Signal::new(x.clone(), 1.0).unwrap(), &SiftConfig::default()).unwrap();
        assert!(set.is_empty());
        assert_eq!(set.residue, x);
    }

    #[test]
    fn imf_limit_resolves() {
        assert_eq!(ImfLimit::Log2Len.resolve(32768), 15);
        assert_eq!(ImfLimit::Log2Len.resolve(5000), 12);
        assert_eq!(ImfLimit::Fixed(3).resolve(10), 3);
    }

    #[test]
    fn config_validation() {
        let mut c = SiftConfig::default();
        assert!(c.validate().is_ok());
        c.sd_threshold = 0.0;
        assert!(c.validate().is_err());
        c = SiftConfig { max_sift_iterations: 0, ..SiftConfig::default() };
        assert!(c.validate().is_err());
    }
}
