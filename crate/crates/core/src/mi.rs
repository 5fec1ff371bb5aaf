//! k-nearest-neighbour mutual information (Kraskov–Stögbauer–Grassberger,
//! algorithm 1) and the IMF selection rules built on it.
//!
//! For each point `i` the distance `eps_i` to its k-th neighbour in the joint
//! `(x, y)` space is taken under the max-coordinate metric. `n_x(i)` and
//! `n_y(i)` count the other points strictly closer than `eps_i` in each
//! marginal. Then
//!
//! ```text
//! I(X; Y) = psi(N) + psi(k) - < psi(n_x + 1) + psi(n_y + 1) >
//! ```
//!
//! in nats. Small negative values are estimator bias and are not clamped.

use rayon::prelude::*;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::emd::ImfSet;
use crate::error::{Error, Result};
use crate::noise::{derive_seed, rng_from_seed};
use crate::signal::{kurtosis_of, Signal};

pub const DEFAULT_K: usize = 3;
pub const DEFAULT_MI_THRESHOLD: f64 = 0.1;
/// Longer inputs are decimated by stride before scoring.
pub const MAX_SCORING_POINTS: usize = 20_000;

const JITTER_SEED: u64 = 0x4B53_475F_4A49_5454;
const JITTER_REL: f64 = 1e-10;

/// Digamma function for `x > 0`.
///
/// Shifts `x` up past 10 with `psi(x) = psi(x + 1) - 1/x`, then uses the
/// asymptotic expansion through the `x^-14` term.
pub fn digamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(x));
    }
    Ok(digamma_positive(x))
}

fn digamma_positive(mut x: f64) -> f64 {
    let mut shift = 0.0;
    while x < 10.0 {
        shift -= 1.0 / x;
        x += 1.0;
    }
    let inv2 = 1.0 / (x * x);
    // B_2k / (2k) for k = 1..7
    let series = inv2
        * (1.0 / 12.0
            - inv2
                * (1.0 / 120.0
                    - inv2
                        * (1.0 / 252.0
                            - inv2
                                * (1.0 / 240.0
                                    - inv2 * (1.0 / 132.0 - inv2 * (691.0 / 32760.0 - inv2 / 12.0))))));
    shift + x.ln() - 0.5 / x - series
}

/// Per-point neighbour statistics of the estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighborStats {
    pub radius: f64,
    pub n_x: usize,
    pub n_y: usize,
}

/// Exact k-th neighbour radius and marginal counts for every point.
///
/// Points are swept in `x` order; a sweep stops once the `x` gap alone
/// exceeds the current k-th best joint distance.
pub fn neighbor_stats(x: &[f64], y: &[f64], k: usize) -> Result<Vec<NeighborStats>> {
    let n = x.len();
    if y.len() != n {
        return Err(Error::LengthMismatch { expected: n, got: y.len() });
    }
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    if n <= k + 1 {
        return Err(Error::TooFewSamples { needed: k + 2, got: n });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(a.cmp(&b)));
    let mut rank = vec![0usize; n];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r;
    }
    let xs: Vec<f64> = order.iter().map(|&i| x[i]).collect();
    let ys_by_x: Vec<f64> = order.iter().map(|&i| y[i]).collect();
    let mut ys_sorted = y.to_vec();
    ys_sorted.sort_by(f64::total_cmp);

    Ok((0..n)
        .into_par_iter()
        .map(|i| {
            let radius = kth_radius(&xs, &ys_by_x, rank[i], k);
            NeighborStats {
                radius,
                n_x: count_within(&xs, x[i], radius),
                n_y: count_within(&ys_sorted, y[i], radius),
            }
        })
        .collect())
}

fn kth_radius(xs: &[f64], ys: &[f64], p: usize, k: usize) -> f64 {
    let (x0, y0) = (xs[p], ys[p]);
    // Ascending list of the k smallest distances seen so far.
    let mut best: Vec<f64> = Vec::with_capacity(k + 1);
    let push = |d: f64, best: &mut Vec<f64>| {
        if best.len() == k && d >= best[k - 1] {
            return;
        }
        let at = best.partition_point(|&b| b <= d);
        best.insert(at, d);
        best.truncate(k);
    };
    let (mut lo, mut hi) = (p, p + 1);
    let mut left_open = lo > 0;
    let mut right_open = hi < xs.len();
    while left_open || right_open {
        if left_open {
            let j = lo - 1;
            let dx = (xs[j] - x0).abs();
            if best.len() == k && dx >= best[k - 1] {
                left_open = false;
            } else {
                push(dx.max((ys[j] - y0).abs()), &mut best);
                lo = j;
                left_open = lo > 0;
            }
        }
        if right_open {
            let dx = (xs[hi] - x0).abs();
            if best.len() == k && dx >= best[k - 1] {
                right_open = false;
            } else {
                push(dx.max((ys[hi] - y0).abs()), &mut best);
                hi += 1;
                right_open = hi < xs.len();
            }
        }
    }
    best[k - 1]
}

/// Number of entries of `sorted` (other than `v` itself) with `|s - v| < r`.
///
/// `|fl(s - v)|` is monotone on each side of `v`, so the hits are contiguous.
fn count_within(sorted: &[f64], v: f64, r: f64) -> usize {
    let inside = |s: f64| (s - v).abs() < r;
    let p = sorted.partition_point(|&s| s < v);
    let lo = sorted[..p].partition_point(|&s| !inside(s));
    let hi = p + sorted[p..].partition_point(|&s| inside(s));
    (hi - lo).saturating_sub(1)
}

fn has_ties(v: &[f64]) -> bool {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s.windows(2).any(|w| w[0] == w[1])
}

fn range(v: &[f64]) -> f64 {
    let (lo, hi) = v
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &s| (a.min(s), b.max(s)));
    hi - lo
}

/// Adds a fixed pseudo-random perturbation of `1e-10 * range` when `v` has
/// exactly repeated values.
fn break_ties(v: &[f64]) -> Vec<f64> {
    if !has_ties(v) {
        return v.to_vec();
    }
    let scale = JITTER_REL * range(v);
    let mut rng = rng_from_seed(derive_seed(JITTER_SEED, v.len() as u64, 0));
    v.iter()
        .map(|&s| s + scale * rng.random_range(-1.0..1.0))
        .collect()
}

/// KSG mutual information estimate in nats.
pub fn knn_mutual_information(x: &[f64], y: &[f64], k: usize) -> Result<f64> {
    let n = x.len();
    if y.len() != n {
        return Err(Error::LengthMismatch { expected: n, got: y.len() });
    }
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    if n <= k + 1 {
        return Err(Error::TooFewSamples { needed: k + 2, got: n });
    }
    if range(x) == 0.0 || range(y) == 0.0 {
        return Err(Error::DegenerateData { zero_radius: n, n });
    }
    let xj = break_ties(x);
    let yj = break_ties(y);
    let stats = neighbor_stats(&xj, &yj, k)?;
    let zero_radius = stats.iter().filter(|s| s.radius == 0.0).count();
    if zero_radius * 100 > n {
        return Err(Error::DegenerateData { zero_radius, n });
    }
    let marginal: f64 = stats
        .iter()
        .map(|s| digamma_positive((s.n_x + 1) as f64) + digamma_positive((s.n_y + 1) as f64))
        .sum::<f64>()
        / n as f64;
    Ok(digamma_positive(n as f64) + digamma_positive(k as f64) - marginal)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MiScore {
    /// One-based IMF position.
    pub imf_index: usize,
    pub value_nats: f64,
    pub k: usize,
    /// Set when the IMF was flat or tie-saturated; `value_nats` is then 0.
    pub degenerate: bool,
}

fn decimate(x: &[f64], stride: usize) -> Vec<f64> {
    x.iter().step_by(stride).copied().collect()
}

/// Mutual information between the raw signal and each IMF, in IMF order.
pub fn score_imfs(raw: &Signal, set: &ImfSet, k: usize) -> Result<Vec<MiScore>> {
    let n = raw.len();
    if let Some(bad) = set.imfs.iter().find(|imf| imf.len() != n) {
        return Err(Error::LengthMismatch { expected: n, got: bad.len() });
    }
    let stride = n.div_ceil(MAX_SCORING_POINTS).max(1);
    let raw_d = decimate(raw.samples(), stride);
    set.imfs
        .par_iter()
        .enumerate()
        .map(|(i, imf)| match knn_mutual_information(&raw_d, &decimate(imf, stride), k) {
            Ok(value_nats) => Ok(MiScore {
                imf_index: i + 1,
                value_nats,
                k,
                degenerate: false,
            }),
            Err(Error::DegenerateData { .. }) => Ok(MiScore {
                imf_index: i + 1,
                value_nats: 0.0,
                k,
                degenerate: true,
            }),
            Err(e) => Err(e),
        })
        .collect()
}

/// One-based indices whose score exceeds `threshold`, ascending.
pub fn select_by_mi(scores: &[MiScore], threshold: f64) -> Vec<usize> {
    let mut picked: Vec<usize> = scores
        .iter()
        .filter(|s| !s.degenerate && s.value_nats > threshold)
        .map(|s| s.imf_index)
        .collect();
    picked.sort_unstable();
    picked
}

/// One-based index of the most kurtotic IMF; ties go to the lowest index.
pub fn select_by_kurtosis(set: &ImfSet) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, imf) in set.imfs.iter().enumerate() {
        let Ok(k) = kurtosis_of(imf) else { continue };
        if best.is_none_or(|(_, b)| k > b) {
            best = Some((i + 1, k));
        }
    }
    best.map(|(i, _)| i).ok_or(Error::AllDegenerate)
}

/// Kurtosis of every IMF; `None` where the IMF is flat.
pub fn imf_kurtoses(set: &ImfSet) -> Vec<Option<f64>> {
    set.imfs.iter().map(|imf| kurtosis_of(imf).ok()).collect()
}
