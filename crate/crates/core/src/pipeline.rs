//! Decompose, score, select, recombine, demodulate, decide. Also the
//! kurtosis-selection baseline and the separation metric used to compare
//! decomposition methods on fixtures with known components.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::emd::ImfSet;
use crate::ensemble::{decompose, EnsembleConfig, Method};
use crate::error::{Error, Result};
use crate::mi::{imf_kurtoses, score_imfs, select_by_kurtosis, select_by_mi, MiScore, DEFAULT_K, DEFAULT_MI_THRESHOLD};
use crate::signal::{pearson, Signal};
use crate::spectral::{
    detect_defect_peak_with, envelope_of, envelope_spectrum_of, Detection, DetectionThresholds, EnvelopeSpectrum,
    DEFAULT_HARMONICS,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    DefectConfirmed,
    NoDefectEvidence,
    InconclusiveEmptySelection,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::DefectConfirmed => "DEFECT_CONFIRMED",
            Verdict::NoDefectEvidence => "NO_DEFECT_EVIDENCE",
            Verdict::InconclusiveEmptySelection => "INCONCLUSIVE_EMPTY_SELECTION",
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How IMFs are picked for recombination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    /// Every IMF whose MI with the raw signal exceeds the threshold.
    MiThreshold,
    /// The single most kurtotic IMF.
    KurtosisBaseline,
}

impl Selection {
    pub fn as_str(self) -> &'static str {
        match self {
            Selection::MiThreshold => "mi_threshold",
            Selection::KurtosisBaseline => "kurtosis_baseline",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnoseOptions {
    pub mi_threshold: f64,
    pub k: usize,
    pub target_hz: Option<f64>,
    pub n_harmonics: usize,
    pub thresholds: DetectionThresholds,
}

impl Default for DiagnoseOptions {
    fn default() -> Self {
        Self {
            mi_threshold: DEFAULT_MI_THRESHOLD,
            k: DEFAULT_K,
            target_hz: None,
            n_harmonics: DEFAULT_HARMONICS,
            thresholds: DetectionThresholds::default(),
        }
    }
}

impl DiagnoseOptions {
    pub fn with_target(self, target_hz: f64) -> Self {
        Self { target_hz: Some(target_hz), ..self }
    }
}

/// Strongest non-DC bin when no target frequency was given.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DominantPeak {
    pub frequency_hz: f64,
    pub amplitude: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosisReport {
    pub method: Method,
    pub method_variant: Selection,
    pub imf_count: usize,
    pub mi_threshold: f64,
    pub mi_scores: Vec<MiScore>,
    /// Per-IMF kurtosis, `null` for flat IMFs. Filled for the kurtosis baseline.
    pub kurtoses: Option<Vec<Option<f64>>>,
    /// One-based.
    pub selected_indices: Vec<usize>,
    /// One-based.
    pub rejected_indices: Vec<usize>,
    /// SHA-256 over the little-endian bytes of the recombined signal.
    pub combined_signal_digest: String,
    pub defect_frequency_hz: Option<f64>,
    pub detection: Option<Detection>,
    pub dominant_peak: Option<DominantPeak>,
    pub verdict: Verdict,
    pub spectrum: EnvelopeSpectrum,
}

impl DiagnosisReport {
    /// Selected and rejected indices together cover `1..=imf_count` exactly once.
    pub fn partition_holds(&self) -> bool {
        let mut all: Vec<usize> = self
            .selected_indices
            .iter()
            .chain(&self.rejected_indices)
            .copied()
            .collect();
        all.sort_unstable();
        all == (1..=self.imf_count).collect::<Vec<_>>()
    }
}

/// A report together with the intermediate data it was built from.
#[derive(Debug, Clone)]
pub struct Diagnosis {
    pub report: DiagnosisReport,
    pub imfs: ImfSet,
    pub combined: Vec<f64>,
}

impl Diagnosis {
    /// Sum of the IMFs the selection left out.
    pub fn rejected_sum(&self) -> Vec<f64> {
        self.imfs.sum_of(&zero_based(&self.report.rejected_indices))
    }
}

pub fn digest_samples(x: &[f64]) -> String {
    let mut h = Sha256::new();
    for v in x {
        h.update(v.to_le_bytes());
    }
    hex::encode(h.finalize())
}

fn zero_based(indices: &[usize]) -> Vec<usize> {
    indices.iter().map(|i| i - 1).collect()
}

/// Verdict for an arbitrary sequence, as the pipeline would judge the
/// recombined signal.
pub fn judge(
    x: &[f64],
    sample_rate_hz: f64,
    opts: &DiagnoseOptions,
) -> Result<(EnvelopeSpectrum, Option<Detection>, Option<DominantPeak>, bool)> {
    let spectrum = envelope_spectrum_of(x, sample_rate_hz)?;
    let floor = spectrum.median_floor();
    match opts.target_hz {
        Some(target) => {
            let det = detect_defect_peak_with(&spectrum, target, opts.n_harmonics, &opts.thresholds)?;
            let found = det.found;
            Ok((spectrum, Some(det), None, found))
        }
        None => {
            let peak = spectrum.dominant_bin().map(|(b, a)| DominantPeak {
                frequency_hz: spectrum.frequencies_hz[b],
                amplitude: a,
                ratio: if floor > 0.0 { a / floor } else { 0.0 },
            });
            let found = peak.is_some_and(|p| floor > 0.0 && p.amplitude > opts.thresholds.peak_ratio * floor);
            Ok((spectrum, None, peak, found))
        }
    }
}

/// Runs selection and the spectral stage on an existing decomposition.
pub fn diagnose_decomposed(
    raw: &Signal,
    imfs: ImfSet,
    method: Method,
    selection: Selection,
    opts: &DiagnoseOptions,
) -> Result<Diagnosis> {
    if let Some(t) = opts.target_hz {
        let nyquist_hz = raw.sample_rate_hz() / 2.0;
        if t >= nyquist_hz {
            return Err(Error::TargetAboveNyquist { target_hz: t, nyquist_hz });
        }
    }
    let imf_count = imfs.len();
    let mi_scores = score_imfs(raw, &imfs, opts.k)?;
    let (selected_indices, kurtoses) = match selection {
        Selection::MiThreshold => (select_by_mi(&mi_scores, opts.mi_threshold), None),
        Selection::KurtosisBaseline => {
            let picked = match select_by_kurtosis(&imfs) {
                Ok(i) => vec![i],
                Err(Error::AllDegenerate) => Vec::new(),
                Err(e) => return Err(e),
            };
            (picked, Some(imf_kurtoses(&imfs)))
        }
    };
    let rejected_indices = (1..=imf_count).filter(|i| !selected_indices.contains(i)).collect();
    let combined = imfs.sum_of(&zero_based(&selected_indices));
    let (spectrum, detection, dominant_peak, found) = judge(&combined, raw.sample_rate_hz(), opts)?;
    let verdict = if selected_indices.is_empty() {
        Verdict::InconclusiveEmptySelection
    } else if found {
        Verdict::DefectConfirmed
    } else {
        Verdict::NoDefectEvidence
    };
    let report = DiagnosisReport {
        method,
        method_variant: selection,
        imf_count,
        mi_threshold: opts.mi_threshold,
        mi_scores,
        kurtoses,
        selected_indices,
        rejected_indices,
        combined_signal_digest: digest_samples(&combined),
        defect_frequency_hz: opts.target_hz,
        detection,
        dominant_peak,
        verdict,
        spectrum,
    };
    debug_assert!(report.partition_holds());
    Ok(Diagnosis { report, imfs, combined })
}

pub fn run_diagnosis(raw: &Signal, cfg: &EnsembleConfig, selection: Selection, opts: &DiagnoseOptions) -> Result<Diagnosis> {
    let imfs = decompose(raw, cfg)?;
    diagnose_decomposed(raw, imfs, cfg.method, selection, opts)
}

/// Decompose, keep IMFs with MI above the threshold, and judge their sum.
pub fn diagnose(raw: &Signal, cfg: &EnsembleConfig, mi_threshold: f64, target_hz: Option<f64>) -> Result<DiagnosisReport> {
    let opts = DiagnoseOptions { mi_threshold, target_hz, ..Default::default() };
    Ok(run_diagnosis(raw, cfg, Selection::MiThreshold, &opts)?.report)
}

/// Same as [`diagnose`] but keeps only the most kurtotic IMF.
pub fn diagnose_kurtosis_baseline(raw: &Signal, cfg: &EnsembleConfig, target_hz: Option<f64>) -> Result<DiagnosisReport> {
    let opts = DiagnoseOptions { target_hz, ..Default::default() };
    Ok(run_diagnosis(raw, cfg, Selection::KurtosisBaseline, &opts)?.report)
}

/// A known constituent of a synthetic signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub name: String,
    pub samples: Vec<f64>,
    /// Compare envelopes instead of raw samples.
    pub impulsive: bool,
}

impl Component {
    pub fn new(name: impl Into<String>, samples: Vec<f64>, impulsive: bool) -> Self {
        Self { name: name.into(), samples, impulsive }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationScore {
    pub component_name: String,
    /// One-based; 0 when the set has no IMFs.
    pub best_imf_index: usize,
    pub correlation: f64,
    /// `1 - correlation^2`.
    pub leakage: f64,
}

impl SeparationScore {
    fn new(name: &str, best_imf_index: usize, correlation: f64) -> Self {
        Self {
            component_name: name.to_string(),
            best_imf_index,
            correlation,
            leakage: 1.0 - correlation * correlation,
        }
    }
}

fn comparable(c: &Component, x: &[f64]) -> Result<Vec<f64>> {
    if c.impulsive {
        envelope_of(x)
    } else {
        Ok(x.to_vec())
    }
}

fn check_lengths(set: &ImfSet, components: &[Component]) -> Result<()> {
    let n = set.source_length();
    match components.iter().find(|c| c.samples.len() != n) {
        Some(c) => Err(Error::LengthMismatch { expected: n, got: c.samples.len() }),
        None => Ok(()),
    }
}

/// For each component, the single IMF that correlates best with it (by
/// absolute value; ties go to the lower index).
pub fn separation_scores(set: &ImfSet, components: &[Component]) -> Result<Vec<SeparationScore>> {
    check_lengths(set, components)?;
    components
        .iter()
        .map(|c| {
            let truth = comparable(c, &c.samples)?;
            let mut best = SeparationScore::new(&c.name, 0, 0.0);
            for (i, imf) in set.imfs.iter().enumerate() {
                let r = pearson(&truth, &comparable(c, imf)?);
                if best.best_imf_index == 0 || r.abs() > best.correlation.abs() {
                    best = SeparationScore::new(&c.name, i + 1, r);
                }
            }
            Ok(best)
        })
        .collect()
}

/// Best correlation of a component with the sum of any two distinct IMFs,
/// returned as `((i, j), r)` with one-based `i < j`.
pub fn best_pair_correlation(set: &ImfSet, component: &Component) -> Result<Option<((usize, usize), f64)>> {
    check_lengths(set, std::slice::from_ref(component))?;
    let truth = comparable(component, &component.samples)?;
    let mut best: Option<((usize, usize), f64)> = None;
    for i in 0..set.len() {
        for j in i + 1..set.len() {
            let r = pearson(&truth, &comparable(component, &set.sum_of(&[i, j]))?);
            if best.is_none_or(|(_, b)| r.abs() > b.abs()) {
                best = Some(((i + 1, j + 1), r));
            }
        }
    }
    Ok(best)
}

/// Tone and impulse-train components of the combined fixture.
pub fn combined_fixture_components() -> Vec<Component> {
    vec![
        Component::new("tone", crate::simgen::gen_tone().into_samples(), false),
        Component::new("impulses", crate::simgen::gen_impulses().into_samples(), true),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub method: Method,
    pub ensemble_size: usize,
    pub hurst: f64,
    pub noise_scale: f64,
    pub imf_count: usize,
    pub scores: Vec<SeparationScore>,
}

impl ComparisonRow {
    pub fn score(&self, name: &str) -> Option<&SeparationScore> {
        self.scores.iter().find(|s| s.component_name == name)
    }
}

/// Decomposes `raw` once per config and scores each against the components.
pub fn compare_configs(raw: &Signal, configs: &[EnsembleConfig], components: &[Component]) -> Result<Vec<ComparisonRow>> {
    configs
        .iter()
        .map(|cfg| {
            let set = decompose(raw, cfg)?;
            Ok(ComparisonRow {
                method: cfg.method,
                ensemble_size: cfg.ensemble_size,
                hurst: cfg.hurst,
                noise_scale: cfg.noise_scale,
                imf_count: set.len(),
                scores: separation_scores(&set, components)?,
            })
        })
        .collect()
}
