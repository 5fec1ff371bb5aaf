use std::path::{Path, PathBuf};

use serde_json::json;

use super::io::{read_signal, write_json, write_series, write_signal, CsvDoc, RunManifest};
use super::{
    CliError, CompareArgs, DecompFlags, DecomposeArgs, DiagnoseArgs, Fixture, SelectArg, SimulateArgs, EXIT_INCONCLUSIVE,
    EXIT_OK,
};
use crate::emd::ImfSet;
use crate::ensemble::{decompose as run_decomposition, EnsembleConfig, Method};
use crate::pipeline::{
    combined_fixture_components, digest_samples, run_diagnosis, separation_scores, Component, DiagnoseOptions,
    Diagnosis, Selection, Verdict,
};
use crate::signal::{rms, spearman, Signal};
use crate::simgen::{
    fixture_time, gen_combined, gen_defect_signal, gen_degradation_run, gen_impulses, gen_tone, specimen_params,
    DefectSimParams, SeverityLaw,
};

fn config(flags: &DecompFlags, method: Method, seed: Option<u64>) -> Result<EnsembleConfig, CliError> {
    if method != Method::Emd && seed.is_none() {
        return Err(CliError::Usage(format!("--seed is required for {method}")));
    }
    let cfg = EnsembleConfig::new(method, seed.unwrap_or(0))
        .with_ensemble_size(flags.ensemble)
        .with_hurst(flags.hurst)
        .with_noise_scale(flags.noise_scale);
    cfg.validate()?;
    Ok(cfg)
}

fn selection(s: SelectArg) -> Selection {
    match s {
        SelectArg::Mi => Selection::MiThreshold,
        SelectArg::Kurtosis => Selection::KurtosisBaseline,
    }
}

fn announce(path: &Path) {
    println!("wrote {}", path.display());
}

pub fn simulate(a: &SimulateArgs) -> Result<i32, CliError> {
    let name = a.fixture.name();
    if a.fixture.needs_seed() && a.seed.is_none() {
        return Err(CliError::Usage(format!("`simulate {name}` needs --seed")));
    }
    let mut params = DefectSimParams { seed: a.seed.unwrap_or(0), ..Default::default() };
    if let Some(s) = a.noise_sigma {
        params.noise_sigma = s;
    }
    if let Some(fs) = a.sample_rate {
        params.sample_rate_hz = fs;
    }
    params.validate()?;
    let law = SeverityLaw::default();
    let out = &a.out;

    match a.fixture {
        Fixture::Tone | Fixture::Impulses | Fixture::Combined | Fixture::CombinedNoisy => {
            let (signal, settings) = match a.fixture {
                Fixture::Tone => (gen_tone(), json!({ "fixture": name })),
                Fixture::Impulses => (gen_impulses(), json!({ "fixture": name })),
                Fixture::Combined => (gen_combined(None, 0)?, json!({ "fixture": name })),
                _ => (
                    gen_combined(Some(a.snr_db), params.seed)?,
                    json!({ "fixture": name, "snr_db": a.snr_db }),
                ),
            };
            let manifest = RunManifest::new("simulate", a.seed, None, settings);
            let path = out.join(format!("{}.csv", name.replace('-', "_")));
            write_series(&path, &manifest, &signal, fixture_time)?;
            announce(&path);
        }
        Fixture::Defect => {
            if a.minute == 0 {
                return Err(CliError::Usage("--minute counts from 1".into()));
            }
            let severity = a.severity.unwrap_or_else(|| law.at(a.minute as f64));
            let p = specimen_params(&params, a.minute);
            let signal = gen_defect_signal(&p, severity)?;
            let manifest = RunManifest::new(
                "simulate",
                a.seed,
                None,
                json!({ "fixture": name, "params": params, "severity_law": law, "minute": a.minute, "severity": severity }),
            );
            let path = out.join("defect.csv");
            write_signal(&path, &manifest, &signal)?;
            announce(&path);
        }
        Fixture::DegradationRun => {
            if a.specimens == 0 {
                return Err(CliError::Usage("--specimens must be at least 1".into()));
            }
            let run = gen_degradation_run(&params, a.specimens, &law)?;
            let settings = json!({ "fixture": name, "params": params, "severity_law": law, "specimens": a.specimens });
            let manifest = RunManifest::new("simulate", a.seed, None, settings);
            let mut index = CsvDoc::new(&manifest, &["minute", "severity", "rms", "file", "sample_digest"]);
            let mut trend = CsvDoc::new(&manifest, &["minute", "rms"]);
            for (i, (s, sev)) in run.specimens.iter().zip(&run.severities).enumerate() {
                let minute = i + 1;
                let file = format!("specimens/minute_{minute:04}.csv");
                let m = RunManifest::new(
                    "simulate",
                    a.seed,
                    None,
                    json!({ "fixture": "defect", "params": params, "severity_law": law, "minute": minute, "severity": sev }),
                );
                write_signal(&out.join(&file), &m, s)?;
                let r = rms(s);
                index.row([minute.to_string(), sev.to_string(), r.to_string(), file, digest_samples(s.samples())]);
                trend.row([minute as f64, r]);
            }
            let index_path = out.join("index.csv");
            let trend_path = out.join("rms_trend.csv");
            index.write(&index_path)?;
            trend.write(&trend_path)?;
            println!("wrote {} specimens under {}", run.specimens.len(), out.join("specimens").display());
            announce(&index_path);
            announce(&trend_path);
        }
    }
    Ok(EXIT_OK)
}

/// Relative reconstruction tolerance per method; EEMD keeps the residual
/// mean of its added noise, so it has none.
fn reconstruction_tolerance(method: Method) -> Option<f64> {
    match method {
        Method::Emd | Method::Ceemd | Method::Npceemd => Some(1e-9),
        Method::Ceemdan => Some(1e-6),
        Method::Eemd => None,
    }
}

fn write_imfs(path: &Path, manifest: &RunManifest, set: &ImfSet) -> Result<(), CliError> {
    let mut columns: Vec<String> = vec!["time".into()];
    columns.extend((1..=set.len()).map(|i| format!("imf_{i}")));
    columns.push("residue".into());
    let cols: Vec<&str> = columns.iter().map(String::as_str).collect();
    let mut doc = CsvDoc::new(manifest, &cols);
    for k in 0..set.source_length() {
        let mut row = Vec::with_capacity(set.len() + 2);
        row.push(k as f64 / set.sample_rate_hz);
        row.extend(set.imfs.iter().map(|imf| imf[k]));
        row.push(set.residue[k]);
        doc.row(row);
    }
    doc.write(path)
}

pub fn decompose(a: &DecomposeArgs) -> Result<i32, CliError> {
    let cfg = config(&a.decomp, a.decomp.method, a.seed)?;
    let input = read_signal(&a.input, a.sample_rate)?;
    let set = run_decomposition(&input.signal, &cfg)?;
    let error = set.reconstruction_error(input.signal.samples());
    let manifest = RunManifest::new(
        "decompose",
        a.seed,
        Some(input.digest.clone()),
        json!({ "config": cfg, "sample_rate_hz": input.signal.sample_rate_hz() }),
    );
    let imfs_path = a.out.join("imfs.csv");
    write_imfs(&imfs_path, &manifest, &set)?;
    announce(&imfs_path);
    let summary_path = a.out.join("decomposition.json");
    write_json(
        &summary_path,
        &manifest,
        "decomposition",
        &json!({ "method": cfg.method, "imf_count": set.len(), "samples": set.source_length(), "reconstruction_error": error }),
    )?;
    announce(&summary_path);
    println!("{}: {} IMFs from {} samples", cfg.method, set.len(), set.source_length());
    if a.verify {
        println!("max reconstruction error (relative to max|x|): {error:.3e}");
        match reconstruction_tolerance(cfg.method) {
            Some(tol) if !(error <= tol) => {
                return Err(CliError::Internal(format!(
                    "reconstruction error {error:.3e} exceeds {tol:.0e} for {}",
                    cfg.method
                )))
            }
            Some(tol) => println!("verify: ok (tolerance {tol:.0e})"),
            None => println!("verify: {} keeps residual added noise; no tolerance applies", cfg.method),
        }
    }
    Ok(EXIT_OK)
}

fn write_diagnosis(out: &Path, manifest: &RunManifest, d: &Diagnosis) -> Result<Vec<PathBuf>, CliError> {
    let r = &d.report;
    let report_path = out.join("report.json");
    write_json(&report_path, manifest, "report", r)?;

    let spectrum_path = out.join("spectrum.csv");
    let mut spec = CsvDoc::new(manifest, &["frequency_hz", "amplitude"]);
    for (f, a) in r.spectrum.frequencies_hz.iter().zip(&r.spectrum.amplitudes) {
        spec.row([f, a]);
    }
    spec.write(&spectrum_path)?;

    let mi_path = out.join("mi_scores.csv");
    let mut mi = CsvDoc::new(manifest, &["imf_index", "mi_nats", "k", "degenerate", "selected"]);
    for s in &r.mi_scores {
        mi.row([
            s.imf_index.to_string(),
            s.value_nats.to_string(),
            s.k.to_string(),
            s.degenerate.to_string(),
            r.selected_indices.contains(&s.imf_index).to_string(),
        ]);
    }
    mi.write(&mi_path)?;
    Ok(vec![report_path, spectrum_path, mi_path])
}

pub fn diagnose(a: &DiagnoseArgs) -> Result<i32, CliError> {
    let cfg = config(&a.decomp, a.decomp.method, a.seed)?;
    let input = read_signal(&a.input, a.sample_rate)?;
    let opts = DiagnoseOptions {
        mi_threshold: a.mi_threshold,
        k: a.k,
        target_hz: a.target_hz,
        ..Default::default()
    };
    let sel = selection(a.select);
    let d = run_diagnosis(&input.signal, &cfg, sel, &opts)?;
    if !d.report.partition_holds() {
        return Err(CliError::Internal("selected and rejected IMFs do not partition the set".into()));
    }
    let manifest = RunManifest::new(
        "diagnose",
        a.seed,
        Some(input.digest.clone()),
        json!({ "config": cfg, "selection": sel, "options": opts, "sample_rate_hz": input.signal.sample_rate_hz() }),
    );
    for p in write_diagnosis(&a.out, &manifest, &d)? {
        announce(&p);
    }

    let r = &d.report;
    println!("method: {} ({})", r.method, r.method_variant.as_str());
    println!("selected IMFs: {:?} of {}", r.selected_indices, r.imf_count);
    if let Some(det) = &r.detection {
        println!(
            "peak near {:.3} Hz: {:.3} Hz at {:.2}x median, harmonics matched: {}",
            det.target_hz,
            det.peak_frequency_hz,
            det.peak_ratio,
            det.matched_bins.len()
        );
    } else if let Some(p) = &r.dominant_peak {
        println!("dominant peak: {:.3} Hz at {:.2}x median", p.frequency_hz, p.ratio);
    }
    println!("verdict: {}", r.verdict);
    Ok(if r.verdict == Verdict::InconclusiveEmptySelection {
        EXIT_INCONCLUSIVE
    } else {
        EXIT_OK
    })
}

/// `start:end:step` or `a,b,c`.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Usage(format!("cannot parse grid '{spec}'"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
    let parts: Vec<&str> = spec.split(':').collect();
    let values = match parts.as_slice() {
        [start, end, step] => {
            let (start, end, step) = (num(start)?, num(end)?, num(step)?);
            if !(step > 0.0) || end < start {
                return Err(bad());
            }
            let n = ((end - start) / step + 1e-9).floor() as usize + 1;
            (0..n).map(|i| ((start + i as f64 * step) * 1e10).round() / 1e10).collect()
        }
        [list] => list.split(',').map(num).collect::<Result<Vec<_>, _>>()?,
        _ => return Err(bad()),
    };
    if values.is_empty() {
        return Err(bad());
    }
    Ok(values)
}

fn grid_configs(a: &CompareArgs, seed: u64) -> Result<Vec<EnsembleConfig>, CliError> {
    let methods = if a.methods.is_empty() { vec![a.decomp.method] } else { a.methods.clone() };
    let sizes = if a.ensemble_grid.is_empty() { vec![a.decomp.ensemble] } else { a.ensemble_grid.clone() };
    let hursts = match &a.hurst_grid {
        Some(g) => parse_grid(g)?,
        None => vec![a.decomp.hurst],
    };
    let mut out = Vec::new();
    for &m in &methods {
        let sizes: &[usize] = if m == Method::Emd { &sizes[..1] } else { &sizes };
        for &ne in sizes {
            let hs: &[f64] = if m == Method::Npceemd { &hursts } else { &hursts[..1] };
            for &h in hs {
                let flags = DecompFlags { method: m, ensemble: ne, hurst: h, noise_scale: a.decomp.noise_scale };
                out.push(config(&flags, m, Some(seed))?);
            }
        }
    }
    Ok(out)
}

fn fixture_signal(f: Fixture, snr_db: f64, seed: u64) -> Result<(Signal, Vec<Component>), CliError> {
    let mut comps = combined_fixture_components();
    Ok(match f {
        Fixture::Tone => {
            comps.truncate(1);
            (gen_tone(), comps)
        }
        Fixture::Impulses => {
            comps.remove(0);
            (gen_impulses(), comps)
        }
        Fixture::Combined => (gen_combined(None, 0)?, comps),
        Fixture::CombinedNoisy => (gen_combined(Some(snr_db), seed)?, comps),
        Fixture::Defect | Fixture::DegradationRun => {
            return Err(CliError::Usage(format!(
                "fixture '{}' has no separable components; simulate it and pass the file with --input",
                f.name()
            )))
        }
    })
}

/// Text table with right-aligned columns.
fn aligned(header: &[String], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(String::len).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let line = |cells: &[String]| {
        let padded: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect();
        padded.join("  ").trim_end().to_string() + "\n"
    };
    let mut s = line(header);
    for r in rows {
        s.push_str(&line(r));
    }
    s
}

pub fn compare(a: &CompareArgs) -> Result<i32, CliError> {
    let seed = a.seed.ok_or_else(|| CliError::Usage("compare needs --seed".into()))?;
    let configs = grid_configs(a, seed)?;

    let (header, rows, input_digest, source, trend) = match (&a.input, a.fixture) {
        (Some(_), _) if a.ground_truth => return Err(CliError::GroundTruthUnavailable),
        (Some(path), None) => {
            let input = read_signal(path, a.sample_rate)?;
            let opts = DiagnoseOptions { mi_threshold: a.mi_threshold, k: a.k, target_hz: a.target_hz, ..Default::default() };
            let header: Vec<String> = ["method", "ensemble_size", "hurst", "imf_count", "selected", "verdict", "peak_ratio"]
                .map(String::from)
                .to_vec();
            let mut rows = Vec::new();
            for cfg in &configs {
                let d = run_diagnosis(&input.signal, cfg, selection(a.select), &opts)?;
                let r = &d.report;
                let ratio = r
                    .detection
                    .as_ref()
                    .map(|d| d.peak_ratio)
                    .or(r.dominant_peak.map(|p| p.ratio))
                    .unwrap_or(0.0);
                let selected: Vec<String> = r.selected_indices.iter().map(usize::to_string).collect();
                rows.push(vec![
                    cfg.method.to_string(),
                    cfg.ensemble_size.to_string(),
                    cfg.hurst.to_string(),
                    r.imf_count.to_string(),
                    selected.join(" "),
                    r.verdict.to_string(),
                    format!("{ratio:.4}"),
                ]);
            }
            (header, rows, Some(input.digest), json!({ "input": "external" }), None)
        }
        (None, Some(f)) => {
            let (signal, comps) = fixture_signal(f, a.snr_db, seed)?;
            let mut header: Vec<String> = ["method", "ensemble_size", "hurst", "noise_scale", "imf_count"]
                .map(String::from)
                .to_vec();
            for c in &comps {
                for suffix in ["imf", "correlation", "leakage"] {
                    header.push(format!("{}_{suffix}", c.name));
                }
            }
            let mut rows = Vec::new();
            let mut hurst_leak = Vec::new();
            for cfg in &configs {
                let set = run_decomposition(&signal, cfg)?;
                let scores = separation_scores(&set, &comps)?;
                let mut row = vec![
                    cfg.method.to_string(),
                    cfg.ensemble_size.to_string(),
                    cfg.hurst.to_string(),
                    cfg.noise_scale.to_string(),
                    set.len().to_string(),
                ];
                for s in &scores {
                    row.push(s.best_imf_index.to_string());
                    row.push(format!("{:.6}", s.correlation));
                    row.push(format!("{:.6}", s.leakage));
                }
                if cfg.method == Method::Npceemd {
                    if let Some(t) = scores.iter().find(|s| s.component_name == "tone") {
                        hurst_leak.push((cfg.hurst, t.leakage));
                    }
                }
                rows.push(row);
            }
            let distinct_h = {
                let mut h: Vec<f64> = hurst_leak.iter().map(|p| p.0).collect();
                h.dedup();
                h.len()
            };
            let trend = (a.hurst_grid.is_some() && distinct_h >= 3).then(|| {
                let (h, l): (Vec<f64>, Vec<f64>) = hurst_leak.iter().copied().unzip();
                spearman(&h, &l)
            });
            let source = json!({ "fixture": f.name(), "snr_db": (f == Fixture::CombinedNoisy).then_some(a.snr_db) });
            (header, rows, None, source, trend)
        }
        (None, None) => return Err(CliError::Usage("compare needs --fixture or --input".into())),
        (Some(_), Some(_)) => unreachable!("clap rejects --input with --fixture"),
    };

    let manifest = RunManifest::new(
        "compare",
        Some(seed),
        input_digest,
        json!({
            "source": source,
            "configs": configs,
            "selection": selection(a.select),
            "mi_threshold": a.mi_threshold,
            "k": a.k,
            "target_hz": a.target_hz,
        }),
    );
    let cols: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut csv = CsvDoc::new(&manifest, &cols);
    for r in &rows {
        csv.row(r);
    }
    let csv_path = a.out.join("comparison.csv");
    csv.write(&csv_path)?;

    let mut text = manifest.header_line();
    text.push_str(&aligned(&header, &rows));
    if let Some(rho) = trend {
        text.push_str(&format!("spearman(hurst, tone_leakage) = {rho:.4}\n"));
    }
    let txt_path = a.out.join("comparison.txt");
    super::io::write_atomic(&txt_path, text.as_bytes())?;
    print!("{}", &text[text.find('\n').map_or(0, |i| i + 1)..]);
    announce(&csv_path);
    announce(&txt_path);
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids_parse() {
        let g = parse_grid("0.1:0.9:0.1").unwrap();
        assert_eq!(g.len(), 9);
        assert_eq!(g[2], 0.3);
        assert_eq!(g[8], 0.9);
        assert_eq!(parse_grid("0.2,0.7").unwrap(), vec![0.2, 0.7]);
        assert!(parse_grid("1:0:0.1").is_err());
        assert!(parse_grid("a:b").is_err());
    }

    #[test]
    fn table_is_aligned() {
        let t = aligned(
            &["a".into(), "bbb".into()],
            &[vec!["xx".into(), "y".into()], vec!["z".into(), "wwww".into()]],
        );
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines[0], " a   bbb");
        assert_eq!(lines[1], "xx     y");
        assert_eq!(lines[2], " z  wwww");
    }
}
