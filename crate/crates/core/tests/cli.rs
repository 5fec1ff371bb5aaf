use std::path::Path;
use std::process::{Command, Output};

use npceemd::ensemble::{EnsembleConfig, Method};
use npceemd::pipeline::{run_diagnosis, DiagnoseOptions, Selection};
use npceemd::signal::Signal;

fn npceemd(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_npceemd"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap_or(-1)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Data lines of a CSV output: everything after the manifest and header.
fn data_rows(path: &Path) -> Vec<String> {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# manifest: "));
    lines.next().unwrap();
    lines.map(str::to_string).collect()
}

fn header(path: &Path) -> Vec<String> {
    let text = std::fs::read_to_string(path).unwrap();
    text.lines().nth(1).unwrap().split(',').map(str::to_string).collect()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

fn defect_specimen(dir: &Path) {
    let o = npceemd(dir, &["simulate", "defect", "--seed", "5", "--out", "sim"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn simulate_combined_writes_full_length_record() {
    let dir = tempfile::tempdir().unwrap();
    let o = npceemd(dir.path(), &["simulate", "combined", "--out", "sim"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let p = dir.path().join("sim/combined.csv");
    assert_eq!(header(&p), ["time", "value"]);
    assert_eq!(data_rows(&p).len(), 32768);
}

#[test]
fn simulate_tone_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    for out in ["a", "b"] {
        assert_eq!(code(&npceemd(dir.path(), &["simulate", "tone", "--out", out])), 0);
    }
    let a = std::fs::read(dir.path().join("a/tone.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b/tone.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn randomized_fixture_requires_seed() {
    let dir = tempfile::tempdir().unwrap();
    let o = npceemd(dir.path(), &["simulate", "combined-noisy"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn degradation_run_writes_every_specimen() {
    let dir = tempfile::tempdir().unwrap();
    let o = npceemd(dir.path(), &["simulate", "degradation-run", "--seed", "3", "--out", "run"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let run = dir.path().join("run");
    assert_eq!(std::fs::read_dir(run.join("specimens")).unwrap().count(), 500);
    assert!(run.join("specimens/minute_0001.csv").exists());
    assert!(run.join("specimens/minute_0500.csv").exists());
    assert_eq!(data_rows(&run.join("rms_trend.csv")).len(), 500);
    assert_eq!(header(&run.join("index.csv")), ["minute", "severity", "rms", "file", "sample_digest"]);
}

#[test]
fn decompose_writes_imfs_and_residue() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&npceemd(dir.path(), &["simulate", "combined", "--out", "sim"])), 0);
    let o = npceemd(
        dir.path(),
        &["decompose", "sim/combined.csv", "--method", "npceemd", "--seed", "1", "--out", "dec"],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let cols = header(&dir.path().join("dec/imfs.csv"));
    assert_eq!(cols.first().unwrap(), "time");
    assert_eq!(cols.last().unwrap(), "residue");
    assert!(cols.len() - 2 >= 4, "{cols:?}");
    let summary = json(&dir.path().join("dec/decomposition.json"));
    assert_eq!(summary["decomposition"]["imf_count"].as_u64().unwrap() as usize, cols.len() - 2);
}

#[test]
fn decompose_verify_passes_for_emd() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&npceemd(dir.path(), &["simulate", "combined", "--out", "sim"])), 0);
    let o = npceemd(dir.path(), &["decompose", "sim/combined.csv", "--method", "emd", "--verify", "--out", "dec"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("verify: ok"));
}

#[test]
fn ensemble_method_without_seed_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&npceemd(dir.path(), &["simulate", "tone", "--out", "sim"])), 0);
    let o = npceemd(dir.path(), &["decompose", "sim/tone.csv", "--method", "eemd"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn malformed_csv_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.csv"), "value\n1\n2\n3\nnope\n5\n").unwrap();
    let o = npceemd(dir.path(), &["decompose", "bad.csv", "--method", "emd", "--sample-rate", "100"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("bad.csv:5"), "{}", stderr(&o));
}

#[test]
fn missing_input_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let o = npceemd(dir.path(), &["diagnose", "absent.csv", "--seed", "1"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("absent.csv"), "{}", stderr(&o));
}

#[test]
fn diagnose_confirms_simulated_defect() {
    let dir = tempfile::tempdir().unwrap();
    defect_specimen(dir.path());
    let o = npceemd(
        dir.path(),
        &["diagnose", "sim/defect.csv", "--seed", "9", "--target-hz", "66.6667", "--out", "diag"],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report = json(&dir.path().join("diag/report.json"));
    assert_eq!(report["report"]["verdict"], "DEFECT_CONFIRMED");
    assert_eq!(header(&dir.path().join("diag/spectrum.csv")), ["frequency_hz", "amplitude"]);
    assert_eq!(
        header(&dir.path().join("diag/mi_scores.csv")),
        ["imf_index", "mi_nats", "k", "degenerate", "selected"]
    );
}

#[test]
fn kurtosis_selection_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    defect_specimen(dir.path());
    let o = npceemd(
        dir.path(),
        &["diagnose", "sim/defect.csv", "--method", "eemd", "--seed", "9", "--select", "kurtosis", "--out", "diag"],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report = json(&dir.path().join("diag/report.json"));

    let rows = data_rows(&dir.path().join("sim/defect.csv"));
    let values: Vec<f64> = rows.iter().map(|r| r.split(',').nth(1).unwrap().parse().unwrap()).collect();
    let raw = Signal::new(values, 10_000.0).unwrap();
    let d = run_diagnosis(
        &raw,
        &EnsembleConfig::new(Method::Eemd, 9),
        Selection::KurtosisBaseline,
        &DiagnoseOptions::default(),
    )
    .unwrap();
    let selected: Vec<usize> = serde_json::from_value(report["report"]["selected_indices"].clone()).unwrap();
    assert_eq!(selected, d.report.selected_indices);
    assert_eq!(report["report"]["verdict"], d.report.verdict.as_str());
    assert_eq!(report["report"]["combined_signal_digest"], d.report.combined_signal_digest);
}

#[test]
fn empty_selection_exits_inconclusive() {
    let dir = tempfile::tempdir().unwrap();
    defect_specimen(dir.path());
    let o = npceemd(
        dir.path(),
        &["diagnose", "sim/defect.csv", "--seed", "9", "--mi-threshold", "100", "--out", "diag"],
    );
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    let report = json(&dir.path().join("diag/report.json"));
    assert_eq!(report["report"]["verdict"], "INCONCLUSIVE_EMPTY_SELECTION");
}

#[test]
fn compare_fixture_tables() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = npceemd(
        d,
        &["compare", "--fixture", "combined", "--methods", "emd,eemd,ceemd,ceemdan,npceemd", "--seed", "1", "--out", "all"],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(data_rows(&d.join("all/comparison.csv")).len(), 5);
    assert!(d.join("all/comparison.txt").exists());

    let o = npceemd(
        d,
        &["compare", "--fixture", "combined", "--methods", "npceemd", "--hurst-grid", "0.1:0.9:0.1", "--seed", "1", "--out", "h"],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(data_rows(&d.join("h/comparison.csv")).len(), 9);
    assert!(std::fs::read_to_string(d.join("h/comparison.txt")).unwrap().contains("spearman(hurst, tone_leakage)"));

    let o = npceemd(
        d,
        &["compare", "--fixture", "combined", "--methods", "eemd", "--ensemble-grid", "10,20", "--seed", "1", "--out", "ne"],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(data_rows(&d.join("ne/comparison.csv")).len(), 2);
}

#[test]
fn ground_truth_needs_a_fixture() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&npceemd(dir.path(), &["simulate", "tone", "--out", "sim"])), 0);
    let o = npceemd(dir.path(), &["compare", "--input", "sim/tone.csv", "--ground-truth", "--seed", "1"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("ground truth"), "{}", stderr(&o));
}
