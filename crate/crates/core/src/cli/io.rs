//! CSV ingestion, manifest headers and atomic output files.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::CliError;
use crate::signal::Signal;

/// Relative tolerance on the spacing of a `time` column.
pub const TIME_JITTER_TOL: f64 = 1e-6;

/// Prefix of the manifest line at the top of every CSV output.
pub const MANIFEST_PREFIX: &str = "# manifest: ";

/// Reproducibility record written at the head of every output file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub seed: Option<u64>,
    /// SHA-256 of the input file's bytes.
    pub input_digest: Option<String>,
    /// Command-specific settings: ensemble config, thresholds, fixture parameters.
    pub settings: serde_json::Value,
}

impl RunManifest {
    pub fn new(command: &str, seed: Option<u64>, input_digest: Option<String>, settings: serde_json::Value) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            seed,
            input_digest,
            settings,
        }
    }

    pub fn header_line(&self) -> String {
        format!("{MANIFEST_PREFIX}{}\n", serde_json::to_string(self).expect("manifest serializes"))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// A parsed input record.
#[derive(Debug, Clone)]
pub struct Input {
    pub signal: Signal,
    pub digest: String,
}

fn parse_err(path: &Path, line: u64, message: impl Into<String>) -> CliError {
    CliError::Parse {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

/// Snaps an inferred rate to the nearest integer when it is within the
/// spacing tolerance of one.
fn tidy_rate(rate: f64) -> f64 {
    let r = rate.round();
    if r > 0.0 && ((rate - r) / r).abs() <= TIME_JITTER_TOL {
        r
    } else {
        rate
    }
}

/// Reads a `value` or `time,value` CSV; `#` lines are skipped anywhere.
pub fn read_signal(path: &Path, sample_rate_hz: Option<f64>) -> Result<Input, CliError> {
    let bytes = std::fs::read(path).map_err(|source| CliError::Read {
        path: path.display().to_string(),
        source,
    })?;
    let digest = sha256_hex(&bytes);
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .has_headers(true)
        .flexible(true)
        .from_reader(bytes.as_slice());

    let header_line = rdr.position().line();
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| parse_err(path, e.position().map_or(header_line, |p| p.line()), e.to_string()))?
        .iter()
        .map(|h| h.to_ascii_lowercase())
        .collect();
    let timed = match headers.iter().map(String::as_str).collect::<Vec<_>>().as_slice() {
        ["value"] => false,
        ["time", "value"] => true,
        [] | [""] => return Err(parse_err(path, 1, "no data")),
        other => {
            return Err(parse_err(
                path,
                1,
                format!("expected a 'value' or 'time,value' header, found '{}'", other.join(",")),
            ))
        }
    };
    let width = if timed { 2 } else { 1 };

    let mut times = Vec::new();
    let mut values = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| parse_err(path, e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != width {
            return Err(parse_err(path, line, format!("expected {width} field(s), found {}", rec.len())));
        }
        let num = |s: &str| -> Result<f64, CliError> {
            let v: f64 = s.parse().map_err(|_| parse_err(path, line, format!("'{s}' is not a number")))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(parse_err(path, line, format!("'{s}' is not finite")))
            }
        };
        if timed {
            times.push(num(&rec[0])?);
            values.push(num(&rec[1])?);
        } else {
            values.push(num(&rec[0])?);
        }
    }

    let rate = if timed {
        if times.len() < 2 {
            return Err(parse_err(path, 0, "need at least two samples to infer the sample rate"));
        }
        let dt = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
        if !(dt > 0.0) {
            return Err(parse_err(path, 0, "time column must increase"));
        }
        for (i, w) in times.windows(2).enumerate() {
            if ((w[1] - w[0]) - dt).abs() > TIME_JITTER_TOL * dt {
                return Err(parse_err(
                    path,
                    0,
                    format!("nonuniform time spacing between samples {} and {}", i + 1, i + 2),
                ));
            }
        }
        let inferred = tidy_rate(1.0 / dt);
        if let Some(given) = sample_rate_hz {
            if ((given - inferred) / given).abs() > TIME_JITTER_TOL {
                return Err(CliError::Usage(format!(
                    "--sample-rate {given} disagrees with the time column ({inferred} Hz)"
                )));
            }
        }
        inferred
    } else {
        sample_rate_hz.ok_or_else(|| CliError::Usage("a 'value'-only input needs --sample-rate".into()))?
    };
    let signal = Signal::new(values, rate)?;
    Ok(Input { signal, digest })
}

/// Writes `contents` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let wrap = |source: std::io::Error| CliError::Write {
        path: path.display().to_string(),
        source,
    };
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&dir).map_err(wrap)?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(wrap)?;
    tmp.write_all(contents).map_err(wrap)?;
    tmp.persist(path).map_err(|e| wrap(e.error))?;
    Ok(())
}

/// CSV text: manifest line, header, then rows. Floats use the shortest
/// representation that round-trips.
pub struct CsvDoc {
    buf: String,
}

impl CsvDoc {
    pub fn new(manifest: &RunManifest, columns: &[&str]) -> Self {
        let mut buf = manifest.header_line();
        buf.push_str(&columns.join(","));
        buf.push('\n');
        Self { buf }
    }

    pub fn row<I, D>(&mut self, fields: I)
    where
        I: IntoIterator<Item = D>,
        D: std::fmt::Display,
    {
        let mut first = true;
        for f in fields {
            if !first {
                self.buf.push(',');
            }
            first = false;
            write!(self.buf, "{f}").expect("writing to a String");
        }
        self.buf.push('\n');
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        write_atomic(path, self.buf.as_bytes())
    }
}

/// `{"manifest": ..., <key>: ...}` pretty-printed, newline-terminated.
pub fn write_json<T: Serialize>(path: &Path, manifest: &RunManifest, key: &str, body: &T) -> Result<(), CliError> {
    let mut doc = serde_json::Map::new();
    doc.insert("manifest".into(), serde_json::to_value(manifest).expect("manifest serializes"));
    doc.insert(key.into(), serde_json::to_value(body).map_err(|e| CliError::Internal(e.to_string()))?);
    let mut text = serde_json::to_string_pretty(&serde_json::Value::Object(doc)).expect("json value serializes");
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Writes a signal as `time,value` with `time = k / fs`.
pub fn write_signal(path: &Path, manifest: &RunManifest, s: &Signal) -> Result<(), CliError> {
    write_series(path, manifest, s, |k| k as f64 / s.sample_rate_hz())
}

/// Writes a signal as `time,value` with a caller-supplied time axis.
pub fn write_series(path: &Path, manifest: &RunManifest, s: &Signal, time: impl Fn(usize) -> f64) -> Result<(), CliError> {
    let mut doc = CsvDoc::new(manifest, &["time", "value"]);
    for (k, v) in s.samples().iter().enumerate() {
        doc.row([time(k), *v]);
    }
    doc.write(path)
}
