//! Command-line front end: `simulate`, `decompose`, `diagnose`, `compare`.

mod commands;
pub mod io;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::ensemble::{EnsembleConfig, Method};
use crate::mi::{DEFAULT_K, DEFAULT_MI_THRESHOLD};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_INCONCLUSIVE: i32 = 3;
pub const EXIT_INTERNAL: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: u64, message: String },
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: String, source: std::io::Error },
    #[error("ground truth is only available for generated fixtures, not external input")]
    GroundTruthUnavailable,
    #[error(transparent)]
    Library(#[from] crate::Error),
    #[error("internal invariant violated: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Internal(_) => EXIT_INTERNAL,
            _ => EXIT_INPUT,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "npceemd", version, about = "Noise-assisted EMD, MI-based IMF selection and envelope-spectrum diagnosis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic fixture as CSV
    Simulate(SimulateArgs),
    /// Decompose a CSV record into IMFs
    Decompose(DecomposeArgs),
    /// Decompose, select IMFs and look for a defect peak in the envelope spectrum
    Diagnose(DiagnoseArgs),
    /// Compare methods and parameter grids
    Compare(CompareArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Fixture {
    Tone,
    Impulses,
    Combined,
    CombinedNoisy,
    Defect,
    DegradationRun,
}

impl Fixture {
    pub fn name(self) -> &'static str {
        match self {
            Fixture::Tone => "tone",
            Fixture::Impulses => "impulses",
            Fixture::Combined => "combined",
            Fixture::CombinedNoisy => "combined-noisy",
            Fixture::Defect => "defect",
            Fixture::DegradationRun => "degradation-run",
        }
    }

    fn needs_seed(self) -> bool {
        matches!(self, Fixture::CombinedNoisy | Fixture::Defect | Fixture::DegradationRun)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SelectArg {
    Mi,
    Kurtosis,
}

/// Decomposition flags shared by every command that decomposes.
#[derive(Debug, Clone, Args)]
pub struct DecompFlags {
    /// Decomposition method: emd, eemd, ceemd, ceemdan, npceemd
    #[arg(long, default_value = "npceemd")]
    pub method: Method,
    /// Ensemble size Ne
    #[arg(long, default_value_t = EnsembleConfig::DEFAULT_ENSEMBLE_SIZE)]
    pub ensemble: usize,
    /// Hurst exponent of the fGn (npceemd only)
    #[arg(long, default_value_t = EnsembleConfig::DEFAULT_HURST)]
    pub hurst: f64,
    /// Added-noise std as a fraction of the input std
    #[arg(long, default_value_t = EnsembleConfig::DEFAULT_NOISE_SCALE)]
    pub noise_scale: f64,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    pub fixture: Fixture,
    /// Seed for noise and jitter (required for randomized fixtures)
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// SNR of the combined-noisy fixture
    #[arg(long, default_value_t = -30.0, allow_hyphen_values = true)]
    pub snr_db: f64,
    /// Specimens in a degradation run (one per minute)
    #[arg(long, default_value_t = 500)]
    pub specimens: usize,
    /// Minute of the run whose severity the defect fixture uses
    #[arg(long, default_value_t = 440)]
    pub minute: usize,
    /// Explicit severity for the defect fixture, overriding --minute
    #[arg(long)]
    pub severity: Option<f64>,
    /// Std of the additive measurement noise in defect signals
    #[arg(long)]
    pub noise_sigma: Option<f64>,
    /// Sample rate of defect signals (Hz)
    #[arg(long)]
    pub sample_rate: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct DecomposeArgs {
    /// Input CSV (`value` or `time,value` columns)
    pub input: PathBuf,
    #[command(flatten)]
    pub decomp: DecompFlags,
    /// Master seed (required unless --method emd)
    #[arg(long)]
    pub seed: Option<u64>,
    /// Sample rate for `value`-only input (Hz)
    #[arg(long)]
    pub sample_rate: Option<f64>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Check that IMFs plus residue rebuild the input
    #[arg(long)]
    pub verify: bool,
}

#[derive(Debug, Clone, Args)]
pub struct DiagnoseArgs {
    pub input: PathBuf,
    #[command(flatten)]
    pub decomp: DecompFlags,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub sample_rate: Option<f64>,
    /// IMFs with MI above this many nats are kept
    #[arg(long, default_value_t = DEFAULT_MI_THRESHOLD)]
    pub mi_threshold: f64,
    /// Neighbour count of the MI estimator
    #[arg(long, default_value_t = DEFAULT_K)]
    pub k: usize,
    /// IMF selection scheme
    #[arg(long, value_enum, default_value_t = SelectArg::Mi)]
    pub select: SelectArg,
    /// Expected defect frequency (Hz)
    #[arg(long)]
    pub target_hz: Option<f64>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    /// External input CSV (verdict comparison only)
    #[arg(long, conflicts_with = "fixture")]
    pub input: Option<PathBuf>,
    /// Generated fixture with known components
    #[arg(long)]
    pub fixture: Option<Fixture>,
    /// Comma-separated methods; defaults to --method
    #[arg(long, value_delimiter = ',')]
    pub methods: Vec<Method>,
    #[command(flatten)]
    pub decomp: DecompFlags,
    /// Hurst values as start:end:step or a comma list (npceemd rows)
    #[arg(long)]
    pub hurst_grid: Option<String>,
    /// Comma-separated ensemble sizes
    #[arg(long, value_delimiter = ',')]
    pub ensemble_grid: Vec<usize>,
    /// Score against the fixture's known components (default for fixtures)
    #[arg(long)]
    pub ground_truth: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub sample_rate: Option<f64>,
    /// SNR of the combined-noisy fixture
    #[arg(long, default_value_t = -30.0, allow_hyphen_values = true)]
    pub snr_db: f64,
    #[arg(long, default_value_t = DEFAULT_MI_THRESHOLD)]
    pub mi_threshold: f64,
    #[arg(long, default_value_t = DEFAULT_K)]
    pub k: usize,
    #[arg(long, value_enum, default_value_t = SelectArg::Mi)]
    pub select: SelectArg,
    #[arg(long)]
    pub target_hz: Option<f64>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

/// Parses `args` (program name first) and runs the command; returns the
/// process exit code. Messages go to stdout/stderr.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Simulate(a) => commands::simulate(&a),
        Command::Decompose(a) => commands::decompose(&a),
        Command::Diagnose(a) => commands::diagnose(&a),
        Command::Compare(a) => commands::compare(&a),
    }
}
