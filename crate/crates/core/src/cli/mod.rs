// SPDX-License-Identifier: MIT OR Apache-2.0

//! `statetrace` command-line front end.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 on data or validation
//! errors. Diagnostics go to standard error; results go to files under
//! `--out`. Log verbosity is read from `STATETRACE_LOG` (default `info`).

mod commands;
mod config;

pub use config::{DetectionSection, RunConfig, SweepSection, SynthSection, TrainSection};

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::evaluation::CovTestMethod;
use crate::synth::Split;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

/// Environment variable holding the log filter.
pub const LOG_ENV: &str = "STATETRACE_LOG";

#[derive(Debug, Parser)]
#[command(
    name = "statetrace",
    version,
    about = "Change-point detection from LSTM prediction errors"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic benchmark (one CSV per subject plus manifest.json).
    Synth(SynthArgs),
    /// Train a forecaster; writes model.json and loss_curve.csv.
    Train(TrainArgs),
    /// Detect change points; writes one report JSON per subject and detections.csv.
    Detect(DetectArgs),
    /// Score reports against ground truth, or sweep (lambda, sigma) with --sweep.
    Eval(EvalArgs),
    /// Test covariance equality between adjacent segments.
    Covtest(CovtestArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// JSON run configuration; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DetectionArgs {
    /// Detection preset: task (sigma 6, lambda 0) or rest (sigma 3, lambda 1).
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Kernel std in samples is kernel-scale / sigma.
    #[arg(long)]
    pub kernel_scale: Option<f64>,
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub strict_peak: bool,
    #[arg(long)]
    pub threshold_on_smoothed: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Train,
    Val,
    Test,
    All,
}

impl SplitArg {
    pub fn to_split(self) -> Option<Split> {
        match self {
            SplitArg::Train => Some(Split::Train),
            SplitArg::Val => Some(Split::Val),
            SplitArg::Test => Some(Split::Test),
            SplitArg::All => None,
        }
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Template preset: task or rest.
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub channels: Option<usize>,
    #[arg(long)]
    pub block_len: Option<usize>,
    #[arg(long)]
    pub jitter: Option<usize>,
    #[arg(long)]
    pub n_train: Option<usize>,
    #[arg(long)]
    pub n_val: Option<usize>,
    #[arg(long)]
    pub n_test: Option<usize>,
    /// Per-channel Gaussian smoothing std in samples.
    #[arg(long)]
    pub smoothing: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Benchmark directory containing manifest.json.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value = "train")]
    pub split: SplitArg,
    /// Architecture preset: desk (2x64) or paper-scale (2x256).
    #[arg(long)]
    pub model_preset: Option<String>,
    /// Hidden sizes, bottom to top, e.g. 64,64.
    #[arg(long, value_delimiter = ',')]
    pub hidden: Option<Vec<usize>>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub bptt_window: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub detection: DetectionArgs,
    #[arg(long)]
    pub model: PathBuf,
    /// Benchmark directory containing manifest.json.
    #[arg(long, conflicts_with = "input")]
    pub data: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "test")]
    pub split: SplitArg,
    /// Individual time-course CSV files; the file stem is the subject id.
    #[arg(long, num_args = 1..)]
    pub input: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub detection: DetectionArgs,
    /// Benchmark directory containing manifest.json.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum)]
    pub split: Option<SplitArg>,
    /// Directory of report JSON files written by `detect`.
    #[arg(long, required_unless_present = "sweep")]
    pub reports: Option<PathBuf>,
    /// Shift ground truth by this many samples before scoring.
    #[arg(long, allow_negative_numbers = true, conflicts_with = "lag_seconds")]
    pub lag_samples: Option<i64>,
    /// Shift ground truth by this many seconds (needs --tr).
    #[arg(long, requires = "tr")]
    pub lag_seconds: Option<f64>,
    /// Sampling interval in seconds.
    #[arg(long)]
    pub tr: Option<f64>,
    /// Sweep (lambda, sigma) on the split with --model instead of scoring reports.
    #[arg(long, requires = "model")]
    pub sweep: bool,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub lambdas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub sigmas: Option<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Asymptotic,
    Permutation,
}

impl From<MethodArg> for CovTestMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Asymptotic => CovTestMethod::Asymptotic,
            MethodArg::Permutation => CovTestMethod::Permutation,
        }
    }
}

#[derive(Debug, Args)]
pub struct CovtestArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Directory of report JSON files; segments are split at their change points.
    #[arg(long, requires = "data", conflicts_with_all = ["input", "cps"])]
    pub reports: Option<PathBuf>,
    /// Benchmark directory with the time courses the reports refer to.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// A single time-course CSV, split at --cps.
    #[arg(long, requires = "cps")]
    pub input: Option<PathBuf>,
    /// 1-based change points for --input.
    #[arg(long, value_delimiter = ',')]
    pub cps: Option<Vec<usize>>,
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    #[arg(long)]
    pub permutations: Option<usize>,
}

fn init_logging() {
    let env = env_logger::Env::new().filter_or(LOG_ENV, "info");
    let _ = env_logger::Builder::from_env(env)
        .target(env_logger::Target::Stderr)
        .format_timestamp(None)
        .try_init();
}

/// Parses `args` (including the program name) and runs the subcommand.
/// Returns the process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    init_logging();
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let informational =
                matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
            let _ = e.print();
            return if informational { EXIT_OK } else { EXIT_USAGE };
        }
    };
    match commands::dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_DATA
        }
    }
}
