//! `deepxi`: statistics, training, enhancement, test-set mixing and WER scoring.
//!
//! Exit status: 0 success, 1 usage error, 2 data or format error, 3 numerical failure.

mod commands;
mod config;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Bad or conflicting arguments (exit status 1).
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Parser, Debug)]
#[command(name = "deepxi", version, about = "A priori SNR estimation and speech enhancement front-end")]
pub struct Cli {
    /// Settings file of `key = value` lines (long flag names as keys).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Seed for every random choice.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; outputs do not depend on this.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Estimate per-bin a priori SNR statistics from clean and noise directories.
    Stats(StatsArgs),
    /// Train a residual LSTM estimator.
    Train(TrainArgs),
    /// Enhance a noisy WAV file.
    Enhance(EnhanceArgs),
    /// Build a test manifest and render its noisy mixtures.
    Mix(MixArgs),
    /// Score hypothesis transcripts against references, per noise and SNR.
    Wer(WerArgs),
}

#[derive(Args, Debug, Clone, Default)]
pub struct SnrRange {
    #[arg(long, allow_hyphen_values = true)]
    pub snr_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub snr_max: Option<f64>,
    #[arg(long)]
    pub snr_step: Option<f64>,
}

#[derive(Args, Debug)]
pub struct StatsArgs {
    #[arg(long)]
    pub clean: PathBuf,
    #[arg(long)]
    pub noise: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub snr: SnrRange,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub clean: PathBuf,
    #[arg(long)]
    pub noise: PathBuf,
    #[arg(long)]
    pub stats: PathBuf,
    #[arg(long)]
    pub model_out: PathBuf,
    /// Per-batch loss as `batch,loss` CSV.
    #[arg(long)]
    pub loss_csv: PathBuf,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learn_rate: Option<f64>,
    #[arg(long)]
    pub cell_size: Option<usize>,
    #[arg(long)]
    pub blocks: Option<usize>,
    /// `uni` or `bi`.
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub clip_norm: Option<f64>,
    #[command(flatten)]
    pub snr: SnrRange,
}

#[derive(Args, Debug)]
pub struct EnhanceArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// `neural`, `dd` or `oracle`.
    #[arg(long)]
    pub estimator: Option<String>,
    /// `srwf`, `wiener` or `mmse-stsa`.
    #[arg(long)]
    pub gain: Option<String>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub stats: Option<PathBuf>,
    /// Clean reference (oracle estimator).
    #[arg(long)]
    pub clean: Option<PathBuf>,
    /// Noise component of the input (oracle estimator).
    #[arg(long)]
    pub noise: Option<PathBuf>,
    /// Debug: apply a gain of 1 everywhere.
    #[arg(long)]
    pub unity_gain: bool,
}

#[derive(Args, Debug)]
pub struct MixArgs {
    #[arg(long)]
    pub clean: PathBuf,
    #[arg(long)]
    pub noise: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Clean files drawn per noise file.
    #[arg(long)]
    pub per_noise: Option<usize>,
    /// Comma-separated SNR levels in dB.
    #[arg(long, allow_hyphen_values = true)]
    pub snr_grid: Option<String>,
    /// Defaults to `<out-dir>/manifest.tsv`.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct WerArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub ref_dir: PathBuf,
    #[arg(long)]
    pub hyp_dir: PathBuf,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        1
    } else if matches!(err.downcast_ref::<deepxi::Error>(), Some(deepxi::Error::Numerical(_))) {
        3
    } else {
        2
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
