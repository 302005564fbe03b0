use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;

/// Inductive conformal prediction pipelines.
#[derive(Parser, Debug)]
#[command(name = "icp", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic dataset as CSV.
    Synth(SynthArgs),
    /// Split, fit, calibrate and validate once.
    Run(RunArgs),
    /// Repeat calibration on fresh cal/val draws and compare with the Beta law.
    Trials(TrialsArgs),
    /// Print reports side by side, in argument order.
    Compare(CompareArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum SynthKind {
    Regression,
    Blobs,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum NoiseKind {
    Homoscedastic,
    Heteroscedastic,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long, value_enum, default_value = "regression")]
    kind: SynthKind,
    #[arg(long, default_value_t = 2000)]
    n: usize,
    #[arg(long, value_enum, default_value = "homoscedastic")]
    noise: NoiseKind,
    /// Noise scale for homoscedastic data.
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Number of classes for blobs.
    #[arg(long, default_value_t = 5)]
    classes: usize,
    /// Comma-separated class priors for blobs.
    #[arg(long, value_delimiter = ',')]
    priors: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Default)]
struct PipelineArgs {
    /// JSON pipeline config; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// naive-reg, crf, cqr, naive-cls, class-balanced or aps.
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Split fractions: train,cal,val or train,cal1,cal2,val for crf.
    #[arg(long, value_delimiter = ',')]
    fractions: Option<Vec<f64>>,
    /// CSV input instead of synthetic data.
    #[arg(long, requires = "target")]
    data: Option<PathBuf>,
    /// Target column of the CSV input.
    #[arg(long)]
    target: Option<String>,
    /// Run loops on one thread.
    #[arg(long)]
    sequential: bool,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    pipeline: PipelineArgs,
}

#[derive(Args, Debug)]
struct TrialsArgs {
    #[command(flatten)]
    pipeline: PipelineArgs,
    /// Number of trials (at least 20).
    #[arg(long)]
    trials: Option<usize>,
    /// Compare against simulated Beta draws instead of the exact CDF.
    #[arg(long)]
    two_sample: bool,
}

#[derive(Args, Debug)]
struct CompareArgs {
    /// report.json files.
    #[arg(required = true)]
    reports: Vec<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(args) => commands::synth(&args),
        Command::Run(args) => commands::run(&args),
        Command::Trials(args) => commands::trials(&args),
        Command::Compare(args) => commands::compare(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let line = format!("{err:#}").replace('\n', " ");
            eprintln!("error: {line}");
            ExitCode::FAILURE
        }
    }
}
