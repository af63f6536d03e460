//! `tvsvm`: train, evaluate and verify total variation SVMs.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 data error,
//! 4 numerical failure (divergence or a failed verification).

mod commands;
mod config;
mod error;
mod metrics;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "tvsvm", version, about = "Total variation SVMs with learned virtual support vectors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a model; writes model.json, report.csv and manifest.toml.
    Train(TrainArgs),
    /// Accuracy, per-class accuracy and confusion matrix of a model.
    Eval(EvalArgs),
    /// Compare analytic gradients with finite differences.
    Gradcheck(GradcheckArgs),
    /// Sampled conditional-positive-definiteness check of kernels.
    Kernelcheck(KernelcheckArgs),
    /// Write a synthetic dataset as CSV.
    Synth(SynthArgs),
    /// Turn skeleton sequences into a CSV of chunked descriptors.
    Featurize(FeaturizeArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training CSV (falls back to `data.path` in the config).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Validation CSV, evaluated after every epoch.
    #[arg(long)]
    val: Option<PathBuf>,
    /// TOML config or a manifest from a previous run.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Keep the virtual support vectors at their initial values.
    #[arg(long)]
    freeze_svs: bool,
    /// Comma-separated kernels, e.g. "Gaussian beta=4,Linear".
    #[arg(long)]
    kernels: Option<String>,
    /// Combining-layer widths ending in 1, e.g. "8,1"; "none" for a single
    /// kernel without combination.
    #[arg(long)]
    mkl_layers: Option<String>,
    #[arg(long)]
    n_svs: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Loss weight C.
    #[arg(long)]
    c: Option<f64>,
    /// Initial learning rate.
    #[arg(long)]
    lr0: Option<f64>,
    /// Support-vector initialisation: subsample, kmeans or uniform.
    #[arg(long)]
    init: Option<String>,
    #[arg(long, value_enum)]
    activation: Option<ActivationArg>,
    /// Feature normalisation fitted on the training set: none, minmax or unitsum.
    #[arg(long)]
    normalize: Option<String>,
    /// Print one line per epoch.
    #[arg(long)]
    verbose: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ActivationArg {
    Exact,
    Smoothed,
}

impl From<ActivationArg> for tvsvm::ActivationMode {
    fn from(a: ActivationArg) -> Self {
        match a {
            ActivationArg::Exact => tvsvm::ActivationMode::ExactLeakyRelu,
            ActivationArg::Smoothed => tvsvm::ActivationMode::SmoothedLeakyRelu,
        }
    }
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Comma-separated kernels (default: all twelve families).
    #[arg(long)]
    kernels: Option<String>,
    /// Comma-separated numbers of combining layers.
    #[arg(long, default_value = "1,2,3")]
    mkl_layers: String,
    /// Largest number of virtual support vectors per instance.
    #[arg(long, default_value_t = 5)]
    n_svs: usize,
    /// Instances per (kernel, depth, frozen) combination.
    #[arg(long, default_value_t = 2)]
    trials: usize,
    #[arg(long, value_enum, default_value = "smoothed")]
    mode: ActivationArg,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = tvsvm::gradcheck::DEFAULT_TOLERANCE)]
    tol: f64,
    #[arg(long, hide = true)]
    corrupt_gradient: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ReportFormat {
    Text,
    /// One JSON object per line.
    Records,
}

#[derive(Debug, Args)]
pub struct KernelcheckArgs {
    /// Comma-separated kernels (default: all twelve families).
    #[arg(long)]
    kernels: Option<String>,
    /// Number of random points.
    #[arg(long, default_value_t = 10)]
    points: usize,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    /// Dimension of the random points, drawn uniformly from [0, 1].
    #[arg(long, default_value_t = 3)]
    dim: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value = "text")]
    format: ReportFormat,
    /// Report failures but exit 0.
    #[arg(long)]
    advisory: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Generator {
    TwoMoons,
    XorGaussians,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_enum)]
    generator: Generator,
    #[arg(long, default_value_t = 400)]
    n: usize,
    /// Gaussian noise std (two-moons) or blob spread (xor-gaussians).
    #[arg(long, default_value_t = 0.2)]
    noise: f64,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FeaturizeArgs {
    /// Skeleton JSON file.
    #[arg(long)]
    skeletons: PathBuf,
    /// Temporal chunks per trajectory.
    #[arg(long, default_value_t = tvsvm::skeleton::DEFAULT_CHUNKS)]
    chunks: usize,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Train(a) => commands::train(a),
        Command::Eval(a) => commands::eval(a),
        Command::Gradcheck(a) => commands::gradcheck(a),
        Command::Kernelcheck(a) => commands::kernelcheck(a),
        Command::Synth(a) => commands::synth(a),
        Command::Featurize(a) => commands::featurize(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
