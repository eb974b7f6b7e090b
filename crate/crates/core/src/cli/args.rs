use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "cogede", version, about = "Coupled generator decomposition of multi-block evoked responses")]
#[command(args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset with known ground truth.
    Synth(SynthArgs),
    /// Fit one model.
    Fit(FitArgs),
    /// Annealed λ grid on train/validation and per-K selection.
    Cv(CvArgs),
    /// K sweep over formulations with test-loss summaries.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Output directory.
    #[arg(short = 'o', long = "out")]
    pub out: PathBuf,
    /// JSON file of flag values; flags given on the command line win.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Also record wall-clock times in output files.
    #[arg(long)]
    pub timings: bool,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 4)]
    pub subjects: usize,
    #[arg(long, default_value_t = 2)]
    pub modalities: usize,
    /// Channels per modality, or one count for all.
    #[arg(long, value_delimiter = ',', default_value = "8,12")]
    pub channels: Vec<usize>,
    #[arg(long, default_value_t = 60)]
    pub timepoints: usize,
    #[arg(long, default_value_t = 3)]
    pub conditions: usize,
    #[arg(long = "k-true", default_value_t = 3)]
    pub k_true: usize,
    /// Signal-to-noise power ratio ("inf" for noiseless).
    #[arg(long, default_value_t = 4.0)]
    pub snr: f64,
    #[arg(long, default_value_t = 0.5)]
    pub heterogeneity: f64,
    /// Leading samples per condition left out of the reconstruction driver.
    #[arg(long, default_value_t = 0)]
    pub prestim: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub common: Common,
}

/// Optimizer settings shared by every fitting command.
#[derive(Debug, Args)]
pub struct Solver {
    #[arg(long, default_value = "pca")]
    pub init: String,
    #[arg(long = "learning-rate", default_value_t = 0.01)]
    pub learning_rate: f64,
    #[arg(long = "max-iters", default_value_t = 20_000)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value_t = 5)]
    pub window: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// spca-qp, spca-sgd or aa.
    #[arg(long, default_value = "spca-sgd")]
    pub method: String,
    #[arg(long = "K")]
    pub k: usize,
    #[arg(long, default_value_t = 0.0)]
    pub l1: f64,
    #[arg(long, default_value_t = 0.0)]
    pub l2: f64,
    /// group, multimodal or mmms; defaults to the manifest's own.
    #[arg(long)]
    pub formulation: Option<String>,
    #[command(flatten)]
    pub solver: Solver,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct Grid {
    /// K values: a list ("2,3,5") or an inclusive range ("2..20").
    #[arg(long = "K", default_value = "2..20")]
    pub k: String,
    #[arg(long = "l1-grid", value_delimiter = ',', default_value = "0,1e-5,1e-4,1e-3,1e-2,1e-1,1")]
    pub l1_grid: Vec<f64>,
    #[arg(long = "l2-grid", value_delimiter = ',', default_value = "0,1e-5,1e-4,1e-3,1e-2,1e-1,1")]
    pub l2_grid: Vec<f64>,
    /// Number of initialization seeds per grid cell.
    #[arg(long, default_value_t = 10)]
    pub seeds: usize,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    /// Reuse finished chains found under <out>/cells.
    #[arg(long)]
    pub resume: bool,
}

#[derive(Debug, Args)]
pub struct CvArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value = "spca-sgd")]
    pub method: String,
    #[arg(long)]
    pub formulation: Option<String>,
    #[command(flatten)]
    pub grid: Grid,
    #[command(flatten)]
    pub solver: Solver,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// One or more engines, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "spca-sgd")]
    pub method: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "group,multimodal,mmms")]
    pub formulations: Vec<String>,
    #[command(flatten)]
    pub grid: Grid,
    #[command(flatten)]
    pub solver: Solver,
    #[command(flatten)]
    pub common: Common,
}
