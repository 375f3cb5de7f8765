use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

mod commands;
mod config;

use config::FileConfig;

/// Median-of-means robust binary classification.
///
/// Every subcommand reads its options from flags and, with --config, from the
/// section of a JSON file named after the subcommand; flags win. Exit status
/// is 0 on success, 1 on runtime or numeric errors, 2 on usage errors.
#[derive(Parser, Debug)]
#[command(name = "mom", version)]
struct Cli {
    /// Master seed. Runs with the same seed and inputs are reproducible [default: 0]
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output path. Bench commands treat it as a stem and write <stem>.json and <stem>.csv
    #[arg(long, global = true)]
    output: Option<PathBuf>,

    /// JSON config: optional "seed" and "output", plus one object per subcommand
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic dataset as CSV
    Generate(GenerateArgs),
    /// Fit a classifier on a CSV dataset
    Train(TrainArgs),
    /// Score a CSV dataset with a saved model
    Predict(PredictArgs),
    /// Per-sample selection counts from a training trace
    OutlierScores(OutlierArgs),
    /// MOM vs ERM accuracy on the corrupted toy data
    BenchRobustness(RobustnessArgs),
    /// MOM accuracy across block counts K
    BenchKsweep(KSweepArgs),
    /// Excess-risk decay against sample size
    BenchRates(RatesArgs),
    /// Wall-clock time of every training engine
    BenchTiming(TimingArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataKind {
    /// Two Gaussian classes plus a far outlier cluster labelled positive
    Toy,
    /// Interleaving half-moons
    Moons,
    /// Two overlapping Gaussian classes
    Gaussians,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algo {
    MomLogistic,
    MomHinge,
    ErmLogistic,
    FastKlrMom,
    KlrMomFull,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Gradient {
    /// Sum of the median block's gradients
    Sum,
    /// Mean of the median block's gradients
    Mean,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kernel {
    Linear,
    Rbf,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateKind {
    Moons,
    Gaussians,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
pub struct GenerateArgs {
    /// Dataset family [default: toy]
    #[arg(long, value_enum)]
    pub kind: Option<DataKind>,
    /// Toy inliers [default: 600]
    #[arg(long)]
    pub inliers: Option<usize>,
    /// Toy outliers [default: 30]
    #[arg(long)]
    pub outliers: Option<usize>,
    /// Sample count for moons and gaussians [default: 1000]
    #[arg(long)]
    pub n: Option<usize>,
    /// Moons noise standard deviation [default: 0.3]
    #[arg(long)]
    pub noise: Option<f64>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
pub struct TrainArgs {
    /// Training CSV
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Label column: "last", a zero-based index or a header name [default: last]
    #[arg(long)]
    pub label_col: Option<String>,
    /// Training engine [default: mom-logistic]
    #[arg(long, value_enum)]
    pub algo: Option<Algo>,
    /// Number of blocks K [default: 10]
    #[arg(long)]
    pub k: Option<usize>,
    /// Iterations T [default: 2000 for linear engines, 100 for kernel engines]
    #[arg(long)]
    pub t: Option<usize>,
    /// Initial step size of eta0/(t+1) [default: 0.5 linear, 1.0 kernel]
    #[arg(long)]
    pub eta0: Option<f64>,
    /// Gradient of the median block for MOM linear engines [default: sum]
    #[arg(long, value_enum)]
    pub gradient: Option<Gradient>,
    /// Keep the first partition for all steps instead of redrawing it
    #[arg(long)]
    pub fixed_partition: bool,
    /// Kernel of the kernel engines [default: rbf]
    #[arg(long, value_enum)]
    pub kernel: Option<Kernel>,
    /// RBF gamma [default: 1/p]
    #[arg(long, conflicts_with = "gamma_median")]
    pub gamma: Option<f64>,
    /// Set the RBF gamma to 1/median squared pairwise distance
    #[arg(long)]
    pub gamma_median: bool,
    /// Kernel penalty weight beta [default: 0.001]
    #[arg(long)]
    pub beta: Option<f64>,
    /// Where to write the model JSON (falls back to --output)
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Where to write the per-step median blocks as JSON lines
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
pub struct PredictArgs {
    /// Model JSON written by train
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// CSV to score
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Label column: "last", a zero-based index or a header name [default: last]
    #[arg(long)]
    pub label_col: Option<String>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
pub struct OutlierArgs {
    /// Trace written by train --trace
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Number of training samples (taken from --data when given)
    #[arg(long)]
    pub n: Option<usize>,
    /// Flag samples whose count is below this [default: 1]
    #[arg(long)]
    pub threshold: Option<u64>,
    /// Training CSV; its is_outlier column adds ground truth and precision/recall
    #[arg(long)]
    pub data: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
pub struct RobustnessArgs {
    /// Independent runs [default: 20]
    #[arg(long)]
    pub runs: Option<usize>,
    /// Training inliers [default: 600]
    #[arg(long)]
    pub inliers: Option<usize>,
    /// Training outliers [default: 30]
    #[arg(long)]
    pub outliers: Option<usize>,
    /// Clean test points [default: 500]
    #[arg(long)]
    pub n_test: Option<usize>,
    /// Number of blocks K [default: 120]
    #[arg(long)]
    pub k: Option<usize>,
    /// Iterations T [default: 2000]
    #[arg(long)]
    pub t: Option<usize>,
    /// MOM initial step size [default: 0.5]
    #[arg(long)]
    pub eta0: Option<f64>,
    /// MOM gradient form [default: sum]
    #[arg(long, value_enum)]
    pub gradient: Option<Gradient>,
    /// ERM initial step size [default: 0.5]
    #[arg(long)]
    pub erm_eta0: Option<f64>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
pub struct KSweepArgs {
    /// Comma-separated block counts [default: 1,10,30,60,90,120,200]
    #[arg(long, value_delimiter = ',')]
    pub ks: Option<Vec<usize>>,
    /// Independent runs [default: 20]
    #[arg(long)]
    pub runs: Option<usize>,
    /// Training inliers [default: 600]
    #[arg(long)]
    pub inliers: Option<usize>,
    /// Training outliers [default: 30]
    #[arg(long)]
    pub outliers: Option<usize>,
    /// Clean test points [default: 500]
    #[arg(long)]
    pub n_test: Option<usize>,
    /// Iterations T [default: 2000]
    #[arg(long)]
    pub t: Option<usize>,
    /// Initial step size [default: 0.5]
    #[arg(long)]
    pub eta0: Option<f64>,
    /// Gradient form [default: sum]
    #[arg(long, value_enum)]
    pub gradient: Option<Gradient>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
pub struct RatesArgs {
    /// Data model [default: gaussians]
    #[arg(long, value_enum)]
    pub dataset: Option<RateKind>,
    /// Comma-separated, increasing sample sizes [default: 250,500,1000,2000,4000,8000]
    #[arg(long, value_delimiter = ',')]
    pub ns: Option<Vec<usize>>,
    /// Independent runs [default: 20]
    #[arg(long)]
    pub runs: Option<usize>,
    /// Number of blocks K [default: 5]
    #[arg(long)]
    pub k: Option<usize>,
    /// Iterations T [default: 2000]
    #[arg(long)]
    pub t: Option<usize>,
    /// Initial step size [default: 20]
    #[arg(long)]
    pub eta0: Option<f64>,
    /// Gradient form [default: mean]
    #[arg(long, value_enum)]
    pub gradient: Option<Gradient>,
    /// Test points shared by the learner and the reference [default: 2000000]
    #[arg(long)]
    pub n_test: Option<usize>,
    /// Reference sample size as a multiple of the largest n [default: 10]
    #[arg(long)]
    pub reference_factor: Option<usize>,
    /// Moons noise standard deviation [default: 0.3]
    #[arg(long)]
    pub noise: Option<f64>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
pub struct TimingArgs {
    /// Comma-separated engines [default: all]
    #[arg(long, value_enum, value_delimiter = ',')]
    pub algos: Option<Vec<Algo>>,
    /// Training samples [default: 4000]
    #[arg(long)]
    pub n: Option<usize>,
    /// Number of blocks K [default: 20]
    #[arg(long)]
    pub k: Option<usize>,
    /// Iterations of the linear engines [default: 2000]
    #[arg(long)]
    pub t: Option<usize>,
    /// Iterations of the kernel engines [default: 30]
    #[arg(long)]
    pub kernel_t: Option<usize>,
    /// RBF gamma [default: 0.5]
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Kernel penalty weight beta [default: 0.001]
    #[arg(long)]
    pub beta: Option<f64>,
    /// Test points [default: 1000]
    #[arg(long)]
    pub n_test: Option<usize>,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl From<mom_core::MomError> for CliError {
    fn from(e: mom_core::MomError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

/// Settings shared by every subcommand after merging flags and config.
pub struct Globals {
    pub seed: u64,
    pub output: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let globals = Globals {
        seed: cli.seed.or(file.seed).unwrap_or(0),
        output: cli.output.clone().or_else(|| file.output.clone()),
    };
    match &cli.command {
        Command::Generate(a) => commands::generate(&globals, file.merge("generate", a)?),
        Command::Train(a) => commands::train(&globals, file.merge("train", a)?),
        Command::Predict(a) => commands::predict(&globals, file.merge("predict", a)?),
        Command::OutlierScores(a) => {
            commands::outlier_scores(&globals, file.merge("outlier-scores", a)?)
        }
        Command::BenchRobustness(a) => {
            commands::bench_robustness(&globals, file.merge("bench-robustness", a)?)
        }
        Command::BenchKsweep(a) => commands::bench_ksweep(&globals, file.merge("bench-ksweep", a)?),
        Command::BenchRates(a) => commands::bench_rates(&globals, file.merge("bench-rates", a)?),
        Command::BenchTiming(a) => commands::bench_timing(&globals, file.merge("bench-timing", a)?),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests print and succeed; everything else
            // is a usage error with status 2.
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
