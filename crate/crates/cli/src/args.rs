//! Command-line grammar.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use krigrel::Exponent;

#[derive(Debug, Parser)]
#[command(name = "krigrel", version, about = "Kriging confidence bands and their reliability diagnostics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate a correlation function at one or more lags
    KernelEval(KernelEvalArgs),
    /// Fit a kriging model to data and write it as JSON
    Fit(FitArgs),
    /// Prediction band of a fitted model at new points
    Predict(PredictArgs),
    /// Squared power function of a design, and its supremum over probes
    Power(PowerArgs),
    /// Ratio metric and coverage of a band, or the log-log fit of an (n, E) table
    Reliability(ReliabilityArgs),
    /// Run one of the reference studies
    #[command(subcommand)]
    Experiment(ExperimentCommand),
}

#[derive(Debug, Subcommand)]
pub enum ExperimentCommand {
    /// Fixed test function on grids: the four ratio panels and the rate fit
    Deterministic(Common),
    /// Noisy observations: error and ratio over a sweep of regularization exponents
    Stochastic(Common),
    /// Paths of the model's own GP with true-variance bands
    GpBaseline(Common),
}

/// Flags accepted by every subcommand.
#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// JSON configuration file; flags given on the command line take precedence
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Directory for output files (created atomically)
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Master seed for randomized steps
    #[arg(long, value_name = "U64")]
    pub seed: Option<u64>,
    /// Replace the output directory if it already exists
    #[arg(long)]
    pub overwrite: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Family {
    Matern,
    #[value(alias = "generalized-wendland")]
    Wendland,
}

#[derive(Debug, Clone, Default, Args)]
pub struct KernelArgs {
    /// Correlation family
    #[arg(long, value_enum)]
    pub family: Option<Family>,
    /// Matérn smoothness, must exceed dim/2
    #[arg(long)]
    pub nu: Option<f64>,
    /// Generalized Wendland smoothness parameter
    #[arg(long)]
    pub kappa: Option<f64>,
    /// Generalized Wendland shape parameter
    #[arg(long = "mu-gw", value_name = "MU_GW")]
    pub mu_gw: Option<f64>,
    /// Input dimension
    #[arg(long)]
    pub dim: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MuModeArg {
    Zero,
    PowerLaw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Sigma2ModeArg {
    Mle,
    Constant,
    Unscaled,
}

#[derive(Debug, Clone, Default, Args)]
pub struct FitFlags {
    /// Regularization: none, or mu = c * n^alpha
    #[arg(long, value_enum)]
    pub mu_mode: Option<MuModeArg>,
    /// Constant c of the power-law regularization
    #[arg(long)]
    pub c: Option<f64>,
    /// Exponent alpha of the power-law regularization, below 1
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    /// Variance estimate used for the band
    #[arg(long, value_enum)]
    pub sigma2_mode: Option<Sigma2ModeArg>,
    /// Variance for --sigma2-mode constant
    #[arg(long)]
    pub sigma2_value: Option<f64>,
    /// Band level parameter in (0,1); the band has nominal level 1 - beta
    #[arg(long)]
    pub beta: Option<f64>,
    /// Initial diagonal jitter
    #[arg(long)]
    pub jitter: Option<f64>,
}

#[derive(Debug, Args)]
pub struct KernelEvalArgs {
    #[command(flatten)]
    pub kernel: KernelArgs,
    /// Lag(s) at which to evaluate
    #[arg(long = "r", value_name = "R", required = true, num_args = 1.., allow_negative_numbers = true)]
    pub r: Vec<f64>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// CSV with coordinate columns and a final `y` column
    #[arg(long, value_name = "PATH")]
    pub data: PathBuf,
    #[command(flatten)]
    pub kernel: KernelArgs,
    #[command(flatten)]
    pub fit: FitFlags,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Model file written by `fit`
    #[arg(long, value_name = "PATH")]
    pub model: PathBuf,
    /// CSV of prediction points, one per row
    #[arg(long, value_name = "PATH")]
    pub points: PathBuf,
    /// Override the model's variance estimate
    #[arg(long, value_enum)]
    pub sigma2_mode: Option<Sigma2ModeArg>,
    /// Variance for --sigma2-mode constant
    #[arg(long)]
    pub sigma2_value: Option<f64>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct PowerArgs {
    /// CSV of design points
    #[arg(long, value_name = "PATH", conflicts_with = "grid")]
    pub design: Option<PathBuf>,
    /// Use an n-point grid with endpoints instead of a design file
    #[arg(long, value_name = "N")]
    pub grid: Option<usize>,
    /// CSV of evaluation points; defaults to 512 Halton points plus design midpoints
    #[arg(long, value_name = "PATH")]
    pub points: Option<PathBuf>,
    /// Jitter-free double-double evaluation (Matérn with integer or half-integer nu - dim/2)
    #[arg(long)]
    pub exact: bool,
    /// Initial diagonal jitter for the f64 evaluation
    #[arg(long, conflicts_with = "exact")]
    pub jitter: Option<f64>,
    #[command(flatten)]
    pub kernel: KernelArgs,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TruthFunction {
    /// sin(4x) - 0.02 * Cauchy(x; 1.57, 0.05)
    Gramacy,
}

#[derive(Debug, Args)]
pub struct ReliabilityArgs {
    /// Band CSV as written by `predict`
    #[arg(long, value_name = "PATH", conflicts_with = "table")]
    pub band: Option<PathBuf>,
    /// CSV with a column `f` of true values aligned with the band rows
    #[arg(long, value_name = "PATH", conflicts_with = "function")]
    pub truth: Option<PathBuf>,
    /// Built-in true function evaluated at the band points
    #[arg(long, value_enum)]
    pub function: Option<TruthFunction>,
    /// CSV with columns `n,E` to summarize by a log-log fit
    #[arg(long, value_name = "PATH")]
    pub table: Option<PathBuf>,
    /// Exponent of the ratio metric: a number >= 2 or `inf`
    #[arg(long, default_value = "4", value_parser = parse_exponent)]
    pub p: Exponent,
    #[command(flatten)]
    pub common: Common,
}

fn parse_exponent(s: &str) -> Result<Exponent, String> {
    s.parse::<Exponent>().map_err(|e| e.to_string())
}
