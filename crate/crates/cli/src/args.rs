use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "robust-ot", version, about = "Outlier-robust Wasserstein distances")]
pub struct Cli {
    /// Report failures as a JSON object on stderr.
    #[arg(long, global = true)]
    pub json_errors: bool,

    /// Worker threads for elbow curves and experiments.
    #[arg(long, global = true, env = "ROBUST_OT_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Robust distance between two measure files.
    Compute(ComputeArgs),
    /// Dual certificate for the robust problem.
    Dual(DualArgs),
    /// Estimate the contamination level from the elbow of the robust curve.
    Elbow(ElbowArgs),
    /// Calibrate the Laplace mechanism of a privacy framework.
    Privacy(PrivacyArgs),
    /// Run a registered experiment.
    Experiment(ExperimentArgs),
    /// Convert a measure between CSV and JSON (chosen by file extension).
    Convert(ConvertArgs),
}

/// Measure files and ground cost shared by the solver subcommands.
#[derive(Debug, Args)]
pub struct Pair {
    /// First measure (`.json`, or `.csv` with header `x1,..,xd,w`).
    pub mu: PathBuf,
    /// Second measure.
    pub nu: PathBuf,
    /// Headerless CSV of ground distances replacing the Euclidean metric.
    #[arg(long, value_name = "FILE")]
    pub distances: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct Radii {
    /// Exponent; a real number at least 1, or `inf`.
    #[arg(long, default_value = "1")]
    pub p: String,
    /// Radius on both sides.
    #[arg(long, conflicts_with_all = ["eps_mu", "eps_nu"])]
    pub eps: Option<f64>,
    #[arg(long)]
    pub eps_mu: Option<f64>,
    #[arg(long)]
    pub eps_nu: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ComputeArgs {
    #[command(flatten)]
    pub pair: Pair,
    #[command(flatten)]
    pub radii: Radii,
    /// Only the first measure may shed mass.
    #[arg(long, conflicts_with_all = ["eps_mu", "eps_nu", "tv_variant"])]
    pub one_sided: bool,
    /// Total-variation balls of radius `eps` instead of mass removal.
    #[arg(long, conflicts_with_all = ["eps_mu", "eps_nu"])]
    pub tv_variant: bool,
    /// Write the optimal coupling as JSON.
    #[arg(long, value_name = "FILE")]
    pub plan_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DualMethod {
    Flow,
    Ascent,
}

#[derive(Debug, Args)]
pub struct DualArgs {
    #[command(flatten)]
    pub pair: Pair,
    #[command(flatten)]
    pub radii: Radii,
    #[arg(long, value_enum, default_value = "flow")]
    pub method: DualMethod,
    /// Iteration cap of the ascent.
    #[arg(long, default_value_t = 100_000)]
    pub max_iters: usize,
    /// Write the certificate `{f, g, penalty, primalPower, gap}` as JSON.
    #[arg(long, value_name = "FILE")]
    pub certificate_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ElbowArgs {
    #[command(flatten)]
    pub pair: Pair,
    #[arg(long, default_value_t = 1.0)]
    pub p: f64,
    /// Largest radius of the grid.
    #[arg(long, default_value_t = 0.5)]
    pub grid_max: f64,
    /// Number of grid intervals.
    #[arg(long, default_value_t = 25)]
    pub grid_steps: usize,
    /// Negative slope separating steep from flat; estimated from the data when absent.
    #[arg(long, allow_negative_numbers = true)]
    pub threshold: Option<f64>,
    /// Directory receiving `elbow.csv` and `elbow.json`.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PrivacyArgs {
    /// Framework JSON: `{"pairs": [..], "epsPriv", "deltaPriv"}`.
    pub framework: PathBuf,
    /// Write the mechanism report here instead of stdout.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Release this value with calibrated noise.
    #[arg(long, requires = "seed", allow_negative_numbers = true)]
    pub release: Option<f64>,
    #[arg(long, requires = "release")]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(long)]
    pub name: String,
    /// Seeds as `a..b` (exclusive), `a..=b`, or a comma list.
    #[arg(long)]
    pub seeds: String,
    /// Output directory for `<name>.csv` and `<name>.json`.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Experiment parameter `key=value`; repeatable.
    #[arg(long = "param", value_name = "KEY=VALUE")]
    pub params: Vec<String>,
    /// Keep records already present in the output CSV.
    #[arg(long)]
    pub resume: bool,
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    pub input: PathBuf,
    pub output: PathBuf,
}
