use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "shuffle-lab", version, about = "Mixing-time experiments for overhand and Rudvalis shuffles")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Spectral inputs and the resulting lower bounds on the mixing time.
    Bounds(BoundsArgs),
    /// Exact total variation to uniform for t = 0..=t-max.
    ExactTv(ExactTvArgs),
    /// Monte Carlo statistic lower bound on total variation.
    McTv(McTvArgs),
    /// Per-position drift residuals of the cosine function.
    EigenCheck(ModelArgs),
    /// Drift defect δ(k) and its worst-case total ρ̂.
    Defect(ModelArgs),
    /// Closed-form n-step Rudvalis kernel against the n-th kernel power.
    RudvalisVerify(RudvalisArgs),
    /// Mixing-time estimates across deck sizes.
    MixScaling(MixScalingArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelName {
    Overhand,
    CircularOverhand,
    Rudvalis,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ModelArgs {
    #[arg(long, value_enum, default_value = "overhand")]
    pub model: ModelName,
    #[arg(long)]
    pub n: usize,
    /// Cut probability of the overhand models.
    #[arg(long, default_value_t = 0.5)]
    pub p: f64,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct OutputArgs {
    /// Output format; tables default to csv, single records to json.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Write here instead of stdout.
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BoundsArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// "auto" for 1/ln n, or a value in (0, 1).
    #[arg(long, default_value = "auto")]
    pub eps: String,
    /// States sampled for the empirical second moment.
    #[arg(long, default_value_t = 2000)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Use 1.5 times the empirical second moment in place of the analytic R.
    #[arg(long)]
    pub empirical_r: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ExactTvArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 20)]
    pub t_max: u64,
    /// Largest deck size enumerated exactly.
    #[arg(long, default_value_t = 8)]
    pub cap: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct McTvArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 100)]
    pub t_max: u64,
    /// Report every this many steps.
    #[arg(long, default_value_t = 1)]
    pub every: u64,
    #[arg(long, default_value_t = 10_000)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RudvalisArgs {
    #[arg(long)]
    pub n: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MixScalingArgs {
    #[arg(long, value_enum, default_value = "overhand")]
    pub model: ModelName,
    #[arg(long, default_value_t = 0.5)]
    pub p: f64,
    /// Comma-separated deck sizes.
    #[arg(long, value_delimiter = ',', required = true)]
    pub ns: Vec<usize>,
    #[arg(long, default_value_t = 0.25)]
    pub delta: f64,
    /// Step limit per deck size; default 10 n² ln n + 100.
    #[arg(long)]
    pub t_max: Option<u64>,
    #[arg(long, default_value_t = 10_000)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 8)]
    pub cap: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: OutputArgs,
}
