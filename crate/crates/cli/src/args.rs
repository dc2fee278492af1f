use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use ensdiv::contribution::InterceptMode;
use ensdiv::data::PointPolicy;
use ensdiv::ensemble::WeightScope;
use ensdiv::residuals::{Linkage, MissingPolicy, Pooling};
use ensdiv::skill::Metric;

use crate::config::{enum_arg, Format, StrategyName};

/// Error-correlation diagnostics and correlation-aware ensembles for forecast panels.
#[derive(Debug, Parser)]
#[command(name = "ensdiv", version)]
pub struct Cli {
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file (a directory for `simulate` panels); stdout when omitted.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Report rejected rows and other diagnostics on stderr.
    #[arg(long, short, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Align forecasts with truth and emit the residual table.
    Residuals(ResidualsArgs),
    /// Pairwise residual correlations, optional rolling windows and clusters.
    Corr(CorrArgs),
    /// Analytic ensemble skill as a function of error correlation.
    Theory(TheoryArgs),
    /// Build an ensemble and score it and its members against persistence.
    Ensemble(EnsembleArgs),
    /// Per-model contribution report: stand-alone skill, leave-one-out delta, independence.
    Contribution(ContributionArgs),
    /// Synthetic panels, or a Monte Carlo sweep of ensemble skill over ρ.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args, Default)]
pub struct InputArgs {
    /// Hub-style forecast CSV.
    #[arg(long)]
    pub forecasts: Option<PathBuf>,
    /// Truth CSV with location, date and value columns.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Previously aligned table (CSV or JSON residuals output) instead of --forecasts.
    #[arg(long)]
    pub aligned: Option<PathBuf>,
    /// Keep only these horizons (repeatable).
    #[arg(long = "horizon")]
    pub horizons: Vec<u32>,
    /// Keep only these locations (repeatable).
    #[arg(long = "location")]
    pub locations: Vec<String>,
    #[arg(long, value_parser = enum_arg::<PointPolicy>)]
    pub point_policy: Option<PointPolicy>,
}

#[derive(Debug, Args)]
pub struct ResidualsArgs {
    #[command(flatten)]
    pub input: InputArgs,
}

#[derive(Debug, Args)]
pub struct CorrArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_parser = enum_arg::<Pooling>)]
    pub pooling: Option<Pooling>,
    #[arg(long)]
    pub min_overlap: Option<usize>,
    /// Rolling window length in weeks.
    #[arg(long)]
    pub window: Option<usize>,
    /// Rolling step in weeks; defaults to the window length.
    #[arg(long)]
    pub step: Option<usize>,
    /// Number of clusters.
    #[arg(long, short)]
    pub k: Option<usize>,
    #[arg(long, value_parser = enum_arg::<Linkage>)]
    pub linkage: Option<Linkage>,
    #[arg(long, value_parser = enum_arg::<MissingPolicy>)]
    pub missing_policy: Option<MissingPolicy>,
}

#[derive(Debug, Args)]
pub struct TheoryArgs {
    /// Single-model skill.
    #[arg(long, short)]
    pub s: Option<f64>,
    /// Ensemble size.
    #[arg(long, short)]
    pub n: Option<usize>,
    /// Explicit ρ values, comma separated.
    #[arg(long, value_delimiter = ',', conflicts_with_all = ["grid_start", "grid_stop", "grid_points"])]
    pub rho: Vec<f64>,
    #[arg(long)]
    pub grid_start: Option<f64>,
    #[arg(long)]
    pub grid_stop: Option<f64>,
    #[arg(long)]
    pub grid_points: Option<usize>,
    /// Observed ensemble skill to invert into an implied ρ.
    #[arg(long)]
    pub observed: Option<f64>,
    /// Add the published hub reference values to the metadata.
    #[arg(long)]
    pub annotate: bool,
}

#[derive(Debug, Args, Default)]
pub struct StrategyArgs {
    #[arg(long, value_enum)]
    pub strategy: Option<StrategyName>,
    #[arg(long, short)]
    pub k: Option<usize>,
    #[arg(long, value_parser = enum_arg::<Linkage>)]
    pub linkage: Option<Linkage>,
    #[arg(long, value_parser = enum_arg::<MissingPolicy>)]
    pub missing_policy: Option<MissingPolicy>,
    #[arg(long)]
    pub min_overlap: Option<usize>,
    /// Covariance shrinkage λ toward the diagonal.
    #[arg(long)]
    pub shrinkage: Option<f64>,
    /// Correlation penalty γ.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Allow negative minimum-variance weights.
    #[arg(long)]
    pub allow_negative: bool,
    #[arg(long, value_parser = enum_arg::<Metric>)]
    pub metric: Option<Metric>,
    #[arg(long, value_parser = enum_arg::<WeightScope>)]
    pub weight_scope: Option<WeightScope>,
    /// Persistence steps for the baseline; 0 matches each forecast's horizon.
    #[arg(long)]
    pub baseline_horizon: Option<u32>,
}

#[derive(Debug, Args)]
pub struct EnsembleArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub strategy: StrategyArgs,
}

#[derive(Debug, Args)]
pub struct ContributionArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub strategy: StrategyArgs,
    #[arg(long, value_parser = enum_arg::<InterceptMode>)]
    pub intercept: Option<InterceptMode>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Simulation config (JSON); overrides `simulation` in --config.
    #[arg(long)]
    pub sim_config: Option<PathBuf>,
    /// Monte Carlo replications; switches to sweep-table output.
    #[arg(long)]
    pub reps: Option<usize>,
    /// ρ values to sweep, comma separated; requires an equicorrelated config.
    #[arg(long, value_delimiter = ',')]
    pub sweep: Vec<f64>,
    #[command(flatten)]
    pub strategy: StrategyArgs,
}
