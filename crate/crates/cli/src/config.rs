//! The run configuration document. Every key is optional; flags win over it.

use std::path::{Path, PathBuf};

use ensdiv::contribution::InterceptMode;
use ensdiv::data::{CsvFormat, PointPolicy, TruthFormat};
use ensdiv::ensemble::WeightScope;
use ensdiv::residuals::{Linkage, MissingPolicy, Pooling};
use ensdiv::skill::{Metric, RhoGrid};
use ensdiv::synthetic::SimConfig;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[clap(rename_all = "snake_case")]
pub enum StrategyName {
    #[default]
    Mean,
    Median,
    ClusterMean,
    InverseError,
    MinVariance,
    CorrelationPenalized,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// When present, must name the subcommand being run.
    pub subcommand: Option<String>,

    pub forecasts: Option<PathBuf>,
    pub truth: Option<PathBuf>,
    pub aligned: Option<PathBuf>,
    pub forecast_format: Option<CsvFormat>,
    pub truth_format: Option<TruthFormat>,
    pub horizons: Option<Vec<u32>>,
    pub locations: Option<Vec<String>>,
    pub point_policy: Option<PointPolicy>,
    pub pooling: Option<Pooling>,

    pub output: Option<PathBuf>,
    pub format: Option<Format>,
    pub seed: Option<u64>,
    pub verbose: Option<bool>,

    pub min_overlap: Option<usize>,
    pub k: Option<usize>,
    pub linkage: Option<Linkage>,
    pub missing_policy: Option<MissingPolicy>,
    pub window: Option<usize>,
    pub step: Option<usize>,

    pub strategy: Option<StrategyName>,
    pub shrinkage: Option<f64>,
    pub gamma: Option<f64>,
    pub nonneg: Option<bool>,
    pub metric: Option<Metric>,
    pub weight_scope: Option<WeightScope>,
    /// Persistence steps for the baseline; 0 or absent matches each forecast's horizon.
    pub baseline_horizon: Option<u32>,
    pub intercept: Option<InterceptMode>,

    pub s: Option<f64>,
    pub n: Option<usize>,
    pub grid: Option<RhoGrid>,
    pub observed: Option<f64>,
    pub annotate: Option<bool>,

    pub simulation: Option<SimConfig>,
    pub reps: Option<usize>,
    pub sweep: Option<Vec<f64>>,
}

impl RunConfig {
    /// Reads a config file; relative paths inside it resolve against its directory.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg: RunConfig = serde_json::from_str(&text).map_err(|source| CliError::ConfigFile {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.forecasts, &mut cfg.truth, &mut cfg.aligned, &mut cfg.output]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }
}

/// Parses a flag value through the same snake_case names the config file uses.
pub fn enum_arg<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.replace('-', "_"))).map_err(|e| e.to_string())
}
