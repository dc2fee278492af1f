//! Synthetic truth and correlated forecast panels with known parameters.
//!
//! Every random quantity comes from its own ChaCha8 stream under the config
//! seed (truth, shared factors, one stream per model), so output does not
//! depend on thread scheduling.

use chrono::{Duration, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{AlignedPair, AlignedPanel, ForecastKind, ForecastPanel, ForecastRecord, TruthSeries, TruthTable};
use crate::ensemble::{build_ensemble, Strategy, WeightScope};
use crate::error::{Error, Result};
use crate::num::Scalar;
use crate::skill::{evaluate_skill, psd_lower_bound, skill, BaselineHorizon, Metric};

const TRUTH_STREAM: u64 = 0;
const COMMON_STREAM: u64 = 1;
const BLOCK_STREAM: u64 = 2;
const MODEL_STREAM: u64 = 1 << 32;
const REP_STREAM: u64 = 1 << 33;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CorrelationStructure {
    Equicorrelated { rho: f64 },
    /// Models split into `blocks` contiguous groups, of near-equal size
    /// unless `sizes` lists them explicitly.
    Block {
        blocks: usize,
        within: f64,
        between: f64,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        sizes: Vec<usize>,
    },
}

/// Error scale given directly or solved from a target single-model MSE-skill.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorScale {
    Sigma(f64),
    /// Sets σ² = s·E0 where E0 is the persistence MSE on the generated truth.
    /// Bias adds to the realized error on top of this.
    TargetSkill(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TruthProcess {
    RandomWalk {
        #[serde(default = "default_level")]
        start: f64,
        step_sd: f64,
    },
    Seasonal {
        #[serde(default = "default_level")]
        level: f64,
        amplitude: f64,
        period: usize,
    },
    Constant { value: f64 },
}

fn default_level() -> f64 {
    100.0
}

fn default_horizon() -> u32 {
    1
}

fn default_start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2020, 1, 4).expect("valid date")
}

fn default_location() -> String {
    "synthetic".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub models: usize,
    pub dates: usize,
    pub correlation: CorrelationStructure,
    pub error: ErrorScale,
    /// Per-model additive bias; empty means unbiased.
    #[serde(default)]
    pub bias: Vec<f64>,
    pub truth: TruthProcess,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_horizon")]
    pub horizon: u32,
    #[serde(default = "default_start")]
    pub start_date: NaiveDate,
    #[serde(default = "default_location")]
    pub location: String,
}

impl SimConfig {
    /// Unbiased equicorrelated models over a random-walk truth.
    pub fn equicorrelated(models: usize, dates: usize, rho: f64, error: ErrorScale, seed: u64) -> Self {
        Self {
            models,
            dates,
            correlation: CorrelationStructure::Equicorrelated { rho },
            error,
            bias: Vec::new(),
            truth: TruthProcess::RandomWalk {
                start: default_level(),
                step_sd: 1.0,
            },
            seed,
            horizon: 1,
            start_date: default_start(),
            location: default_location(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::param(msg));
        if self.models == 0 {
            return bad("at least one model is required".into());
        }
        if self.dates < 2 {
            return bad(format!("at least two dates are required, got {}", self.dates));
        }
        if self.horizon == 0 || self.horizon as usize >= self.dates {
            return bad(format!("horizon {} must lie in 1..{}", self.horizon, self.dates));
        }
        if !self.bias.is_empty() && self.bias.len() != self.models {
            return bad(format!("{} biases given for {} models", self.bias.len(), self.models));
        }
        if self.bias.iter().any(|b| !b.is_finite()) {
            return bad("biases must be finite".into());
        }
        match self.error {
            ErrorScale::Sigma(s) | ErrorScale::TargetSkill(s) if !(s.is_finite() && s > 0.0) => {
                return bad(format!("error scale must be positive, got {s}"));
            }
            _ => {}
        }
        match self.correlation {
            CorrelationStructure::Equicorrelated { rho } => {
                let lower = if self.models > 1 { psd_lower_bound::<f64>(self.models) } else { -1.0 };
                if !(rho >= lower && rho <= 1.0) {
                    return Err(Error::OutOfRange {
                        value: rho,
                        lower,
                        upper: 1.0,
                    });
                }
            }
            CorrelationStructure::Block {
                blocks,
                within,
                between,
                ref sizes,
            } => {
                if blocks == 0 || blocks > self.models {
                    return bad(format!("{blocks} blocks for {} models", self.models));
                }
                if !sizes.is_empty()
                    && (sizes.len() != blocks || sizes.contains(&0) || sizes.iter().sum::<usize>() != self.models)
                {
                    return bad(format!("block sizes {sizes:?} do not partition {} models into {blocks} blocks", self.models));
                }
                if !(0.0..=1.0).contains(&between) || !(between..=1.0).contains(&within) {
                    return bad(format!("block correlations need 0 <= between <= within <= 1, got {between}, {within}"));
                }
            }
        }
        match self.truth {
            TruthProcess::RandomWalk { start, step_sd } if !(start.is_finite() && step_sd.is_finite() && step_sd >= 0.0) => {
                bad("random walk needs a finite start and nonnegative step_sd".into())
            }
            TruthProcess::Seasonal { level, amplitude, period } if period == 0 || !(level.is_finite() && amplitude.is_finite()) => {
                bad("seasonal truth needs a positive period and finite level and amplitude".into())
            }
            TruthProcess::Constant { value } if !value.is_finite() => bad("constant truth must be finite".into()),
            _ => Ok(()),
        }
    }

    pub fn model_ids(&self) -> Vec<String> {
        let width = (self.models.max(2) - 1).to_string().len();
        (0..self.models).map(|i| format!("model_{i:0width$}")).collect()
    }

    /// Block label of each model; all zero for equicorrelated structures.
    pub fn blocks(&self) -> Vec<usize> {
        match self.correlation {
            CorrelationStructure::Equicorrelated { .. } => vec![0; self.models],
            CorrelationStructure::Block { blocks, ref sizes, .. } if sizes.is_empty() => {
                (0..self.models).map(|i| i * blocks / self.models).collect()
            }
            CorrelationStructure::Block { ref sizes, .. } => {
                sizes.iter().enumerate().flat_map(|(b, &n)| std::iter::repeat_n(b, n)).collect()
            }
        }
    }

    pub fn target_date(&self, t: usize) -> NaiveDate {
        self.start_date + Duration::weeks(t as i64)
    }

    /// The same configuration but with a different seed.
    pub fn reseeded(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn normals(seed: u64, id: u64, n: usize) -> Vec<f64> {
    let mut rng = stream(seed, id);
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTruth<F = f64> {
    pub series: TruthSeries<F>,
    /// Points raised to 0 by the nonnegativity floor.
    pub floored: usize,
}

impl<F: Scalar> SyntheticTruth<F> {
    pub fn table(&self) -> TruthTable<F> {
        std::iter::once(self.series.clone()).collect()
    }
}

fn truth_values(config: &SimConfig) -> (Vec<f64>, usize) {
    let t_len = config.dates;
    let mut floored = 0;
    let mut floor = |v: f64| {
        if v < 0.0 {
            floored += 1;
            0.0
        } else {
            v
        }
    };
    let values = match config.truth {
        TruthProcess::Constant { value } => (0..t_len).map(|_| floor(value)).collect(),
        TruthProcess::Seasonal { level, amplitude, period } => (0..t_len)
            .map(|t| {
                let phase = (t % period) as f64 / period as f64;
                floor(level + amplitude * (std::f64::consts::TAU * phase).sin())
            })
            .collect(),
        TruthProcess::RandomWalk { start, step_sd } => {
            let steps = normals(config.seed, TRUTH_STREAM, t_len);
            let mut x = floor(start);
            let mut out = Vec::with_capacity(t_len);
            out.push(x);
            for z in &steps[1..] {
                x = floor(x + step_sd * z);
                out.push(x);
            }
            out
        }
    };
    (values, floored)
}

pub fn gen_truth<F: Scalar>(config: &SimConfig) -> Result<SyntheticTruth<F>> {
    config.validate()?;
    let (values, floored) = truth_values(config);
    let values: Vec<F> = values.into_iter().map(F::lit).collect();
    Ok(SyntheticTruth {
        series: TruthSeries::weekly(config.location.clone(), config.start_date, &values)?,
        floored,
    })
}

fn persistence_mse(truth: &[f64], horizon: usize) -> f64 {
    let d: Vec<f64> = truth.windows(horizon + 1).map(|w| w[0] - w[horizon]).collect();
    d.iter().map(|v| v * v).sum::<f64>() / d.len() as f64
}

/// Unit-variance correlated errors, one row per model.
fn unit_errors(config: &SimConfig, t_len: usize) -> Vec<Vec<f64>> {
    let n = config.models;
    let own: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| normals(config.seed, MODEL_STREAM + i as u64, t_len))
        .collect();
    match config.correlation {
        CorrelationStructure::Equicorrelated { rho } if rho >= 0.0 => {
            let z = normals(config.seed, COMMON_STREAM, t_len);
            let (a, b) = (rho.sqrt(), (1.0 - rho).sqrt());
            own.into_iter()
                .map(|u| z.iter().zip(&u).map(|(z, u)| a * z + b * u).collect())
                .collect()
        }
        CorrelationStructure::Equicorrelated { rho } => {
            // a·u_i + b·ū has unit variance and pairwise correlation ρ.
            let a = (1.0 - rho).sqrt();
            let b = -a + (a * a + n as f64 * rho).max(0.0).sqrt();
            let ubar: Vec<f64> = (0..t_len).map(|t| own.iter().map(|u| u[t]).sum::<f64>() / n as f64).collect();
            own.into_iter()
                .map(|u| u.iter().zip(&ubar).map(|(u, m)| a * u + b * m).collect())
                .collect()
        }
        CorrelationStructure::Block {
            blocks, within, between, ..
        } => {
            let z = normals(config.seed, COMMON_STREAM, t_len);
            let zb: Vec<Vec<f64>> = (0..blocks).map(|b| normals(config.seed, BLOCK_STREAM + b as u64, t_len)).collect();
            let (cs, bs, us) = (between.sqrt(), (within - between).sqrt(), (1.0 - within).sqrt());
            own.into_iter()
                .zip(config.blocks())
                .map(|(u, b)| (0..t_len).map(|t| cs * z[t] + bs * zb[b][t] + us * u[t]).collect())
                .collect()
        }
    }
}

/// Generated forecasts with the parameters that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticPanel<F = f64> {
    pub forecasts: ForecastPanel<F>,
    pub config: SimConfig,
    pub sigma: f64,
    pub blocks: Vec<usize>,
    /// Forecast values raised to 0 by the nonnegativity floor.
    pub floored: usize,
    /// Error draws `bias_i + e_i(t)` before flooring, one row per model.
    pub errors: Vec<Vec<f64>>,
}

impl<F: Scalar> SyntheticPanel<F> {
    /// The panel joined to its truth, skipping the forecast-data round trip.
    pub fn aligned(&self, truth: &TruthSeries<F>) -> AlignedPanel<F> {
        let mut panel = AlignedPanel::new();
        for (model, records) in self.forecasts.iter() {
            for r in records {
                if let Some(observed) = truth.get(r.target_date) {
                    panel.insert(
                        model.to_string(),
                        r.key(),
                        AlignedPair {
                            forecast: r.value,
                            observed,
                        },
                    );
                }
            }
        }
        panel
    }
}

/// Forecasts `truth(t) + bias_i + e_i(t)`, floored at 0, for every date of `truth`.
pub fn gen_forecast_panel<F: Scalar>(truth: &TruthSeries<F>, config: &SimConfig) -> Result<SyntheticPanel<F>> {
    config.validate()?;
    let obs: Vec<f64> = truth.observations().iter().map(|(_, v)| v.as_f64()).collect();
    let t_len = obs.len();
    let h = config.horizon as usize;
    if t_len <= h {
        return Err(Error::EmptySeries("truth series no longer than the forecast horizon"));
    }
    let sigma = match config.error {
        ErrorScale::Sigma(s) => s,
        ErrorScale::TargetSkill(s) => {
            let e0 = persistence_mse(&obs, h);
            if e0 == 0.0 {
                return Err(Error::UndefinedSkill);
            }
            (s * e0).sqrt()
        }
    };
    let mut errors = unit_errors(config, t_len);
    let ids = config.model_ids();
    let mut forecasts = ForecastPanel::default();
    let mut floored = 0;
    for (i, row) in errors.iter_mut().enumerate() {
        let bias = config.bias.get(i).copied().unwrap_or(0.0);
        for (t, e) in row.iter_mut().enumerate() {
            *e = bias + sigma * *e;
            let mut value = obs[t] + *e;
            if value < 0.0 {
                floored += 1;
                value = 0.0;
            }
            let target_date = truth.observations()[t].0;
            forecasts.push_unchecked(ForecastRecord {
                model_id: ids[i].clone(),
                location: truth.location.clone(),
                forecast_date: target_date - Duration::weeks(h as i64),
                target_date,
                horizon: config.horizon,
                kind: ForecastKind::Point,
                value: F::lit(value),
            });
        }
    }
    Ok(SyntheticPanel {
        forecasts,
        config: config.clone(),
        sigma,
        blocks: config.blocks(),
        floored,
        errors,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticRun<F = f64> {
    pub truth: SyntheticTruth<F>,
    pub panel: SyntheticPanel<F>,
}

impl<F: Scalar> SyntheticRun<F> {
    pub fn aligned(&self) -> AlignedPanel<F> {
        self.panel.aligned(&self.truth.series)
    }
}

pub fn generate<F: Scalar>(config: &SimConfig) -> Result<SyntheticRun<F>> {
    let truth = gen_truth(config)?;
    let panel = gen_forecast_panel(&truth.series, config)?;
    Ok(SyntheticRun { truth, panel })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloSkill {
    pub mean: f64,
    /// Standard error of the mean; undefined for a single replication.
    pub std_error: Option<f64>,
    pub reps: usize,
    pub skills: Vec<f64>,
}

/// Seed of replication `rep`, drawn from its own stream under `seed`.
pub fn rep_seed(seed: u64, rep: usize) -> u64 {
    stream(seed, REP_STREAM + rep as u64).random()
}

/// Mean or median skill straight from the generated values.
fn direct_skill(run: &SyntheticRun<f64>, strategy: &Strategy) -> Result<f64> {
    let obs: Vec<f64> = run.truth.series.observations().iter().map(|(_, v)| *v).collect();
    let h = run.panel.config.horizon as usize;
    let rows: Vec<Vec<f64>> = run.panel.forecasts.iter().map(|(_, r)| r.iter().map(|x| x.value).collect()).collect();
    let n = rows.len();
    let mut col = vec![0.0; n];
    let (mut model, mut base) = (0.0, 0.0);
    for t in h..obs.len() {
        for (c, r) in col.iter_mut().zip(&rows) {
            *c = r[t];
        }
        let f = if matches!(strategy, Strategy::Mean) {
            col.iter().sum::<f64>() / n as f64
        } else {
            col.sort_by(|a, b| a.partial_cmp(b).expect("finite forecasts"));
            if n % 2 == 1 {
                col[n / 2]
            } else {
                (col[n / 2 - 1] + col[n / 2]) / 2.0
            }
        };
        model += (f - obs[t]).powi(2);
        base += (obs[t - h] - obs[t]).powi(2);
    }
    let m = (obs.len() - h) as f64;
    skill(model / m, base / m)
}

fn strategy_skill(run: &SyntheticRun<f64>, strategy: &Strategy) -> Result<f64> {
    let built = build_ensemble(&run.aligned(), strategy, WeightScope::Pooled)?;
    let table = run.truth.table();
    let it = built.forecast.residuals();
    Ok(evaluate_skill("ensemble", it, &table, BaselineHorizon::MatchForecast, Metric::Mse)?.skill)
}

/// MSE-skill of the strategy's ensemble against persistence on the same
/// truth, over `reps` independently seeded panels.
pub fn monte_carlo_ensemble_skill(config: &SimConfig, reps: usize, strategy: &Strategy) -> Result<MonteCarloSkill> {
    if reps == 0 {
        return Err(Error::param("at least one replication is required"));
    }
    config.validate()?;
    let skills = (0..reps)
        .into_par_iter()
        .map(|r| {
            let run = generate::<f64>(&config.reseeded(rep_seed(config.seed, r)))?;
            match strategy {
                Strategy::Mean | Strategy::Median => direct_skill(&run, strategy),
                _ => strategy_skill(&run, strategy),
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    let n = reps as f64;
    let mean = skills.iter().sum::<f64>() / n;
    let std_error = (reps > 1).then(|| {
        let var = skills.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    });
    Ok(MonteCarloSkill {
        mean,
        std_error,
        reps,
        skills,
    })
}

/// Sample correlation of two rows of generated errors.
#[cfg(test)]
fn sample_corr(a: &[f64], b: &[f64]) -> f64 {
    crate::residuals::pearson(a, b).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant(n: usize, t: usize, rho: f64) -> SimConfig {
        SimConfig {
            truth: TruthProcess::Constant { value: 5.0 },
            ..SimConfig::equicorrelated(n, t, rho, ErrorScale::Sigma(1.0), 7)
        }
    }

    #[test]
    fn constant_truth() {
        let t = gen_truth::<f64>(&constant(2, 3, 0.0)).unwrap();
        let v: Vec<f64> = t.series.observations().iter().map(|x| x.1).collect();
        assert_eq!(v, vec![5.0, 5.0, 5.0]);
        assert_eq!(t.floored, 0);
    }

    #[test]
    fn seasonal_truth_is_periodic() {
        let c = SimConfig {
            truth: TruthProcess::Seasonal {
                level: 20.0,
                amplitude: 10.0,
                period: 52,
            },
            ..constant(1, 104, 0.0)
        };
        let v: Vec<f64> = gen_truth::<f64>(&c).unwrap().series.observations().iter().map(|x| x.1).collect();
        for t in 0..52 {
            assert_eq!(v[t], v[t + 52]);
        }
    }

    #[test]
    fn random_walk_is_deterministic_and_floored() {
        let c = SimConfig {
            truth: TruthProcess::RandomWalk { start: 1.0, step_sd: 5.0 },
            ..constant(3, 200, 0.3)
        };
        let a = generate::<f64>(&c).unwrap();
        let b = generate::<f64>(&c).unwrap();
        assert_eq!(a, b);
        assert!(a.truth.floored > 0);
        assert!(a.truth.series.observations().iter().all(|x| x.1 >= 0.0));
        assert_ne!(a, generate::<f64>(&c.reseeded(8)).unwrap());
    }

    #[test]
    fn rho_one_errors_identical() {
        let c = SimConfig::equicorrelated(4, 50, 1.0, ErrorScale::Sigma(2.0), 1);
        let p = generate::<f64>(&c).unwrap().panel;
        for row in &p.errors[1..] {
            assert_eq!(row, &p.errors[0]);
        }
    }

    #[test]
    fn negative_rho_hits_target() {
        let c = SimConfig::equicorrelated(3, 100_000, -0.4, ErrorScale::Sigma(1.0), 3);
        let p = generate::<f64>(&c).unwrap().panel;
        assert!((sample_corr(&p.errors[0], &p.errors[1]) + 0.4).abs() < 0.01);
        assert!((sample_corr(&p.errors[1], &p.errors[2]) + 0.4).abs() < 0.01);
        let var = p.errors[0].iter().map(|e| e * e).sum::<f64>() / 100_000.0;
        assert!((var - 1.0).abs() < 0.02);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(SimConfig::equicorrelated(5, 10, -0.3, ErrorScale::Sigma(1.0), 0).validate().is_err());
        assert!(SimConfig::equicorrelated(5, 10, -0.25, ErrorScale::Sigma(1.0), 0).validate().is_ok());
        assert!(SimConfig::equicorrelated(5, 1, 0.0, ErrorScale::Sigma(1.0), 0).validate().is_err());
        assert!(SimConfig::equicorrelated(5, 10, 0.0, ErrorScale::Sigma(0.0), 0).validate().is_err());
        let mut c = SimConfig::equicorrelated(5, 10, 0.0, ErrorScale::Sigma(1.0), 0);
        c.correlation = CorrelationStructure::Block {
            blocks: 2,
            within: 0.2,
            between: 0.5,
            sizes: vec![],
        };
        assert!(c.validate().is_err());
        c.correlation = CorrelationStructure::Block {
            blocks: 2,
            within: 0.9,
            between: 0.0,
            sizes: vec![4, 2],
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn constant_truth_has_undefined_skill() {
        let c = SimConfig {
            error: ErrorScale::TargetSkill(0.9),
            ..constant(2, 10, 0.0)
        };
        assert!(matches!(generate::<f64>(&c), Err(Error::UndefinedSkill)));
        let c = constant(2, 10, 0.0);
        assert!(matches!(
            monte_carlo_ensemble_skill(&c, 2, &Strategy::Mean),
            Err(Error::UndefinedSkill)
        ));
    }

    #[test]
    fn direct_path_matches_pipeline() {
        let c = SimConfig::equicorrelated(5, 300, 0.4, ErrorScale::TargetSkill(0.8), 11);
        let run = generate::<f64>(&c).unwrap();
        for s in [Strategy::Mean, Strategy::Median] {
            let a = direct_skill(&run, &s).unwrap();
            let b = strategy_skill(&run, &s).unwrap();
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn model_ids_sort_numerically() {
        let c = SimConfig::equicorrelated(12, 10, 0.0, ErrorScale::Sigma(1.0), 0);
        let ids = c.model_ids();
        assert_eq!(ids[0], "model_00");
        let mut sorted = ids.clone();
        sorted.sort();
        assert_eq!(sorted, ids);
    }

    #[test]
    fn block_labels_are_contiguous() {
        let mut c = SimConfig::equicorrelated(7, 10, 0.0, ErrorScale::Sigma(1.0), 0);
        c.correlation = CorrelationStructure::Block {
            blocks: 3,
            within: 0.9,
            between: 0.1,
            sizes: vec![],
        };
        assert_eq!(c.blocks(), vec![0, 0, 0, 1, 1, 2, 2]);
        c.correlation = CorrelationStructure::Block {
            blocks: 2,
            within: 0.9,
            between: 0.0,
            sizes: vec![6, 1],
        };
        assert_eq!(c.blocks(), vec![0, 0, 0, 0, 0, 0, 1]);
    }
}
