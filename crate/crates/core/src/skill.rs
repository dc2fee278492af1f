//! Persistence baseline, error metrics, skill ratios and the closed-form
//! skill of an equal-weight ensemble of equicorrelated models.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::data::{SeriesKey, TruthSeries, TruthTable};
use crate::error::{Error, Result};
use crate::num::Scalar;

/// Published hub figures used only to annotate reports; never recomputed.
pub mod published {
    pub const SOURCE: &str = "US COVID-19 Forecast Hub evaluation, April 2020 to November 2021";
    pub const MEDIAN_MODEL_SKILL: f64 = 0.87;
    pub const ENSEMBLE_SKILL: f64 = 0.66;
    pub const BEST_MODEL_SKILL: f64 = 0.67;
    pub const MODEL_COUNT: usize = 28;
    pub const AVERAGE_CORRELATION: f64 = 0.60;
    pub const WITHIN_CLUSTER_CORRELATION_K3: f64 = 0.82;
    pub const WITHIN_CLUSTER_CORRELATION_K4: f64 = 0.91;
}

/// Error metric. Only [`Metric::Mse`] makes the ensemble skill of `N`
/// independent models equal to `skill / N`; MAE skill does not obey that.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    #[default]
    Mse,
    Mae,
}

impl Metric {
    pub fn name(&self) -> &'static str {
        match self {
            Metric::Mse => "mse",
            Metric::Mae => "mae",
        }
    }
}

/// Mean squared or mean absolute residual.
pub fn error<F: Scalar>(residuals: &[F], metric: Metric) -> Result<F> {
    if residuals.is_empty() {
        return Err(Error::EmptySeries("error metric of an empty residual series"));
    }
    let total: F = match metric {
        Metric::Mse => residuals.iter().map(|r| *r * *r).sum(),
        Metric::Mae => residuals.iter().map(|r| r.abs()).sum(),
    };
    Ok(total / F::from_usize_lossy(residuals.len()))
}

/// `error / baseline_error`; lower is better.
pub fn skill<F: Scalar>(error: F, baseline_error: F) -> Result<F> {
    if !(error >= F::zero()) || !(baseline_error >= F::zero()) {
        return Err(Error::param(format!(
            "errors must be nonnegative, got {error} and {baseline_error}"
        )));
    }
    if baseline_error == F::zero() {
        return Err(Error::UndefinedSkill);
    }
    Ok(error / baseline_error)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkillReport<F = f64> {
    pub model_id: String,
    pub metric: Metric,
    pub error: F,
    pub baseline_error: F,
    pub skill: F,
    pub improvement: F,
    /// Number of keys both errors were computed on.
    pub n: usize,
}

impl<F: Scalar> SkillReport<F> {
    pub fn new(model_id: impl Into<String>, error: F, baseline_error: F, metric: Metric, n: usize) -> Result<Self> {
        let s = skill(error, baseline_error)?;
        Ok(Self {
            model_id: model_id.into(),
            metric,
            error,
            baseline_error,
            skill: s,
            improvement: F::one() - s,
            n,
        })
    }
}

/// Lowest correlation an `n`-model equicorrelation matrix admits: `−1/(n−1)`.
/// For a single model the bound is −1.
pub fn psd_lower_bound<F: Scalar>(n: usize) -> F {
    if n <= 1 {
        -F::one()
    } else {
        -F::one() / F::from_usize_lossy(n - 1)
    }
}

fn check_rho<F: Scalar>(n: usize, rho: F) -> Result<()> {
    let lower = psd_lower_bound::<F>(n);
    if !(rho >= lower && rho <= F::one()) {
        return Err(Error::param(format!(
            "correlation {rho} outside [{lower}, 1] for {n} models"
        )));
    }
    Ok(())
}

/// MSE skill of the equal-weight mean of `n` unbiased models with common
/// skill `s` and pairwise error correlation `rho`: `s·(1 + (n−1)·rho)/n`.
pub fn theoretical_ensemble_skill<F: Scalar>(s: F, n: usize, rho: F) -> Result<F> {
    if n == 0 {
        return Err(Error::param("ensemble size must be at least 1"));
    }
    if !(s > F::zero()) {
        return Err(Error::param(format!("model skill must be positive, got {s}")));
    }
    check_rho(n, rho)?;
    let n_f = F::from_usize_lossy(n);
    Ok(s * (F::one() + (n_f - F::one()) * rho) / n_f)
}

/// Inverts [`theoretical_ensemble_skill`]: the correlation at which `n`
/// models of skill `s` would produce ensemble skill `skill_ens`.
pub fn implied_correlation<F: Scalar>(skill_ens: F, s: F, n: usize) -> Result<F> {
    if n < 2 {
        return Err(Error::param("implied correlation needs at least 2 models"));
    }
    if !(s > F::zero()) {
        return Err(Error::param(format!("model skill must be positive, got {s}")));
    }
    let n_f = F::from_usize_lossy(n);
    let lower = s / n_f;
    if !(skill_ens >= lower && skill_ens <= s) {
        return Err(Error::OutOfRange {
            value: skill_ens.as_f64(),
            lower: lower.as_f64(),
            upper: s.as_f64(),
        });
    }
    Ok((n_f * skill_ens / s - F::one()) / (n_f - F::one()))
}

/// Correlation values to tabulate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhoGrid {
    Explicit(Vec<f64>),
    /// `points` evenly spaced values from `start` to `stop` inclusive.
    Uniform { start: f64, stop: f64, points: usize },
}

impl RhoGrid {
    pub fn values(&self) -> Result<Vec<f64>> {
        match self {
            RhoGrid::Explicit(v) => Ok(v.clone()),
            RhoGrid::Uniform { start, stop, points } => match points {
                0 => Err(Error::param("grid needs at least one point")),
                1 => Ok(vec![*start]),
                p => Ok((0..*p)
                    .map(|i| start + (stop - start) * i as f64 / (*p - 1) as f64)
                    .collect()),
            },
        }
    }
}

/// Observed ensemble skill drawn as a horizontal reference on the curve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObservedReference<F = f64> {
    pub skill: F,
    pub implied_rho: F,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoryCurve<F = f64> {
    pub s: F,
    pub n: usize,
    pub metric: Metric,
    /// (rho, skill_ens) in grid order.
    pub points: Vec<(F, F)>,
    pub observed: Option<ObservedReference<F>>,
}

impl<F: Scalar> TheoryCurve<F> {
    /// Adds the reference line for an observed ensemble skill.
    pub fn with_observed(mut self, skill_ens: F) -> Result<Self> {
        let implied_rho = implied_correlation(skill_ens, self.s, self.n)?;
        self.observed = Some(ObservedReference {
            skill: skill_ens,
            implied_rho,
        });
        Ok(self)
    }
}

/// Tabulates [`theoretical_ensemble_skill`] over a correlation grid.
pub fn theory_curve<F: Scalar>(s: F, n: usize, grid: &RhoGrid) -> Result<TheoryCurve<F>> {
    let points = grid
        .values()?
        .into_iter()
        .map(|rho| {
            let rho_f = F::lit(rho);
            // A single model has no pairwise correlation; the curve is flat.
            let value = if n == 1 {
                theoretical_ensemble_skill(s, 1, F::zero())?
            } else {
                theoretical_ensemble_skill(s, n, rho_f)?
            };
            Ok((rho_f, value))
        })
        .collect::<Result<_>>()?;
    Ok(TheoryCurve {
        s,
        n,
        metric: Metric::Mse,
        points,
        observed: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PersistencePoint<F = f64> {
    pub target_date: NaiveDate,
    pub forecast: F,
    pub observed: F,
}

/// Persistence forecasts: the value `horizon` observations earlier is the
/// forecast for each later date. The series is taken as regularly spaced.
pub fn persistence_forecast<F: Scalar>(truth: &TruthSeries<F>, horizon: usize) -> Result<Vec<PersistencePoint<F>>> {
    if horizon == 0 {
        return Err(Error::param("persistence horizon must be at least 1"));
    }
    let obs = truth.observations();
    if horizon >= obs.len() {
        return Err(Error::EmptySeries("truth series no longer than the persistence horizon"));
    }
    Ok(obs
        .windows(horizon + 1)
        .map(|w| PersistencePoint {
            target_date: w[horizon].0,
            forecast: w[0].1,
            observed: w[horizon].1,
        })
        .collect())
}

/// Which persistence horizon serves as baseline for a key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineHorizon {
    /// Same number of steps as the forecast's own horizon.
    #[default]
    MatchForecast,
    Fixed(u32),
}

/// Persistence residual for a key, when the truth reaches back far enough.
pub fn baseline_residual<F: Scalar>(truth: &TruthTable<F>, key: &SeriesKey, horizon: BaselineHorizon) -> Option<F> {
    let steps = match horizon {
        BaselineHorizon::MatchForecast => key.horizon,
        BaselineHorizon::Fixed(h) => h,
    } as usize;
    let obs = truth.get(&key.location)?.observations();
    let idx = obs.binary_search_by_key(&key.target_date, |(d, _)| *d).ok()?;
    if steps == 0 || idx < steps {
        return None;
    }
    Some(obs[idx - steps].1 - obs[idx].1)
}

/// Skill of keyed residuals against persistence, both measured on the keys
/// where the baseline is defined.
pub fn evaluate_skill<'a, F: Scalar>(
    model_id: &str,
    residuals: impl IntoIterator<Item = (&'a SeriesKey, F)>,
    truth: &TruthTable<F>,
    horizon: BaselineHorizon,
    metric: Metric,
) -> Result<SkillReport<F>> {
    let (model, base): (Vec<F>, Vec<F>) = residuals
        .into_iter()
        .filter_map(|(k, r)| baseline_residual(truth, k, horizon).map(|b| (r, b)))
        .unzip();
    let n = model.len();
    SkillReport::new(model_id, error(&model, metric)?, error(&base, metric)?, metric, n)
}
