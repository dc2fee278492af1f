//! How much each model adds to an ensemble beyond what the others already
//! supply.
//!
//! Sign convention for leave-one-out deltas: `skill(without m) − skill(with m)`.
//! Skill is an error ratio, so a positive delta means the ensemble gets worse
//! when `m` is removed, i.e. `m` helps.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{AlignedPanel, SeriesKey, TruthTable};
use crate::ensemble::{build_ensemble, EnsembleForecast, Strategy, WeightScope};
use crate::error::{Error, Result};
use crate::num::Scalar;
use crate::skill::{evaluate_skill, BaselineHorizon, Metric};

/// Regression form used by [`decompose`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterceptMode {
    /// `y = βx + ε`, with uncentered R².
    #[default]
    None,
    /// `y = α + βx + ε`, with the usual centered R².
    Fitted,
}

/// A model residual split into a part explained by the ensemble residual and
/// an independent remainder.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Decomposition<F = f64> {
    pub model_id: String,
    pub beta: F,
    pub intercept: Option<F>,
    pub r_squared: F,
    pub independent_fraction: F,
    pub independent_series: Vec<(SeriesKey, F)>,
    pub mode: InterceptMode,
}

/// Regresses `model` on `ensemble` over their common keys.
///
/// An all-zero model residual counts as fully explained (R² = 1).
pub fn decompose<F: Scalar>(
    model_id: &str,
    model: &BTreeMap<SeriesKey, F>,
    ensemble: &BTreeMap<SeriesKey, F>,
    mode: InterceptMode,
) -> Result<Decomposition<F>> {
    let (keys, (y, x)): (Vec<&SeriesKey>, (Vec<F>, Vec<F>)) = model
        .iter()
        .filter_map(|(k, &y)| ensemble.get(k).map(|&x| (k, (y, x))))
        .unzip();
    if keys.len() < 3 {
        return Err(Error::InsufficientOverlap {
            needed: 3,
            found: keys.len(),
        });
    }
    let n = F::from_usize_lossy(keys.len());
    let mx = x.iter().copied().sum::<F>() / n;
    let sxx_c: F = x.iter().map(|&v| (v - mx) * (v - mx)).sum();
    if sxx_c == F::zero() {
        return Err(Error::UndefinedDecomposition);
    }

    let (alpha, beta, total) = match mode {
        InterceptMode::None => {
            let sxx: F = x.iter().map(|&v| v * v).sum();
            let sxy: F = x.iter().zip(&y).map(|(&a, &b)| a * b).sum();
            (None, sxy / sxx, y.iter().map(|&v| v * v).sum::<F>())
        }
        InterceptMode::Fitted => {
            let my = y.iter().copied().sum::<F>() / n;
            let sxy: F = x.iter().zip(&y).map(|(&a, &b)| (a - mx) * (b - my)).sum();
            let beta = sxy / sxx_c;
            let total = y.iter().map(|&v| (v - my) * (v - my)).sum::<F>();
            (Some(my - beta * mx), beta, total)
        }
    };
    let a = alpha.unwrap_or_else(F::zero);
    let eps: Vec<F> = x.iter().zip(&y).map(|(&xv, &yv)| yv - a - beta * xv).collect();
    let sse: F = eps.iter().map(|&e| e * e).sum();
    let r_squared = if total == F::zero() {
        F::one()
    } else {
        (F::one() - sse / total).max(F::zero()).min(F::one())
    };
    Ok(Decomposition {
        model_id: model_id.to_string(),
        beta,
        intercept: alpha,
        r_squared,
        independent_fraction: F::one() - r_squared,
        independent_series: keys.into_iter().cloned().zip(eps).collect(),
        mode,
    })
}

fn residual_map<F: Scalar>(forecast: &EnsembleForecast<F>) -> BTreeMap<SeriesKey, F> {
    forecast.residuals().map(|(k, r)| (k.clone(), r)).collect()
}

fn model_residuals<F: Scalar>(panel: &AlignedPanel<F>, model: &str) -> BTreeMap<SeriesKey, F> {
    panel
        .series(model)
        .map(|s| s.iter().map(|(k, p)| (k.clone(), p.residual())).collect())
        .unwrap_or_default()
}

/// Ensemble construction and scoring shared by the leave-one-out and report paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContributionOptions {
    pub strategy: Strategy,
    pub scope: WeightScope,
    pub metric: Metric,
    pub baseline: BaselineHorizon,
    pub intercept: InterceptMode,
}

impl Default for ContributionOptions {
    fn default() -> Self {
        Self {
            strategy: Strategy::Mean,
            scope: WeightScope::default(),
            metric: Metric::Mse,
            baseline: BaselineHorizon::default(),
            intercept: InterceptMode::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LooDelta<F = f64> {
    pub model_id: String,
    pub skill_with: Option<F>,
    pub skill_without: Option<F>,
    /// `skill_without − skill_with`; positive when the model helps.
    pub delta: Option<F>,
    /// Keys both ensembles were scored on.
    pub n: usize,
}

fn skill_on<F: Scalar>(
    residuals: &BTreeMap<SeriesKey, F>,
    keys: &[&SeriesKey],
    truth: &TruthTable<F>,
    opts: &ContributionOptions,
) -> Option<F> {
    let it = keys.iter().map(|k| (*k, residuals[*k]));
    evaluate_skill("ensemble", it, truth, opts.baseline, opts.metric)
        .ok()
        .map(|r| r.skill)
}

fn loo_one<F: Scalar>(
    full: &BTreeMap<SeriesKey, F>,
    reduced: Option<&BTreeMap<SeriesKey, F>>,
    model: &str,
    truth: &TruthTable<F>,
    opts: &ContributionOptions,
) -> LooDelta<F> {
    let mut out = LooDelta {
        model_id: model.to_string(),
        skill_with: None,
        skill_without: None,
        delta: None,
        n: 0,
    };
    let Some(reduced) = reduced else { return out };
    let keys: Vec<&SeriesKey> = full.keys().filter(|k| reduced.contains_key(*k)).collect();
    out.n = keys.len();
    out.skill_with = skill_on(full, &keys, truth, opts);
    out.skill_without = skill_on(reduced, &keys, truth, opts);
    if let (Some(w), Some(wo)) = (out.skill_with, out.skill_without) {
        out.delta = Some(wo - w);
    }
    out
}

/// Ensembles built without each model in turn, `None` where the strategy
/// cannot be fitted on the remainder.
fn reduced_ensembles<F: Scalar>(
    panel: &AlignedPanel<F>,
    ids: &[String],
    opts: &ContributionOptions,
) -> Vec<Option<BTreeMap<SeriesKey, F>>> {
    ids.par_iter()
        .map(|m| {
            let rest = panel.without(m);
            if rest.is_empty() {
                return None;
            }
            build_ensemble(&rest, &opts.strategy, opts.scope)
                .ok()
                .map(|b| residual_map(&b.forecast))
        })
        .collect()
}

/// Leave-one-out skill deltas for every model, each scored on the keys
/// covered by both the full and the reduced ensemble.
pub fn loo_contribution<F: Scalar>(
    panel: &AlignedPanel<F>,
    truth: &TruthTable<F>,
    opts: &ContributionOptions,
) -> Result<Vec<LooDelta<F>>> {
    let ids = panel.model_ids();
    if ids.len() < 2 {
        return Err(Error::InsufficientModels {
            needed: 2,
            found: ids.len(),
        });
    }
    let full = residual_map(&build_ensemble(panel, &opts.strategy, opts.scope)?.forecast);
    let reduced = reduced_ensembles(panel, &ids, opts);
    Ok(ids
        .iter()
        .zip(&reduced)
        .map(|(m, r)| loo_one(&full, r.as_ref(), m, truth, opts))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContributionRow<F = f64> {
    pub model_id: String,
    pub skill: F,
    pub loo_delta: Option<F>,
    /// Against the ensemble including the model.
    pub independent_fraction: F,
    /// Against the ensemble of the other models.
    pub independent_fraction_excl_self: Option<F>,
    pub beats_baseline: bool,
    pub n_dates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContributionReport<F = f64> {
    pub options: ContributionOptions,
    pub ensemble_skill: F,
    /// Ordered by `loo_delta` descending, undefined deltas last, ties by model id.
    pub rows: Vec<ContributionRow<F>>,
}

pub fn contribution_report<F: Scalar>(
    panel: &AlignedPanel<F>,
    truth: &TruthTable<F>,
    opts: &ContributionOptions,
) -> Result<ContributionReport<F>> {
    let ids = panel.model_ids();
    let ensemble = build_ensemble(panel, &opts.strategy, opts.scope)?;
    let full = residual_map(&ensemble.forecast);
    let ensemble_skill = evaluate_skill("ensemble", full.iter().map(|(k, r)| (k, *r)), truth, opts.baseline, opts.metric)?.skill;
    let reduced = reduced_ensembles(panel, &ids, opts);

    let mut rows = ids
        .iter()
        .zip(&reduced)
        .map(|(m, red)| {
            let own = model_residuals(panel, m);
            let standalone = evaluate_skill(m, own.iter().map(|(k, r)| (k, *r)), truth, opts.baseline, opts.metric)?;
            let incl = decompose(m, &own, &full, opts.intercept)?;
            let excl = red
                .as_ref()
                .and_then(|r| decompose(m, &own, r, opts.intercept).ok())
                .map(|d| d.independent_fraction);
            Ok(ContributionRow {
                model_id: m.clone(),
                skill: standalone.skill,
                loo_delta: loo_one(&full, red.as_ref(), m, truth, opts).delta,
                independent_fraction: incl.independent_fraction,
                independent_fraction_excl_self: excl,
                beats_baseline: standalone.skill < F::one(),
                n_dates: standalone.n,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    rows.sort_by(|a, b| match (a.loo_delta, b.loo_delta) {
        (Some(x), Some(y)) => y.partial_cmp(&x).unwrap_or(std::cmp::Ordering::Equal).then_with(|| a.model_id.cmp(&b.model_id)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => a.model_id.cmp(&b.model_id),
    });
    Ok(ContributionReport {
        options: opts.clone(),
        ensemble_skill,
        rows,
    })
}
