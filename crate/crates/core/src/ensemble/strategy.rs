use serde::{Deserialize, Serialize};

use super::combine::{cluster_then_mean, mean_ensemble, median_ensemble, weighted_ensemble, EnsembleForecast, MissingModels};
use super::covariance::{estimate_covariance, DEFAULT_SHRINKAGE};
use super::weights::{correlation_penalized_weights, inverse_error_weights, min_variance_weights, WeightVector, DEFAULT_GAMMA};
use crate::data::AlignedPanel;
use crate::error::{Error, Result};
use crate::num::Scalar;
use crate::residuals::{
    agglomerative_cluster, compute_residuals, pairwise_correlations, restrict_complete, ClusterAssignment,
    CorrelationMatrix, Linkage, MissingPolicy, Pooling, ResidualPanel, Scope, DEFAULT_MIN_OVERLAP,
};
use crate::skill::{error, Metric};

/// How an ensemble is formed from a panel of model forecasts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case", deny_unknown_fields)]
pub enum Strategy {
    Mean,
    Median,
    /// Cluster models by residual correlation, average within, then across.
    ClusterMean {
        k: usize,
        linkage: Linkage,
        min_overlap: usize,
        missing: MissingPolicy,
    },
    InverseError { metric: Metric },
    MinVariance { shrinkage: f64, nonneg: bool },
    CorrelationPenalized { gamma: f64, min_overlap: usize, metric: Metric },
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Mean => "mean",
            Strategy::Median => "median",
            Strategy::ClusterMean { .. } => "cluster_mean",
            Strategy::InverseError { .. } => "inverse_error",
            Strategy::MinVariance { .. } => "min_variance",
            Strategy::CorrelationPenalized { .. } => "correlation_penalized",
        }
    }

    pub fn cluster_mean(k: usize) -> Self {
        Strategy::ClusterMean {
            k,
            linkage: Linkage::default(),
            min_overlap: DEFAULT_MIN_OVERLAP,
            missing: MissingPolicy::default(),
        }
    }

    /// Nonnegative minimum-variance weights with the default shrinkage.
    pub fn min_variance() -> Self {
        Strategy::MinVariance {
            shrinkage: DEFAULT_SHRINKAGE,
            nonneg: true,
        }
    }

    pub fn correlation_penalized() -> Self {
        Strategy::CorrelationPenalized {
            gamma: DEFAULT_GAMMA,
            min_overlap: DEFAULT_MIN_OVERLAP,
            metric: Metric::Mse,
        }
    }

    fn is_fitted(&self) -> bool {
        !matches!(self, Strategy::Mean | Strategy::Median)
    }
}

/// Whether fitted weights are estimated per (location, horizon) or once for the panel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightScope {
    #[default]
    PerSeries,
    Pooled,
}

/// A fitted combination rule, reusable on other panels with the same models.
#[derive(Debug, Clone, PartialEq)]
pub enum Combiner<F = f64> {
    Mean,
    Median,
    Clusters(ClusterAssignment<F>),
    Weights(WeightVector<F>),
}

impl<F: Scalar> Combiner<F> {
    pub fn combine(&self, panel: &AlignedPanel<F>, missing: MissingModels) -> Result<EnsembleForecast<F>> {
        match self {
            Combiner::Mean => Ok(mean_ensemble(panel)),
            Combiner::Median => Ok(median_ensemble(panel)),
            Combiner::Clusters(c) => cluster_then_mean(panel, c),
            Combiner::Weights(w) => weighted_ensemble(panel, w, missing),
        }
    }

    pub fn weights(&self) -> Option<&WeightVector<F>> {
        match self {
            Combiner::Weights(w) => Some(w),
            _ => None,
        }
    }

    pub fn clusters(&self) -> Option<&ClusterAssignment<F>> {
        match self {
            Combiner::Clusters(c) => Some(c),
            _ => None,
        }
    }
}

fn pooled_residuals<F: Scalar>(panel: &AlignedPanel<F>) -> Result<ResidualPanel<F>> {
    compute_residuals(panel, Pooling::All)?
        .into_iter()
        .next()
        .ok_or(Error::EmptyAlignment)
}

fn model_errors<F: Scalar>(residuals: &ResidualPanel<F>, ids: &[String], metric: Metric) -> Result<Vec<F>> {
    ids.iter()
        .map(|id| {
            let r: Vec<F> = residuals.series(id).unwrap_or(&[]).iter().map(|(_, v)| *v).collect();
            error(&r, metric)
        })
        .collect()
}

/// Clusters what can be clustered and appends every other model as a singleton.
fn fit_clusters<F: Scalar>(
    corr: &CorrelationMatrix<F>,
    k: usize,
    linkage: Linkage,
    missing: MissingPolicy,
) -> Result<ClusterAssignment<F>> {
    let n = corr.len();
    let usable: Vec<usize> = (0..n).filter(|&i| (0..n).any(|j| corr.get(i, j).is_some())).collect();
    let clusterable = match missing {
        MissingPolicy::Restrict => restrict_complete(corr, &usable).0.len(),
        MissingPolicy::ImputeMax => usable.len(),
    };
    let mut assignment = if clusterable == 0 {
        ClusterAssignment {
            ids: Vec::new(),
            labels: Vec::new(),
            k: 0,
            linkage,
            dendrogram: Vec::new(),
            excluded: corr.ids().to_vec(),
        }
    } else {
        agglomerative_cluster(corr, k.min(clusterable), linkage, missing)?
    };
    for id in assignment.excluded.clone() {
        assignment.ids.push(id);
        assignment.labels.push(assignment.k);
        assignment.k += 1;
    }
    Ok(assignment)
}

/// Fits `strategy` on one panel.
pub fn fit_combiner<F: Scalar>(panel: &AlignedPanel<F>, strategy: &Strategy) -> Result<Combiner<F>> {
    if panel.is_empty() {
        return Err(Error::EmptyAlignment);
    }
    let ids = panel.model_ids();
    let need_two = |found: usize| {
        if found < 2 {
            Err(Error::InsufficientModels { needed: 2, found })
        } else {
            Ok(())
        }
    };
    match *strategy {
        Strategy::Mean => Ok(Combiner::Mean),
        Strategy::Median => Ok(Combiner::Median),
        Strategy::ClusterMean {
            k,
            linkage,
            min_overlap,
            missing,
        } => {
            if k == 0 {
                return Err(Error::param("cluster count k must be at least 1"));
            }
            let corr = pairwise_correlations(&pooled_residuals(panel)?, min_overlap)?;
            Ok(Combiner::Clusters(fit_clusters(&corr, k, linkage, missing)?))
        }
        Strategy::InverseError { metric } => {
            let errors = model_errors(&pooled_residuals(panel)?, &ids, metric)?;
            Ok(Combiner::Weights(inverse_error_weights(&ids, &errors, metric)?))
        }
        Strategy::MinVariance { shrinkage, nonneg } => {
            need_two(ids.len())?;
            let cov = estimate_covariance(&pooled_residuals(panel)?, F::lit(shrinkage))?;
            Ok(Combiner::Weights(min_variance_weights(&cov, nonneg)?))
        }
        Strategy::CorrelationPenalized {
            gamma,
            min_overlap,
            metric,
        } => {
            need_two(ids.len())?;
            let residuals = pooled_residuals(panel)?;
            let corr = pairwise_correlations(&residuals, min_overlap)?;
            let errors = model_errors(&residuals, corr.ids(), metric)?;
            Ok(Combiner::Weights(
                correlation_penalized_weights(&errors, &corr, F::lit(gamma))?.weights,
            ))
        }
    }
}

#[derive(Debug, Clone)]
pub struct EnsembleBuild<F = f64> {
    pub forecast: EnsembleForecast<F>,
    /// Fitted combiner per scope; a single pooled entry unless weights are per series.
    pub fits: Vec<(Scope, Combiner<F>)>,
}

/// Fits and applies `strategy`, per (location, horizon) when `scope` asks for it.
pub fn build_ensemble<F: Scalar>(panel: &AlignedPanel<F>, strategy: &Strategy, scope: WeightScope) -> Result<EnsembleBuild<F>> {
    let name = format!("ensemble_{}", strategy.name());
    if !strategy.is_fitted() || scope == WeightScope::Pooled {
        let combiner = fit_combiner(panel, strategy)?;
        let mut forecast = combiner.combine(panel, MissingModels::Renormalize)?;
        forecast.name = name;
        return Ok(EnsembleBuild {
            forecast,
            fits: vec![(Scope::default(), combiner)],
        });
    }
    let mut forecast = EnsembleForecast {
        name,
        points: Default::default(),
    };
    let mut fits = Vec::new();
    for ((location, horizon), sub) in panel.split_by_series() {
        let combiner = fit_combiner(&sub, strategy)?;
        forecast.extend(combiner.combine(&sub, MissingModels::Renormalize)?);
        fits.push((
            Scope {
                location: Some(location),
                horizon: Some(horizon),
            },
            combiner,
        ));
    }
    Ok(EnsembleBuild { forecast, fits })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::SeriesKey;
    use chrono::NaiveDate;

    fn panel() -> AlignedPanel<f64> {
        let start = NaiveDate::from_ymd_opt(2021, 1, 2).unwrap();
        let mut rows = Vec::new();
        for loc in ["US", "CA"] {
            for t in 0..20i64 {
                let obs = 100.0 + t as f64;
                let key = SeriesKey::new(loc, 1, start + chrono::Duration::weeks(t));
                let e = (t as f64 * 0.9).sin();
                rows.push(("A", key.clone(), obs + 3.0 * e, obs));
                rows.push(("B", key.clone(), obs + 2.0 * e + (t as f64).cos(), obs));
                rows.push(("C", key, obs - (t as f64 * 0.4).cos(), obs));
            }
        }
        AlignedPanel::from_rows(rows).unwrap()
    }

    #[test]
    fn cluster_mean_k1_equals_mean() {
        let p = panel();
        let strategy = Strategy::ClusterMean {
            k: 1,
            linkage: Linkage::Average,
            min_overlap: 10,
            missing: MissingPolicy::Restrict,
        };
        let built = build_ensemble(&p, &strategy, WeightScope::PerSeries).unwrap();
        let mean = mean_ensemble(&p);
        for (k, point) in &built.forecast.points {
            assert!((point.forecast - mean.forecast(k).unwrap()).abs() < 1e-12);
        }
        assert_eq!(built.fits.len(), 2);
    }

    #[test]
    fn short_panels_cluster_as_singletons() {
        let p = panel();
        let built = build_ensemble(&p, &Strategy::cluster_mean(1), WeightScope::Pooled).unwrap();
        // Default min_overlap of 52 exceeds the 40 pooled points: nothing is clusterable.
        let clusters = built.fits[0].1.clusters().unwrap();
        assert_eq!(clusters.k, 3);
        assert_eq!(clusters.ids.len(), 3);
    }

    #[test]
    fn weight_strategies_sum_to_one() {
        let p = panel();
        for strategy in [
            Strategy::InverseError { metric: Metric::Mse },
            Strategy::min_variance(),
            Strategy::CorrelationPenalized {
                gamma: 1.0,
                min_overlap: 10,
                metric: Metric::Mse,
            },
        ] {
            for scope in [WeightScope::PerSeries, WeightScope::Pooled] {
                let built = build_ensemble(&p, &strategy, scope).unwrap();
                assert_eq!(built.forecast.len(), 40);
                for (_, fit) in &built.fits {
                    let w = fit.weights().unwrap();
                    assert!((w.sum() - 1.0).abs() < 1e-12);
                    assert!(w.weights.iter().all(|x| *x >= 0.0));
                }
            }
        }
    }

    #[test]
    fn min_variance_needs_two_models() {
        let p = panel().select(["A"]);
        assert!(matches!(
            fit_combiner(&p, &Strategy::min_variance()),
            Err(Error::InsufficientModels { .. })
        ));
    }
}
