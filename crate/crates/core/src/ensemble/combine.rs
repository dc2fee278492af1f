use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::weights::WeightVector;
use crate::data::{AlignedPair, AlignedPanel, SeriesKey};
use crate::error::{Error, Result};
use crate::num::Scalar;
use crate::residuals::ClusterAssignment;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsemblePoint<F = f64> {
    pub forecast: F,
    pub observed: F,
    /// Models that had a forecast at this key.
    pub contributors: usize,
}

/// Combined forecast per key.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleForecast<F = f64> {
    pub name: String,
    pub points: BTreeMap<SeriesKey, EnsemblePoint<F>>,
}

impl<F: Scalar> EnsembleForecast<F> {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn forecast(&self, key: &SeriesKey) -> Option<F> {
        self.points.get(key).map(|p| p.forecast)
    }

    pub fn residuals(&self) -> impl Iterator<Item = (&SeriesKey, F)> {
        self.points.iter().map(|(k, p)| (k, p.forecast - p.observed))
    }

    /// The ensemble as a one-model aligned panel under `self.name`.
    pub fn to_aligned(&self) -> AlignedPanel<F> {
        let mut panel = AlignedPanel::new();
        for (k, p) in &self.points {
            panel.insert(
                self.name.clone(),
                k.clone(),
                AlignedPair {
                    forecast: p.forecast,
                    observed: p.observed,
                },
            );
        }
        panel
    }

    /// Merges forecasts computed on disjoint key sets.
    pub(crate) fn extend(&mut self, other: Self) {
        self.points.extend(other.points);
    }
}

/// Handling of keys where some weighted models have no forecast.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingModels {
    /// Renormalize weights over the models present.
    #[default]
    Renormalize,
    /// Drop keys where any weighted model is absent.
    Strict,
}

/// (model index, forecast) per key, plus the observed value.
fn gather<F: Scalar>(panel: &AlignedPanel<F>) -> (Vec<String>, BTreeMap<SeriesKey, (F, Vec<(usize, F)>)>) {
    let ids = panel.model_ids();
    let mut by_key: BTreeMap<SeriesKey, (F, Vec<(usize, F)>)> = BTreeMap::new();
    for (idx, id) in ids.iter().enumerate() {
        for (key, pair) in panel.series(id).into_iter().flatten() {
            by_key
                .entry(key.clone())
                .or_insert_with(|| (pair.observed, Vec::new()))
                .1
                .push((idx, pair.forecast));
        }
    }
    (ids, by_key)
}

fn mean_of<F: Scalar>(xs: impl ExactSizeIterator<Item = F>) -> F {
    let n = F::from_usize_lossy(xs.len());
    xs.sum::<F>() / n
}

/// Equal-weight mean over the models present at each key.
pub fn mean_ensemble<F: Scalar>(panel: &AlignedPanel<F>) -> EnsembleForecast<F> {
    let (_, by_key) = gather(panel);
    let points = by_key
        .into_iter()
        .map(|(key, (observed, fs))| {
            let point = EnsemblePoint {
                forecast: mean_of(fs.iter().map(|f| f.1)),
                observed,
                contributors: fs.len(),
            };
            (key, point)
        })
        .collect();
    EnsembleForecast {
        name: "ensemble_mean".into(),
        points,
    }
}

/// Per-key median; even counts take the midpoint of the two central values.
pub fn median_ensemble<F: Scalar>(panel: &AlignedPanel<F>) -> EnsembleForecast<F> {
    let (_, by_key) = gather(panel);
    let two = F::one() + F::one();
    let points = by_key
        .into_iter()
        .map(|(key, (observed, fs))| {
            let mut v: Vec<F> = fs.iter().map(|f| f.1).collect();
            v.sort_by(|a, b| a.partial_cmp(b).expect("forecasts are finite"));
            let mid = v.len() / 2;
            let forecast = if v.len() % 2 == 1 { v[mid] } else { (v[mid - 1] + v[mid]) / two };
            (
                key,
                EnsemblePoint {
                    forecast,
                    observed,
                    contributors: v.len(),
                },
            )
        })
        .collect();
    EnsembleForecast {
        name: "ensemble_median".into(),
        points,
    }
}

/// Mean within each cluster, then the mean of cluster means.
///
/// With every model present this is the weighted mean with
/// `w_i = 1 / (k · |cluster(i)|)`.
pub fn cluster_then_mean<F: Scalar>(panel: &AlignedPanel<F>, clusters: &ClusterAssignment<F>) -> Result<EnsembleForecast<F>> {
    let (ids, by_key) = gather(panel);
    let labels: Vec<usize> = ids
        .iter()
        .map(|id| {
            clusters
                .label_of(id)
                .ok_or_else(|| Error::param(format!("model {id} has no cluster label")))
        })
        .collect::<Result<_>>()?;
    let points = by_key
        .into_iter()
        .map(|(key, (observed, fs))| {
            let mut stage: BTreeMap<usize, Vec<F>> = BTreeMap::new();
            for (idx, f) in &fs {
                stage.entry(labels[*idx]).or_default().push(*f);
            }
            let forecast = mean_of(stage.values().map(|v| mean_of(v.iter().copied())));
            (
                key,
                EnsemblePoint {
                    forecast,
                    observed,
                    contributors: fs.len(),
                },
            )
        })
        .collect();
    Ok(EnsembleForecast {
        name: "ensemble_cluster_mean".into(),
        points,
    })
}

/// `Σ w_i f_i` over present models, weights renormalized over that subset.
///
/// Every panel model must appear in `weights`. Keys whose present models
/// carry zero total weight are omitted.
pub fn weighted_ensemble<F: Scalar>(
    panel: &AlignedPanel<F>,
    weights: &WeightVector<F>,
    missing: MissingModels,
) -> Result<EnsembleForecast<F>> {
    let (ids, by_key) = gather(panel);
    let w: Vec<F> = ids
        .iter()
        .map(|id| {
            weights
                .weight_of(id)
                .ok_or_else(|| Error::param(format!("model {id} has no weight")))
        })
        .collect::<Result<_>>()?;
    let required = ids.len().max(weights.ids.len());
    let mut points = BTreeMap::new();
    for (key, (observed, fs)) in by_key {
        if missing == MissingModels::Strict && fs.len() < required {
            continue;
        }
        let total: F = fs.iter().map(|(i, _)| w[*i]).sum();
        if !(total > F::zero()) {
            continue;
        }
        let forecast = fs.iter().map(|(i, f)| w[*i] * *f).sum::<F>() / total;
        points.insert(
            key,
            EnsemblePoint {
                forecast,
                observed,
                contributors: fs.len(),
            },
        );
    }
    Ok(EnsembleForecast {
        name: format!("ensemble_{}", weights.scheme.name()),
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::WeightScheme;
    use crate::residuals::Linkage;
    use chrono::NaiveDate;

    fn key(i: i64) -> SeriesKey {
        SeriesKey::new("US", 1, NaiveDate::from_ymd_opt(2021, 1, 2).unwrap() + chrono::Duration::weeks(i))
    }

    fn panel(rows: &[(&str, i64, f64)]) -> AlignedPanel<f64> {
        AlignedPanel::from_rows(rows.iter().map(|&(m, i, f)| (m, key(i), f, 0.0))).unwrap()
    }

    fn forecasts(e: &EnsembleForecast<f64>) -> Vec<f64> {
        e.points.values().map(|p| p.forecast).collect()
    }

    fn clusters(ids: &[&str], labels: Vec<usize>) -> ClusterAssignment<f64> {
        let k = labels.iter().max().map_or(0, |m| m + 1);
        ClusterAssignment {
            ids: ids.iter().map(|s| s.to_string()).collect(),
            labels,
            k,
            linkage: Linkage::Average,
            dendrogram: Vec::new(),
            excluded: Vec::new(),
        }
    }

    #[test]
    fn mean_examples() {
        assert_eq!(forecasts(&mean_ensemble(&panel(&[("A", 0, 10.0), ("B", 0, 14.0)]))), vec![12.0]);
        let single = panel(&[("A", 0, 3.0), ("A", 1, 5.0)]);
        assert_eq!(forecasts(&mean_ensemble(&single)), vec![3.0, 5.0]);
        // Staggered: week0 {A}, week1 {A, B}, week2 {A, B, C}, week3 {C}.
        let staggered = panel(&[
            ("A", 0, 1.0),
            ("A", 1, 2.0),
            ("A", 2, 3.0),
            ("B", 1, 4.0),
            ("B", 2, 6.0),
            ("C", 2, 9.0),
            ("C", 3, 7.0),
        ]);
        let e = mean_ensemble(&staggered);
        assert_eq!(forecasts(&e), vec![1.0, 3.0, 6.0, 7.0]);
        let counts: Vec<_> = e.points.values().map(|p| p.contributors).collect();
        assert_eq!(counts, vec![1, 2, 3, 1]);
    }

    #[test]
    fn median_examples() {
        let p = panel(&[("A", 0, 1.0), ("B", 0, 100.0), ("C", 0, 3.0), ("A", 1, 2.0), ("B", 1, 4.0)]);
        assert_eq!(forecasts(&median_ensemble(&p)), vec![3.0, 3.0]);
        // One outlier among five shifts the mean but not the median.
        let p = panel(&[("A", 0, 10.0), ("B", 0, 11.0), ("C", 0, 12.0), ("D", 0, 13.0), ("E", 0, 1000.0)]);
        assert_eq!(forecasts(&median_ensemble(&p)), vec![12.0]);
        assert_eq!(forecasts(&mean_ensemble(&p)), vec![209.2]);
    }

    #[test]
    fn cluster_mean_examples() {
        let p = panel(&[("A", 0, 10.0), ("B", 0, 20.0), ("C", 0, 30.0)]);
        let two_stage = cluster_then_mean(&p, &clusters(&["A", "B", "C"], vec![0, 1, 1])).unwrap();
        assert_eq!(forecasts(&two_stage), vec![17.5]);
        let singles = cluster_then_mean(&p, &clusters(&["A", "B", "C"], vec![0, 1, 2])).unwrap();
        assert_eq!(forecasts(&singles), forecasts(&mean_ensemble(&p)));
        let one = cluster_then_mean(&p, &clusters(&["A", "B", "C"], vec![0, 0, 0])).unwrap();
        assert_eq!(forecasts(&one), forecasts(&mean_ensemble(&p)));
        assert!(cluster_then_mean(&p, &clusters(&["A", "B"], vec![0, 0])).is_err());
    }

    #[test]
    fn weighted_examples() {
        let p = panel(&[("A", 0, 10.0), ("B", 0, 20.0), ("A", 1, 1.0)]);
        let w = |a: f64, b: f64| WeightVector::normalized(vec!["A".into(), "B".into()], vec![a, b], WeightScheme::Equal, true).unwrap();
        assert_eq!(forecasts(&weighted_ensemble(&p, &w(1.0, 0.0), MissingModels::Renormalize).unwrap()), vec![10.0, 1.0]);
        assert_eq!(
            forecasts(&weighted_ensemble(&p, &w(0.5, 0.5), MissingModels::Renormalize).unwrap()),
            forecasts(&mean_ensemble(&p))
        );
        let e = weighted_ensemble(&p, &w(0.8, 0.2), MissingModels::Renormalize).unwrap();
        assert!((forecasts(&e)[0] - 12.0).abs() < 1e-12);
        let strict = weighted_ensemble(&p, &w(0.8, 0.2), MissingModels::Strict).unwrap();
        assert_eq!(strict.len(), 1);
        // Only B present and B has zero weight: key omitted.
        let only_b = panel(&[("B", 0, 20.0)]);
        assert!(weighted_ensemble(&only_b, &w(1.0, 0.0), MissingModels::Renormalize).unwrap().is_empty());
    }
}
