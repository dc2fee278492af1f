use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::data::{AlignedPanel, SeriesKey};
use crate::error::{Error, Result};
use crate::num::Scalar;

/// How aligned keys are grouped into residual panels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    /// One panel per (location, horizon).
    PerSeries,
    /// One panel per horizon, concatenating locations.
    #[default]
    AcrossLocations,
    /// Everything in one panel.
    All,
}

/// What a residual panel covers. `None` means pooled over that dimension.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct Scope {
    pub location: Option<String>,
    pub horizon: Option<u32>,
}

/// Residual series (forecast minus observed) per model, keys strictly increasing.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResidualPanel<F = f64> {
    pub scope: Scope,
    series: BTreeMap<String, Vec<(SeriesKey, F)>>,
}

impl<F: Scalar> ResidualPanel<F> {
    pub fn new(scope: Scope) -> Self {
        Self {
            scope,
            series: BTreeMap::new(),
        }
    }

    /// Inserts a model's series; keys are sorted and must be unique.
    pub fn insert(&mut self, model: impl Into<String>, mut series: Vec<(SeriesKey, F)>) -> Result<()> {
        series.sort_by(|a, b| a.0.cmp(&b.0));
        if series.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::param("residual series has a repeated key"));
        }
        self.series.insert(model.into(), series);
        Ok(())
    }

    /// Builds a single-location, single-horizon panel from weekly residual vectors.
    /// `None` entries are missing weeks.
    pub fn weekly<S: Into<String>>(start: NaiveDate, models: impl IntoIterator<Item = (S, Vec<Option<F>>)>) -> Self {
        let mut panel = Self::new(Scope {
            location: Some("synthetic".into()),
            horizon: Some(1),
        });
        for (model, values) in models {
            let series = values
                .into_iter()
                .enumerate()
                .filter_map(|(i, v)| {
                    v.map(|v| (SeriesKey::new("synthetic", 1, start + chrono::Duration::weeks(i as i64)), v))
                })
                .collect();
            panel.series.insert(model.into(), series);
        }
        panel
    }

    pub fn model_ids(&self) -> Vec<String> {
        self.series.keys().cloned().collect()
    }

    pub fn model_count(&self) -> usize {
        self.series.len()
    }

    pub fn series(&self, model: &str) -> Option<&[(SeriesKey, F)]> {
        self.series.get(model).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[(SeriesKey, F)])> {
        self.series.iter().map(|(m, s)| (m.as_str(), s.as_slice()))
    }

    /// Earliest and latest target date over all models.
    pub fn date_range(&self) -> Option<(NaiveDate, NaiveDate)> {
        let mut dates = self.series.values().flat_map(|s| s.iter().map(|(k, _)| k.target_date));
        let first = dates.next()?;
        Some(dates.fold((first, first), |(lo, hi), d| (lo.min(d), hi.max(d))))
    }

    /// Sub-panel with target dates in `[start, end_exclusive)`.
    pub fn restrict_dates(&self, start: NaiveDate, end_exclusive: NaiveDate) -> Self {
        let series = self
            .series
            .iter()
            .map(|(m, s)| {
                let s = s
                    .iter()
                    .filter(|(k, _)| k.target_date >= start && k.target_date < end_exclusive)
                    .cloned()
                    .collect();
                (m.clone(), s)
            })
            .collect();
        Self {
            scope: self.scope.clone(),
            series,
        }
    }

    /// Keys present in every listed model, with the residual matrix in
    /// (key, model) order. Used by complete-case estimators.
    pub fn complete_case(&self, models: &[String]) -> (Vec<SeriesKey>, Vec<Vec<F>>) {
        let maps: Vec<BTreeMap<&SeriesKey, F>> = models
            .iter()
            .map(|m| {
                self.series
                    .get(m)
                    .map(|s| s.iter().map(|(k, v)| (k, *v)).collect())
                    .unwrap_or_default()
            })
            .collect();
        let Some(first) = maps.first() else {
            return (Vec::new(), Vec::new());
        };
        let mut keys = Vec::new();
        let mut rows = Vec::new();
        for key in first.keys() {
            let row: Option<Vec<F>> = maps.iter().map(|m| m.get(key).copied()).collect();
            if let Some(row) = row {
                keys.push((*key).clone());
                rows.push(row);
            }
        }
        (keys, rows)
    }
}

/// Residual = forecast − observed for every aligned pair, grouped by `pooling`.
pub fn compute_residuals<F: Scalar>(aligned: &AlignedPanel<F>, pooling: Pooling) -> Result<Vec<ResidualPanel<F>>> {
    if aligned.is_empty() {
        return Err(Error::EmptyAlignment);
    }
    let mut groups: BTreeMap<Scope, BTreeMap<String, Vec<(SeriesKey, F)>>> = BTreeMap::new();
    for (model, key, pair) in aligned.rows() {
        let scope = match pooling {
            Pooling::PerSeries => Scope {
                location: Some(key.location.clone()),
                horizon: Some(key.horizon),
            },
            Pooling::AcrossLocations => Scope {
                location: None,
                horizon: Some(key.horizon),
            },
            Pooling::All => Scope::default(),
        };
        groups
            .entry(scope)
            .or_default()
            .entry(model.to_string())
            .or_default()
            .push((key.clone(), pair.residual()));
    }
    Ok(groups
        .into_iter()
        .map(|(scope, series)| ResidualPanel { scope, series })
        .collect())
}
