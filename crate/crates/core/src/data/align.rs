use std::collections::{BTreeMap, BTreeSet};

use super::points::PointPanel;
use super::record::{SeriesKey, TruthTable};
use crate::error::{Error, Result};
use crate::num::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignedPair<F = f64> {
    pub forecast: F,
    pub observed: F,
}

impl<F: Scalar> AlignedPair<F> {
    pub fn residual(&self) -> F {
        self.forecast - self.observed
    }
}

/// Restricts alignment to a subset of horizons and locations. `None` keeps all.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AlignFilter {
    pub horizons: Option<BTreeSet<u32>>,
    pub locations: Option<BTreeSet<String>>,
}

impl AlignFilter {
    pub fn horizon(h: u32) -> Self {
        Self {
            horizons: Some(BTreeSet::from([h])),
            locations: None,
        }
    }

    pub fn accepts(&self, key: &SeriesKey) -> bool {
        self.horizons.as_ref().is_none_or(|hs| hs.contains(&key.horizon))
            && self.locations.as_ref().is_none_or(|ls| ls.contains(&key.location))
    }
}

/// Per-model (forecast, observed) pairs ordered by key.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AlignedPanel<F = f64> {
    series: BTreeMap<String, BTreeMap<SeriesKey, AlignedPair<F>>>,
}

impl<F: Scalar> AlignedPanel<F> {
    pub fn new() -> Self {
        Self {
            series: BTreeMap::new(),
        }
    }

    /// Builds a panel from rows; a repeated (model, key) is an error.
    pub fn from_rows<I, S>(rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, SeriesKey, F, F)>,
        S: Into<String>,
    {
        let mut panel = Self::new();
        for (model, key, forecast, observed) in rows {
            let model = model.into();
            if panel.insert(model.clone(), key.clone(), AlignedPair { forecast, observed }).is_some() {
                return Err(Error::param(format!("duplicate aligned entry for {model} at {key:?}")));
            }
        }
        Ok(panel)
    }

    /// Inserts one pair, returning the previous pair at that (model, key).
    pub fn insert(&mut self, model: String, key: SeriesKey, pair: AlignedPair<F>) -> Option<AlignedPair<F>> {
        self.series.entry(model).or_default().insert(key, pair)
    }

    pub fn model_ids(&self) -> Vec<String> {
        self.series.keys().cloned().collect()
    }

    pub fn model_count(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.values().all(BTreeMap::is_empty)
    }

    pub fn series(&self, model: &str) -> Option<&BTreeMap<SeriesKey, AlignedPair<F>>> {
        self.series.get(model)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &BTreeMap<SeriesKey, AlignedPair<F>>)> {
        self.series.iter().map(|(m, s)| (m.as_str(), s))
    }

    /// Rows in canonical order: model ascending, then key (date first).
    pub fn rows(&self) -> impl Iterator<Item = (&str, &SeriesKey, &AlignedPair<F>)> {
        self.series
            .iter()
            .flat_map(|(m, s)| s.iter().map(move |(k, p)| (m.as_str(), k, p)))
    }

    pub fn row_count(&self) -> usize {
        self.series.values().map(BTreeMap::len).sum()
    }

    /// Union of keys over models.
    pub fn keys(&self) -> BTreeSet<SeriesKey> {
        self.series.values().flat_map(|s| s.keys().cloned()).collect()
    }

    /// Observed value at each key, taken from the first model that has it.
    pub fn observed(&self) -> BTreeMap<SeriesKey, F> {
        let mut out = BTreeMap::new();
        for s in self.series.values() {
            for (k, p) in s {
                out.entry(k.clone()).or_insert(p.observed);
            }
        }
        out
    }

    /// Sub-panel restricted to `models` (unknown ids ignored).
    pub fn select<'a>(&self, models: impl IntoIterator<Item = &'a str>) -> Self {
        let series = models
            .into_iter()
            .filter_map(|m| self.series.get_key_value(m))
            .map(|(m, s)| (m.clone(), s.clone()))
            .collect();
        Self { series }
    }

    pub fn without(&self, model: &str) -> Self {
        let mut out = self.clone();
        out.series.remove(model);
        out
    }

    /// Sub-panel restricted to keys accepted by `keep`.
    pub fn filter_keys(&self, mut keep: impl FnMut(&SeriesKey) -> bool) -> Self {
        let series = self
            .series
            .iter()
            .map(|(m, s)| {
                let s: BTreeMap<_, _> = s.iter().filter(|(k, _)| keep(k)).map(|(k, p)| (k.clone(), *p)).collect();
                (m.clone(), s)
            })
            .filter(|(_, s)| !s.is_empty())
            .collect();
        Self { series }
    }

    /// Splits into one panel per (location, horizon).
    pub fn split_by_series(&self) -> BTreeMap<(String, u32), Self> {
        let mut out: BTreeMap<(String, u32), Self> = BTreeMap::new();
        for (model, key, pair) in self.rows() {
            out.entry((key.location.clone(), key.horizon))
                .or_default()
                .insert(model.to_string(), key.clone(), *pair);
        }
        out
    }

    /// Distinct horizons present.
    pub fn horizons(&self) -> BTreeSet<u32> {
        self.series.values().flat_map(|s| s.keys().map(|k| k.horizon)).collect()
    }
}

/// Joins point forecasts with observations.
///
/// Keeps only keys that pass `filter` and have an observed value at
/// (location, target date). Models left with no pairs are dropped.
pub fn align<F: Scalar>(points: &PointPanel<F>, truth: &TruthTable<F>, filter: &AlignFilter) -> Result<AlignedPanel<F>> {
    let mut panel = AlignedPanel::new();
    for (model, series) in points {
        for (key, point) in series {
            if !filter.accepts(key) {
                continue;
            }
            if let Some(observed) = truth.observed(&key.location, key.target_date) {
                panel.insert(
                    model.clone(),
                    key.clone(),
                    AlignedPair {
                        forecast: point.value,
                        observed,
                    },
                );
            }
        }
    }
    if panel.is_empty() {
        return Err(Error::EmptyAlignment);
    }
    Ok(panel)
}
