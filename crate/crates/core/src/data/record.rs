use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Scalar;

/// Point or quantile submission.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForecastKind {
    Point,
    /// Quantile at the given level in (0, 1).
    Quantile(f64),
}

impl ForecastKind {
    pub fn is_median(&self) -> bool {
        matches!(self, ForecastKind::Quantile(level) if *level == 0.5)
    }
}

/// One row of a forecast submission.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastRecord<F = f64> {
    pub model_id: String,
    pub location: String,
    pub forecast_date: NaiveDate,
    pub target_date: NaiveDate,
    /// Weeks ahead, rounded up for non-weekly gaps.
    pub horizon: u32,
    pub kind: ForecastKind,
    pub value: F,
}

impl<F: Scalar> ForecastRecord<F> {
    pub fn key(&self) -> SeriesKey {
        SeriesKey::new(self.location.clone(), self.horizon, self.target_date)
    }
}

/// Horizon in weeks between a forecast date and its target date.
///
/// Returns `(weeks, weekly)`; `weekly` is false when the gap is not a whole
/// number of weeks, in which case the horizon is rounded up. `None` when the
/// target does not lie after the forecast date.
pub fn horizon_weeks(forecast_date: NaiveDate, target_date: NaiveDate) -> Option<(u32, bool)> {
    let days = (target_date - forecast_date).num_days();
    if days < 1 {
        return None;
    }
    let weeks = (days + 6) / 7;
    Some((u32::try_from(weeks).ok()?, days % 7 == 0))
}

/// Analysis key for a single forecast target.
///
/// Ordering is by target date first so canonical tables come out date-ascending.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SeriesKey {
    pub target_date: NaiveDate,
    pub location: String,
    pub horizon: u32,
}

impl SeriesKey {
    pub fn new(location: impl Into<String>, horizon: u32, target_date: NaiveDate) -> Self {
        Self {
            target_date,
            location: location.into(),
            horizon,
        }
    }
}

/// Submitted records grouped by model.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ForecastPanel<F = f64> {
    models: BTreeMap<String, Vec<ForecastRecord<F>>>,
    /// Number of records whose forecast/target gap was not a whole number of weeks.
    pub non_weekly: usize,
}

impl<F: Scalar> ForecastPanel<F> {
    /// Builds a panel from records. Records must already satisfy the record
    /// invariants; duplicate point entries are rejected.
    pub fn from_records(records: impl IntoIterator<Item = ForecastRecord<F>>) -> Result<Self> {
        let mut panel = Self::default();
        let mut seen = BTreeSet::new();
        for record in records {
            if record.horizon < 1 {
                return Err(Error::param(format!(
                    "record for {} has horizon {}",
                    record.model_id, record.horizon
                )));
            }
            if record.kind == ForecastKind::Point
                && !seen.insert((record.model_id.clone(), record.key()))
            {
                return Err(Error::param(format!(
                    "duplicate point forecast for model {} at {:?}",
                    record.model_id,
                    record.key()
                )));
            }
            panel.push_unchecked(record);
        }
        Ok(panel)
    }

    pub(crate) fn push_unchecked(&mut self, record: ForecastRecord<F>) {
        self.models
            .entry(record.model_id.clone())
            .or_default()
            .push(record);
    }

    pub fn model_ids(&self) -> impl Iterator<Item = &str> {
        self.models.keys().map(String::as_str)
    }

    pub fn model_count(&self) -> usize {
        self.models.len()
    }

    pub fn records(&self, model: &str) -> &[ForecastRecord<F>] {
        self.models.get(model).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[ForecastRecord<F>])> {
        self.models.iter().map(|(m, r)| (m.as_str(), r.as_slice()))
    }

    /// Distinct (location, horizon, target date) keys across all models.
    pub fn keys(&self) -> BTreeSet<SeriesKey> {
        self.models
            .values()
            .flat_map(|records| records.iter().map(ForecastRecord::key))
            .collect()
    }

    pub fn key_count(&self) -> usize {
        self.keys().len()
    }

    pub fn record_count(&self) -> usize {
        self.models.values().map(Vec::len).sum()
    }
}

/// Observed values for one location, dates strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthSeries<F = f64> {
    pub location: String,
    observations: Vec<(NaiveDate, F)>,
}

impl<F: Scalar> TruthSeries<F> {
    pub fn new(location: impl Into<String>, observations: Vec<(NaiveDate, F)>) -> Result<Self> {
        let location = location.into();
        if observations.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::param(format!(
                "truth dates for {location} are not strictly increasing"
            )));
        }
        if let Some((d, v)) = observations.iter().find(|(_, v)| !v.is_finite() || *v < F::zero()) {
            return Err(Error::param(format!(
                "truth value {v} at {d} for {location} is not a nonnegative number"
            )));
        }
        Ok(Self {
            location,
            observations,
        })
    }

    /// Weekly series starting at `start`.
    pub fn weekly(location: impl Into<String>, start: NaiveDate, values: &[F]) -> Result<Self> {
        let obs = values
            .iter()
            .enumerate()
            .map(|(i, v)| (start + chrono::Duration::weeks(i as i64), *v))
            .collect();
        Self::new(location, obs)
    }

    pub fn observations(&self) -> &[(NaiveDate, F)] {
        &self.observations
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn get(&self, date: NaiveDate) -> Option<F> {
        self.observations
            .binary_search_by_key(&date, |(d, _)| *d)
            .ok()
            .map(|i| self.observations[i].1)
    }
}

/// Truth series for every location.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TruthTable<F = f64> {
    series: BTreeMap<String, TruthSeries<F>>,
}

impl<F: Scalar> TruthTable<F> {
    pub fn new() -> Self {
        Self {
            series: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, series: TruthSeries<F>) {
        self.series.insert(series.location.clone(), series);
    }

    pub fn get(&self, location: &str) -> Option<&TruthSeries<F>> {
        self.series.get(location)
    }

    pub fn observed(&self, location: &str, date: NaiveDate) -> Option<F> {
        self.series.get(location)?.get(date)
    }

    pub fn iter(&self) -> impl Iterator<Item = &TruthSeries<F>> {
        self.series.values()
    }

    pub fn is_empty(&self) -> bool {
        self.series.values().all(TruthSeries::is_empty)
    }
}

impl<F: Scalar> FromIterator<TruthSeries<F>> for TruthTable<F> {
    fn from_iter<I: IntoIterator<Item = TruthSeries<F>>>(iter: I) -> Self {
        let mut table = Self::new();
        for s in iter {
            table.insert(s);
        }
        table
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    #[test]
    fn weekly_horizon() {
        assert_eq!(horizon_weeks(d("2020-07-06"), d("2020-07-13")), Some((1, true)));
        // Hub layout: Monday forecast, Saturday target end date.
        assert_eq!(horizon_weeks(d("2020-07-06"), d("2020-07-11")), Some((1, false)));
        assert_eq!(horizon_weeks(d("2020-07-06"), d("2020-07-27")), Some((3, true)));
        assert_eq!(horizon_weeks(d("2020-07-06"), d("2020-07-06")), None);
    }

    #[test]
    fn truth_rejects_unsorted_dates() {
        let err = TruthSeries::new("US", vec![(d("2020-01-08"), 1.0), (d("2020-01-01"), 2.0)]);
        assert!(err.is_err());
        let err = TruthSeries::new("US", vec![(d("2020-01-01"), -1.0)]);
        assert!(err.is_err());
    }

    #[test]
    fn duplicate_point_rejected() {
        let rec = ForecastRecord {
            model_id: "A".into(),
            location: "US".into(),
            forecast_date: d("2020-07-06"),
            target_date: d("2020-07-13"),
            horizon: 1,
            kind: ForecastKind::Point,
            value: 1.0,
        };
        assert!(ForecastPanel::from_records(vec![rec.clone(), rec]).is_err());
    }
}
