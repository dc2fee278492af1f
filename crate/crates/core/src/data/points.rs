use std::collections::BTreeMap;

use super::record::{ForecastKind, ForecastPanel, SeriesKey};
use crate::num::Scalar;

/// Which submitted value stands in as the point forecast for a key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointPolicy {
    /// Use the point entry; fall back to the 0.5 quantile.
    #[default]
    PreferPoint,
    /// Use the 0.5 quantile; fall back to the point entry.
    MedianQuantile,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointValue<F = f64> {
    pub value: F,
    /// True when the value came from the 0.5 quantile.
    pub from_median: bool,
}

/// One point per (model, key).
pub type PointPanel<F = f64> = BTreeMap<String, BTreeMap<SeriesKey, PointValue<F>>>;

#[derive(Debug, Clone)]
pub struct PointExtraction<F = f64> {
    pub panel: PointPanel<F>,
    /// (model, key) pairs with neither a point nor a median entry.
    pub missing: Vec<(String, SeriesKey)>,
}

impl<F> PointExtraction<F> {
    pub fn missing_count(&self) -> usize {
        self.missing.len()
    }
}

/// Reduces a panel to one point value per (model, key) under `policy`.
pub fn extract_points<F: Scalar>(panel: &ForecastPanel<F>, policy: PointPolicy) -> PointExtraction<F> {
    let mut out = PointPanel::new();
    let mut missing = Vec::new();
    for (model, records) in panel.iter() {
        // (point, median) candidates per key; the latest forecast date wins
        // when rounding maps two submissions onto one key.
        let mut candidates: BTreeMap<SeriesKey, (Option<(chrono::NaiveDate, F)>, Option<(chrono::NaiveDate, F)>)> =
            BTreeMap::new();
        for rec in records {
            let slot = candidates.entry(rec.key()).or_default();
            let target = match rec.kind {
                ForecastKind::Point => &mut slot.0,
                k if k.is_median() => &mut slot.1,
                _ => continue,
            };
            if target.is_none_or(|(fd, _)| rec.forecast_date > fd) {
                *target = Some((rec.forecast_date, rec.value));
            }
        }
        let series = out.entry(model.to_string()).or_default();
        for (key, (point, median)) in candidates {
            let point = point.map(|(_, v)| PointValue { value: v, from_median: false });
            let median = median.map(|(_, v)| PointValue { value: v, from_median: true });
            let chosen = match policy {
                PointPolicy::PreferPoint => point.or(median),
                PointPolicy::MedianQuantile => median.or(point),
            };
            match chosen {
                Some(v) => {
                    series.insert(key, v);
                }
                None => missing.push((model.to_string(), key)),
            }
        }
        if series.is_empty() {
            out.remove(model);
        }
    }
    PointExtraction { panel: out, missing }
}
