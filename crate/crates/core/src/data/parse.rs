use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::record::{horizon_weeks, ForecastKind, ForecastPanel, ForecastRecord, TruthSeries, TruthTable};
use crate::error::{Error, Result};
use crate::num::Scalar;

/// Header names for forecast submissions. Defaults follow the public hub layout.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ColumnMapping {
    pub model: String,
    pub forecast_date: String,
    pub target_date: String,
    pub location: String,
    /// Optional; when absent from the header every row is a point forecast.
    pub kind: String,
    /// Required only for quantile rows.
    pub quantile: String,
    pub value: String,
}

impl Default for ColumnMapping {
    fn default() -> Self {
        Self {
            model: "model".into(),
            forecast_date: "forecast_date".into(),
            target_date: "target_end_date".into(),
            location: "location".into(),
            kind: "type".into(),
            quantile: "quantile".into(),
            value: "value".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CsvFormat {
    pub delimiter: char,
    pub columns: ColumnMapping,
}

impl Default for CsvFormat {
    fn default() -> Self {
        Self {
            delimiter: ',',
            columns: ColumnMapping::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TruthColumns {
    pub location: String,
    pub date: String,
    pub value: String,
}

impl Default for TruthColumns {
    fn default() -> Self {
        Self {
            location: "location".into(),
            date: "date".into(),
            value: "value".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TruthFormat {
    pub delimiter: char,
    pub columns: TruthColumns,
}

impl Default for TruthFormat {
    fn default() -> Self {
        Self {
            delimiter: ',',
            columns: TruthColumns::default(),
        }
    }
}

/// A data row that was not admitted into the panel.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Reject {
    /// 1-based line number in the source, header included.
    pub line: u64,
    pub reason: String,
    pub fields: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct ParsedForecasts<F = f64> {
    pub panel: ForecastPanel<F>,
    pub rejects: Vec<Reject>,
}

#[derive(Debug, Clone)]
pub struct ParsedTruth<F = f64> {
    pub truth: TruthTable<F>,
    pub rejects: Vec<Reject>,
}

fn delimiter_byte(c: char) -> Result<u8> {
    u8::try_from(c)
        .ok()
        .filter(u8::is_ascii)
        .ok_or_else(|| Error::param(format!("delimiter {c:?} is not a single ASCII character")))
}

fn reader<R: Read>(source: R, delimiter: char) -> Result<csv::Reader<R>> {
    Ok(csv::ReaderBuilder::new()
        .delimiter(delimiter_byte(delimiter)?)
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source))
}

fn column(headers: &csv::StringRecord, name: &str) -> Option<usize> {
    headers.iter().position(|h| h == name)
}

fn required(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    column(headers, name).ok_or_else(|| Error::MissingColumn(name.to_string()))
}

fn field<'a>(row: &'a csv::StringRecord, idx: usize, name: &str) -> Result<&'a str, String> {
    match row.get(idx) {
        Some(s) if !s.is_empty() => Ok(s),
        _ => Err(format!("missing {name}")),
    }
}

fn parse_date(s: &str, name: &str) -> Result<NaiveDate, String> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").map_err(|_| format!("unparseable {name} '{s}'"))
}

fn parse_value<F: Scalar>(s: &str) -> Result<F, String> {
    let v: f64 = s.parse().map_err(|_| format!("unparseable value '{s}'"))?;
    let v = F::from_f64(v).filter(|v| v.is_finite());
    match v {
        Some(v) if v >= F::zero() => Ok(v),
        Some(_) => Err(format!("negative value '{s}'")),
        None => Err(format!("non-finite value '{s}'")),
    }
}

fn line_of(row: &csv::StringRecord) -> u64 {
    row.position().map(|p| p.line()).unwrap_or(0)
}

fn fields_of(row: &csv::StringRecord) -> Vec<String> {
    row.iter().map(str::to_string).collect()
}

struct Columns {
    model: usize,
    forecast_date: usize,
    target_date: usize,
    location: usize,
    kind: Option<usize>,
    quantile: Option<usize>,
    value: usize,
}

fn parse_row<F: Scalar>(row: &csv::StringRecord, cols: &Columns) -> Result<(ForecastRecord<F>, bool), String> {
    let model_id = field(row, cols.model, "model")?.to_string();
    let location = field(row, cols.location, "location")?.to_string();
    let forecast_date = parse_date(field(row, cols.forecast_date, "forecast date")?, "forecast date")?;
    let target_date = parse_date(field(row, cols.target_date, "target date")?, "target date")?;
    let (horizon, weekly) = horizon_weeks(forecast_date, target_date)
        .ok_or_else(|| "target date does not follow forecast date".to_string())?;
    let kind = match cols.kind.map(|i| row.get(i).unwrap_or("")) {
        None => ForecastKind::Point,
        Some(t) if t.eq_ignore_ascii_case("point") => ForecastKind::Point,
        Some(t) if t.eq_ignore_ascii_case("quantile") => {
            let idx = cols.quantile.ok_or_else(|| "quantile row without quantile column".to_string())?;
            let raw = field(row, idx, "quantile level")?;
            let level: f64 = raw
                .parse()
                .map_err(|_| format!("unparseable quantile level '{raw}'"))?;
            if !(level > 0.0 && level < 1.0) {
                return Err(format!("quantile level {level} outside (0, 1)"));
            }
            ForecastKind::Quantile(level)
        }
        Some(t) => return Err(format!("unknown forecast type '{t}'")),
    };
    let value = parse_value(field(row, cols.value, "value")?)?;
    Ok((
        ForecastRecord {
            model_id,
            location,
            forecast_date,
            target_date,
            horizon,
            kind,
            value,
        },
        weekly,
    ))
}

/// Reads a delimited forecast table.
///
/// Rows that fail to parse, duplicate an earlier point or quantile entry, or
/// belong to a quantile set that decreases in level are returned in
/// `rejects` rather than dropped silently.
pub fn parse_forecast_csv<F: Scalar, R: Read>(source: R, format: &CsvFormat) -> Result<ParsedForecasts<F>> {
    let mut rdr = reader(source, format.delimiter)?;
    let headers = rdr.headers()?.clone();
    if headers.is_empty() || (headers.len() == 1 && headers.get(0) == Some("")) {
        return Err(Error::EmptyInput);
    }
    let map = &format.columns;
    let cols = Columns {
        model: required(&headers, &map.model)?,
        forecast_date: required(&headers, &map.forecast_date)?,
        target_date: required(&headers, &map.target_date)?,
        location: required(&headers, &map.location)?,
        kind: column(&headers, &map.kind),
        quantile: column(&headers, &map.quantile),
        value: required(&headers, &map.value)?,
    };

    let mut rejects = Vec::new();
    let mut accepted: Vec<(ForecastRecord<F>, bool, u64, Vec<String>)> = Vec::new();
    let mut rows = 0usize;
    for row in rdr.records() {
        let row = row?;
        rows += 1;
        match parse_row::<F>(&row, &cols) {
            Ok((rec, weekly)) => accepted.push((rec, weekly, line_of(&row), fields_of(&row))),
            Err(reason) => rejects.push(Reject {
                line: line_of(&row),
                reason,
                fields: fields_of(&row),
            }),
        }
    }
    if rows == 0 {
        return Err(Error::EmptyInput);
    }

    // Duplicates: keep the first occurrence in file order.
    let mut seen_points = BTreeSet::new();
    let mut seen_quantiles = BTreeSet::new();
    let mut kept = Vec::with_capacity(accepted.len());
    for entry in accepted {
        let rec = &entry.0;
        let fresh = match rec.kind {
            ForecastKind::Point => seen_points.insert((rec.model_id.clone(), rec.key())),
            ForecastKind::Quantile(level) => seen_quantiles.insert((
                rec.model_id.clone(),
                rec.location.clone(),
                rec.forecast_date,
                rec.target_date,
                level.to_bits(),
            )),
        };
        if fresh {
            kept.push(entry);
        } else {
            rejects.push(Reject {
                line: entry.2,
                reason: "duplicate entry".into(),
                fields: entry.3,
            });
        }
    }

    // Quantile sets must be nondecreasing in level.
    type QuantileGroup = (String, String, NaiveDate, NaiveDate);
    let mut groups: BTreeMap<QuantileGroup, Vec<(f64, F)>> = BTreeMap::new();
    for (rec, ..) in &kept {
        if let ForecastKind::Quantile(level) = rec.kind {
            groups
                .entry((rec.model_id.clone(), rec.location.clone(), rec.forecast_date, rec.target_date))
                .or_default()
                .push((level, rec.value));
        }
    }
    let crossing: BTreeSet<QuantileGroup> = groups
        .into_iter()
        .filter_map(|(group, mut qs)| {
            qs.sort_by(|a, b| a.0.total_cmp(&b.0));
            qs.windows(2).any(|w| w[1].1 < w[0].1).then_some(group)
        })
        .collect();

    let mut panel = ForecastPanel::default();
    for (rec, weekly, line, fields) in kept {
        if matches!(rec.kind, ForecastKind::Quantile(_))
            && crossing.contains(&(rec.model_id.clone(), rec.location.clone(), rec.forecast_date, rec.target_date))
        {
            rejects.push(Reject {
                line,
                reason: "quantile values decrease with level".into(),
                fields,
            });
            continue;
        }
        if !weekly {
            panel.non_weekly += 1;
        }
        panel.push_unchecked(rec);
    }
    rejects.sort_by_key(|r| r.line);
    Ok(ParsedForecasts { panel, rejects })
}

/// Reads a delimited truth table of (location, date, value) rows.
pub fn parse_truth_csv<F: Scalar, R: Read>(source: R, format: &TruthFormat) -> Result<ParsedTruth<F>> {
    let mut rdr = reader(source, format.delimiter)?;
    let headers = rdr.headers()?.clone();
    if headers.is_empty() || (headers.len() == 1 && headers.get(0) == Some("")) {
        return Err(Error::EmptyInput);
    }
    let loc_idx = required(&headers, &format.columns.location)?;
    let date_idx = required(&headers, &format.columns.date)?;
    let value_idx = required(&headers, &format.columns.value)?;

    let mut rejects = Vec::new();
    let mut obs: BTreeMap<String, BTreeMap<NaiveDate, F>> = BTreeMap::new();
    let mut rows = 0usize;
    for row in rdr.records() {
        let row = row?;
        rows += 1;
        let parsed = (|| {
            let loc = field(&row, loc_idx, "location")?.to_string();
            let date = parse_date(field(&row, date_idx, "date")?, "date")?;
            let value = parse_value::<F>(field(&row, value_idx, "value")?)?;
            Ok::<_, String>((loc, date, value))
        })();
        let reason = match parsed {
            Ok((loc, date, value)) => {
                match obs.entry(loc).or_default().entry(date) {
                    std::collections::btree_map::Entry::Occupied(_) => "duplicate (location, date)".to_string(),
                    std::collections::btree_map::Entry::Vacant(slot) => {
                        slot.insert(value);
                        continue;
                    }
                }
            }
            Err(reason) => reason,
        };
        rejects.push(Reject {
            line: line_of(&row),
            reason,
            fields: fields_of(&row),
        });
    }
    if rows == 0 {
        return Err(Error::EmptyInput);
    }
    let truth = obs
        .into_iter()
        .map(|(loc, series)| TruthSeries::new(loc, series.into_iter().collect()))
        .collect::<Result<TruthTable<F>>>()?;
    Ok(ParsedTruth { truth, rejects })
}
