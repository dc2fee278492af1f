use std::io::{Read, Write};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::align::{AlignedPair, AlignedPanel};
use super::record::SeriesKey;
use crate::error::Result;
use crate::num::Scalar;

/// One row of the canonical aligned-panel table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedRow {
    pub model: String,
    pub location: String,
    pub horizon: u32,
    pub target_date: NaiveDate,
    pub forecast: f64,
    pub observed: f64,
}

impl AlignedRow {
    fn from_pair<F: Scalar>(model: &str, key: &SeriesKey, pair: &AlignedPair<F>) -> Self {
        Self {
            model: model.to_string(),
            location: key.location.clone(),
            horizon: key.horizon,
            target_date: key.target_date,
            forecast: pair.forecast.as_f64(),
            observed: pair.observed.as_f64(),
        }
    }
}

fn panel_from_rows<F: Scalar>(rows: impl IntoIterator<Item = AlignedRow>) -> Result<AlignedPanel<F>> {
    AlignedPanel::from_rows(rows.into_iter().map(|r| {
        (
            r.model,
            SeriesKey::new(r.location, r.horizon, r.target_date),
            F::lit(r.forecast),
            F::lit(r.observed),
        )
    }))
}

/// Writes `(model, location, horizon, target_date, forecast, observed)` rows,
/// model ascending then date ascending.
pub fn write_aligned_csv<F: Scalar, W: Write>(panel: &AlignedPanel<F>, writer: W, delimiter: u8) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().delimiter(delimiter).from_writer(writer);
    for (model, key, pair) in panel.rows() {
        wtr.serialize(AlignedRow::from_pair(model, key, pair))?;
    }
    if panel.row_count() == 0 {
        wtr.write_record(["model", "location", "horizon", "target_date", "forecast", "observed"])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads the canonical table; extra columns (such as a residual column) are ignored.
pub fn read_aligned_csv<F: Scalar, R: Read>(reader: R, delimiter: u8) -> Result<AlignedPanel<F>> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .comment(Some(b'#'))
        .from_reader(reader);
    let rows = rdr.deserialize::<AlignedRow>().collect::<Result<Vec<_>, _>>()?;
    panel_from_rows(rows)
}

pub fn write_aligned_json<F: Scalar, W: Write>(panel: &AlignedPanel<F>, writer: W) -> Result<()> {
    let rows: Vec<_> = panel.rows().map(|(m, k, p)| AlignedRow::from_pair(m, k, p)).collect();
    serde_json::to_writer_pretty(writer, &rows)?;
    Ok(())
}

pub fn read_aligned_json<F: Scalar, R: Read>(reader: R) -> Result<AlignedPanel<F>> {
    let rows: Vec<AlignedRow> = serde_json::from_reader(reader)?;
    panel_from_rows(rows)
}
