//! Ingestion of hub-style forecast and truth tables and their alignment
//! into per-model (forecast, observed) panels.

mod align;
mod parse;
mod points;
mod record;
mod table;

pub use align::{align, AlignFilter, AlignedPanel, AlignedPair};
pub use parse::{
    parse_forecast_csv, parse_truth_csv, ColumnMapping, CsvFormat, ParsedForecasts, ParsedTruth,
    Reject, TruthColumns, TruthFormat,
};
pub use points::{extract_points, PointExtraction, PointPanel, PointPolicy, PointValue};
pub use record::{
    horizon_weeks, ForecastKind, ForecastPanel, ForecastRecord, SeriesKey, TruthSeries, TruthTable,
};
pub use table::{
    read_aligned_csv, read_aligned_json, write_aligned_csv, write_aligned_json, AlignedRow,
};
