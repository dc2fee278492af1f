use chrono::Duration;

use super::correlation::{pairwise_correlations, CorrelationMatrix, Window};
use super::residual::ResidualPanel;
use crate::error::{Error, Result};
use crate::num::Scalar;

/// Correlation matrices over sliding windows of `window` weeks, advanced by
/// `step` weeks from the earliest target date.
///
/// A window position `p` is emitted when it fits inside the span of
/// observed weeks, i.e. `p + window <= span`. A panel shorter than one
/// window yields no matrices.
pub fn rolling_correlations<F: Scalar>(
    residuals: &ResidualPanel<F>,
    window: usize,
    step: usize,
    min_overlap: usize,
) -> Result<Vec<CorrelationMatrix<F>>> {
    if min_overlap < 2 || window < min_overlap {
        return Err(Error::param(format!(
            "rolling windows need window >= min_overlap >= 2, got window {window}, min_overlap {min_overlap}"
        )));
    }
    if step == 0 {
        return Err(Error::param("rolling step must be at least 1 week"));
    }
    let Some((first, last)) = residuals.date_range() else {
        return Ok(Vec::new());
    };
    let span = (last - first).num_days() as usize / 7 + 1;
    let mut out = Vec::new();
    let mut position = 0;
    while position + window <= span {
        let start = first + Duration::weeks(position as i64);
        let end_exclusive = start + Duration::weeks(window as i64);
        let mut corr = pairwise_correlations(&residuals.restrict_dates(start, end_exclusive), min_overlap)?;
        corr.window = Window::Rolling {
            index: out.len(),
            start,
            end: end_exclusive - Duration::days(1),
        };
        out.push(corr);
        position += step;
    }
    Ok(out)
}
