use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::residual::ResidualPanel;
use crate::data::SeriesKey;
use crate::error::{Error, Result};
use crate::num::Scalar;

/// One year of weekly points.
pub const DEFAULT_MIN_OVERLAP: usize = 52;

/// Period a correlation matrix was computed over.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Window {
    Full {
        start: Option<NaiveDate>,
        end: Option<NaiveDate>,
    },
    /// Rolling window `index`, covering `start..=end`.
    Rolling {
        index: usize,
        start: NaiveDate,
        end: NaiveDate,
    },
}

impl Window {
    pub fn bounds(&self) -> (Option<NaiveDate>, Option<NaiveDate>) {
        match *self {
            Window::Full { start, end } => (start, end),
            Window::Rolling { start, end, .. } => (Some(start), Some(end)),
        }
    }
}

/// Pearson product-moment correlation of two equal-length series.
///
/// Uses centred sums in index order, so results do not depend on how
/// callers schedule pairs.
pub fn pearson<F: Scalar>(x: &[F], y: &[F]) -> Result<F> {
    if x.len() != y.len() {
        return Err(Error::param(format!("series lengths differ: {} vs {}", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::param("pearson needs at least 2 points"));
    }
    let n = F::from_usize_lossy(x.len());
    let mx = x.iter().copied().sum::<F>() / n;
    let my = y.iter().copied().sum::<F>() / n;
    let (mut sxy, mut sxx, mut syy) = (F::zero(), F::zero(), F::zero());
    for (&a, &b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy = sxy + dx * dy;
        sxx = sxx + dx * dx;
        syy = syy + dy * dy;
    }
    if sxx <= F::zero() || syy <= F::zero() {
        return Err(Error::UndefinedCorrelation);
    }
    let r = sxy / (sxx.sqrt() * syy.sqrt());
    Ok(r.max(-F::one()).min(F::one()))
}

/// Symmetric matrix of pairwise correlations with per-pair overlap counts.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix<F = f64> {
    ids: Vec<String>,
    entries: Vec<Option<F>>,
    overlap: Vec<usize>,
    pub window: Window,
    pub min_overlap: usize,
    /// Pairs whose correlation was undefined (zero-variance residuals).
    pub diagnostics: Vec<String>,
}

impl<F: Scalar> CorrelationMatrix<F> {
    /// Builds a matrix from a dense table of entries; diagonal entries are
    /// taken as given. Every present entry must lie in [−1, 1] and the
    /// table must be symmetric.
    pub fn from_dense(ids: Vec<String>, rows: Vec<Vec<Option<F>>>) -> Result<Self> {
        let n = ids.len();
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(Error::param("correlation table is not square"));
        }
        for i in 0..n {
            for j in 0..n {
                if rows[i][j] != rows[j][i] {
                    return Err(Error::param(format!("correlation table not symmetric at ({i}, {j})")));
                }
                if let Some(r) = rows[i][j] {
                    if !(r >= -F::one() && r <= F::one()) {
                        return Err(Error::param(format!("correlation {r} outside [-1, 1]")));
                    }
                }
            }
        }
        Ok(Self {
            ids,
            entries: rows.into_iter().flatten().collect(),
            overlap: vec![0; n * n],
            window: Window::Full { start: None, end: None },
            min_overlap: 0,
            diagnostics: Vec::new(),
        })
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|m| m == id)
    }

    pub fn get(&self, i: usize, j: usize) -> Option<F> {
        self.entries[i * self.len() + j]
    }

    pub fn overlap(&self, i: usize, j: usize) -> usize {
        self.overlap[i * self.len() + j]
    }

    /// Present entries with `i < j`.
    pub fn offdiagonal(&self) -> impl Iterator<Item = (usize, usize, F)> + '_ {
        let n = self.len();
        (0..n).flat_map(move |i| (i + 1..n).filter_map(move |j| self.get(i, j).map(|r| (i, j, r))))
    }

    /// Dense rows, `None` for missing entries.
    pub fn to_dense(&self) -> Vec<Vec<Option<F>>> {
        self.entries.chunks(self.len().max(1)).map(<[_]>::to_vec).collect()
    }
}

fn intersect<F: Scalar>(a: &[(SeriesKey, F)], b: &[(SeriesKey, F)]) -> (Vec<F>, Vec<F>) {
    let (mut i, mut j) = (0, 0);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                xs.push(a[i].1);
                ys.push(b[j].1);
                i += 1;
                j += 1;
            }
        }
    }
    (xs, ys)
}

/// Pearson correlation for every pair of models on that pair's own common keys.
///
/// Entries with fewer than `min_overlap` common keys, or with a
/// zero-variance side, are missing. The diagonal is 1 for every model with
/// at least two residuals.
pub fn pairwise_correlations<F: Scalar>(residuals: &ResidualPanel<F>, min_overlap: usize) -> Result<CorrelationMatrix<F>> {
    if min_overlap < 2 {
        return Err(Error::param(format!("min_overlap must be at least 2, got {min_overlap}")));
    }
    let ids = residuals.model_ids();
    let series: Vec<&[(SeriesKey, F)]> = ids.iter().map(|m| residuals.series(m).unwrap_or(&[])).collect();
    let n = ids.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let computed: Vec<(usize, Option<F>, bool)> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let (x, y) = intersect(series[i], series[j]);
            let overlap = x.len();
            if overlap < min_overlap {
                return (overlap, None, false);
            }
            match pearson(&x, &y) {
                Ok(r) => (overlap, Some(r), false),
                Err(_) => (overlap, None, true),
            }
        })
        .collect();

    let mut entries = vec![None; n * n];
    let mut overlap = vec![0; n * n];
    let mut diagnostics = Vec::new();
    for (i, s) in series.iter().enumerate() {
        overlap[i * n + i] = s.len();
        if s.len() >= 2 {
            entries[i * n + i] = Some(F::one());
        }
    }
    for (&(i, j), &(count, r, undefined)) in pairs.iter().zip(&computed) {
        overlap[i * n + j] = count;
        overlap[j * n + i] = count;
        entries[i * n + j] = r;
        entries[j * n + i] = r;
        if undefined {
            diagnostics.push(format!(
                "correlation of {} and {} undefined: zero-variance residuals on {count} common dates",
                ids[i], ids[j]
            ));
        }
    }
    let (start, end) = residuals.date_range().map_or((None, None), |(a, b)| (Some(a), Some(b)));
    Ok(CorrelationMatrix {
        ids,
        entries,
        overlap,
        window: Window::Full { start, end },
        min_overlap,
        diagnostics,
    })
}

/// Mean over present off-diagonal entries, each unordered pair once.
pub fn average_offdiagonal<F: Scalar>(corr: &CorrelationMatrix<F>) -> Result<F> {
    let values: Vec<F> = corr.offdiagonal().map(|(_, _, r)| r).collect();
    crate::num::mean(&values).ok_or(Error::Undefined("no present off-diagonal correlations"))
}

/// Mean over models of each model's mean present off-diagonal correlation.
pub fn average_offdiagonal_by_model<F: Scalar>(corr: &CorrelationMatrix<F>) -> Result<F> {
    let n = corr.len();
    let per_model: Vec<F> = (0..n)
        .filter_map(|i| {
            let row: Vec<F> = (0..n).filter(|&j| j != i).filter_map(|j| corr.get(i, j)).collect();
            crate::num::mean(&row)
        })
        .collect();
    crate::num::mean(&per_model).ok_or(Error::Undefined("no present off-diagonal correlations"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn start() -> NaiveDate {
        NaiveDate::from_ymd_opt(2020, 7, 4).unwrap()
    }

    /// One-pass textbook formula, kept apart from the centred implementation.
    fn pearson_oracle(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len() as f64;
        let sx: f64 = x.iter().sum();
        let sy: f64 = y.iter().sum();
        let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
        let sxx: f64 = x.iter().map(|a| a * a).sum();
        let syy: f64 = y.iter().map(|b| b * b).sum();
        (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt())
    }

    #[test]
    fn pearson_basic_cases() {
        assert_relative_eq!(pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0);
        assert_relative_eq!(pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(), -1.0);
        let (x, y) = ([1.0, 2.0, 4.0], [2.0, 2.0, 5.0]);
        let expected = pearson_oracle(&x, &y);
        // 5 / sqrt(28) by hand.
        assert_relative_eq!(expected, 0.944_911_182_523_068, epsilon = 1e-14);
        assert_relative_eq!(pearson(&x, &y).unwrap(), expected, epsilon = 1e-14);
    }

    #[test]
    fn pearson_errors() {
        assert!(matches!(pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), Err(Error::UndefinedCorrelation)));
        assert!(pearson(&[1.0], &[1.0]).is_err());
        assert!(pearson(&[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn pearson_in_f32() {
        let r = pearson(&[1.0f32, 2.0, 4.0], &[2.0, 2.0, 5.0]).unwrap();
        assert!((r - 0.944_911_2).abs() < 1e-6);
    }

    fn wave(n: usize, phase: f64) -> Vec<Option<f64>> {
        (0..n).map(|i| Some((i as f64 * 0.7 + phase).sin() + 0.01 * i as f64)).collect()
    }

    #[test]
    fn identical_series_long_overlap_present() {
        let s = wave(60, 0.0);
        let panel = ResidualPanel::weekly(start(), vec![("A", s.clone()), ("B", s)]);
        let corr = pairwise_correlations(&panel, 52).unwrap();
        assert_relative_eq!(corr.get(0, 1).unwrap(), 1.0, epsilon = 1e-12);
        assert_eq!(corr.overlap(0, 1), 60);
        assert_eq!(corr.get(0, 0), Some(1.0));
    }

    #[test]
    fn short_overlap_missing() {
        let mut b = vec![None; 60];
        for (i, v) in wave(60, 1.0).into_iter().enumerate().take(10) {
            b[i] = v;
        }
        let panel = ResidualPanel::weekly(start(), vec![("A", wave(60, 0.0)), ("B", b)]);
        let corr = pairwise_correlations(&panel, 52).unwrap();
        assert_eq!(corr.get(0, 1), None);
        assert_eq!(corr.overlap(1, 0), 10);
        assert!(average_offdiagonal(&corr).is_err());
    }

    #[test]
    fn each_pair_uses_its_own_intersection() {
        // A: weeks 0..40, B: 10..50, C: 25..60.
        let full: Vec<Vec<Option<f64>>> = (0..3).map(|m| wave(60, m as f64 * 0.9)).collect();
        let mask = |v: &Vec<Option<f64>>, lo: usize, hi: usize| -> Vec<Option<f64>> {
            v.iter().enumerate().map(|(i, x)| if (lo..hi).contains(&i) { *x } else { None }).collect()
        };
        let ranges = [(0, 40), (10, 50), (25, 60)];
        let series: Vec<_> = (0..3).map(|m| mask(&full[m], ranges[m].0, ranges[m].1)).collect();
        let panel = ResidualPanel::weekly(
            start(),
            vec![("A", series[0].clone()), ("B", series[1].clone()), ("C", series[2].clone())],
        );
        let corr = pairwise_correlations(&panel, 5).unwrap();
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            let (lo, hi) = (ranges[i].0.max(ranges[j].0), ranges[i].1.min(ranges[j].1));
            let x: Vec<f64> = (lo..hi).map(|t| full[i][t].unwrap()).collect();
            let y: Vec<f64> = (lo..hi).map(|t| full[j][t].unwrap()).collect();
            assert_eq!(corr.overlap(i, j), hi - lo);
            assert_relative_eq!(corr.get(i, j).unwrap(), pearson_oracle(&x, &y), epsilon = 1e-12);
            assert_eq!(corr.get(i, j), corr.get(j, i));
        }
    }

    #[test]
    fn zero_variance_pair_is_missing_with_note() {
        let panel = ResidualPanel::weekly(start(), vec![("A", vec![Some(1.0); 5]), ("B", wave(5, 0.0))]);
        let corr = pairwise_correlations(&panel, 2).unwrap();
        assert_eq!(corr.get(0, 1), None);
        assert_eq!(corr.diagnostics.len(), 1);
    }

    #[test]
    fn averages() {
        let ids: Vec<String> = ["a", "b", "c"].map(String::from).to_vec();
        let m = |ab, ac, bc| {
            CorrelationMatrix::from_dense(
                ids.clone(),
                vec![
                    vec![Some(1.0), ab, ac],
                    vec![ab, Some(1.0), bc],
                    vec![ac, bc, Some(1.0)],
                ],
            )
            .unwrap()
        };
        assert_relative_eq!(average_offdiagonal(&m(Some(0.2), Some(0.4), Some(0.6))).unwrap(), 0.4, epsilon = 1e-15);
        assert_relative_eq!(average_offdiagonal(&m(Some(0.7), None, None)).unwrap(), 0.7);
        let two = CorrelationMatrix::from_dense(
            ids[..2].to_vec(),
            vec![vec![Some(1.0), Some(0.5)], vec![Some(0.5), Some(1.0)]],
        )
        .unwrap();
        assert_eq!(average_offdiagonal(&two).unwrap(), 0.5);
        // a: 0.7, b: mean(0.7, 0.1) = 0.4, c: 0.1 -> 0.4
        assert_relative_eq!(
            average_offdiagonal_by_model(&m(Some(0.7), None, Some(0.1))).unwrap(),
            0.4,
            epsilon = 1e-15
        );
    }

    #[test]
    fn min_overlap_below_two_rejected() {
        let panel = ResidualPanel::weekly(start(), vec![("A", wave(5, 0.0))]);
        assert!(matches!(pairwise_correlations(&panel, 1), Err(Error::Parameter(_))));
    }
}
