use serde::{Deserialize, Serialize};

use super::covariance::CovarianceEstimate;
use crate::error::{Error, Result};
use crate::linalg::Square;
use crate::num::Scalar;
use crate::residuals::{restrict_complete, CorrelationMatrix};
use crate::skill::Metric;

/// Default strength of the correlation penalty.
pub const DEFAULT_GAMMA: f64 = 1.0;

/// Scheme that produced a weight vector, with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case")]
pub enum WeightScheme {
    Equal,
    InverseError { metric: Metric },
    MinVariance { shrinkage: f64, nonneg: bool },
    CorrelationPenalized { gamma: f64 },
}

impl WeightScheme {
    pub fn name(&self) -> &'static str {
        match self {
            WeightScheme::Equal => "equal",
            WeightScheme::InverseError { .. } => "inverse_error",
            WeightScheme::MinVariance { .. } => "min_variance",
            WeightScheme::CorrelationPenalized { .. } => "correlation_penalized",
        }
    }

    /// `key=value` pairs joined by `;`.
    pub fn params(&self) -> String {
        match self {
            WeightScheme::Equal => String::new(),
            WeightScheme::InverseError { metric } => format!("metric={}", metric.name()),
            WeightScheme::MinVariance { shrinkage, nonneg } => format!("shrinkage={shrinkage};nonneg={nonneg}"),
            WeightScheme::CorrelationPenalized { gamma } => format!("gamma={gamma}"),
        }
    }
}

/// Model weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector<F = f64> {
    pub ids: Vec<String>,
    pub weights: Vec<F>,
    pub scheme: WeightScheme,
    /// Whether the weights were constrained to be nonnegative.
    pub nonneg: bool,
}

impl<F: Scalar> WeightVector<F> {
    /// Normalizes `raw` to sum to one.
    pub fn normalized(ids: Vec<String>, raw: Vec<F>, scheme: WeightScheme, nonneg: bool) -> Result<Self> {
        if ids.len() != raw.len() || ids.is_empty() {
            return Err(Error::param("weights must be nonempty and match the model ids"));
        }
        if raw.iter().any(|w| !w.is_finite() || (nonneg && *w < F::zero())) {
            return Err(Error::param("weights must be finite, and nonnegative when constrained"));
        }
        let total: F = raw.iter().copied().sum();
        if total == F::zero() {
            return Err(Error::param("weights sum to zero"));
        }
        Ok(Self {
            ids,
            weights: raw.into_iter().map(|w| w / total).collect(),
            scheme,
            nonneg,
        })
    }

    pub fn equal(ids: Vec<String>) -> Result<Self> {
        let raw = vec![F::one(); ids.len()];
        Self::normalized(ids, raw, WeightScheme::Equal, true)
    }

    pub fn weight_of(&self, id: &str) -> Option<F> {
        self.ids.iter().position(|m| m == id).map(|i| self.weights[i])
    }

    pub fn sum(&self) -> F {
        self.weights.iter().copied().sum()
    }
}

/// `w_i ∝ 1 / E_i`. If some errors are exactly zero, those models share
/// the weight equally and every other model gets zero.
pub fn inverse_error_weights<F: Scalar>(ids: &[String], errors: &[F], metric: Metric) -> Result<WeightVector<F>> {
    if ids.len() != errors.len() {
        return Err(Error::param("one error per model required"));
    }
    if errors.iter().any(|e| !(e.is_finite() && *e >= F::zero())) {
        return Err(Error::param("errors must be finite and nonnegative"));
    }
    let raw = if errors.iter().any(|e| *e == F::zero()) {
        errors.iter().map(|e| if *e == F::zero() { F::one() } else { F::zero() }).collect()
    } else {
        errors.iter().map(|e| F::one() / *e).collect()
    };
    WeightVector::normalized(ids.to_vec(), raw, WeightScheme::InverseError { metric }, true)
}

/// `Σ_FF⁻¹ 1` normalized, zero outside `free`.
fn equality_solution<F: Scalar>(cov: &Square<F>, free: &[usize]) -> Result<Vec<F>> {
    let sub = cov.submatrix(free);
    let l = sub.cholesky().ok_or(Error::SingularCovariance)?;
    let x = Square::cholesky_solve(&l, &vec![F::one(); free.len()]);
    let total: F = x.iter().copied().sum();
    if !(total > F::zero()) {
        return Err(Error::SingularCovariance);
    }
    let mut w = vec![F::zero(); cov.dim()];
    for (&i, xi) in free.iter().zip(x) {
        w[i] = xi / total;
    }
    Ok(w)
}

/// Primal active-set method for `min wᵀΣw` on the probability simplex,
/// started from equal weights.
fn simplex_min_variance<F: Scalar>(cov: &Square<F>) -> Result<Vec<F>> {
    let n = cov.dim();
    let mut w = vec![F::one() / F::from_usize_lossy(n); n];
    let mut free: Vec<usize> = (0..n).collect();
    let tol = F::epsilon().sqrt();
    for _ in 0..(20 * n + 100) {
        let target = equality_solution(cov, &free)?;
        if target == w {
            let g = cov.mul_vec(&w);
            let mu = cov.quad_form(&w);
            let worst = (0..n)
                .filter(|i| !free.contains(i))
                .map(|i| (i, g[i] - mu))
                .min_by(|a, b| a.1.partial_cmp(&b.1).expect("finite multipliers"));
            match worst {
                Some((i, lambda)) if lambda < -tol * mu.abs() => {
                    free.push(i);
                    free.sort_unstable();
                }
                _ => return Ok(w),
            }
            continue;
        }
        let mut step = F::one();
        let mut blocking = None;
        for &i in &free {
            let p = target[i] - w[i];
            if p < F::zero() {
                let ratio = -w[i] / p;
                if ratio < step {
                    step = ratio;
                    blocking = Some(i);
                }
            }
        }
        match blocking {
            None => w = target,
            Some(b) => {
                for &i in &free {
                    w[i] = w[i] + step * (target[i] - w[i]);
                }
                w[b] = F::zero();
                free.retain(|&i| i != b);
                // Keep the iterate on the simplex despite rounding.
                let total: F = w.iter().copied().sum();
                w.iter_mut().for_each(|x| *x = x.max(F::zero()) / total);
            }
        }
    }
    Ok(w)
}

/// Minimum-variance weights.
///
/// Unconstrained: `w ∝ Σ⁻¹·1`. With `nonneg`, the same objective on the
/// simplex, solved by an active-set iteration in fixed index order.
pub fn min_variance_weights<F: Scalar>(cov: &CovarianceEstimate<F>, nonneg: bool) -> Result<WeightVector<F>> {
    let n = cov.dim();
    if n == 0 {
        return Err(Error::InsufficientModels { needed: 1, found: 0 });
    }
    let all: Vec<usize> = (0..n).collect();
    let w = if nonneg {
        simplex_min_variance(cov.matrix())?
    } else {
        equality_solution(cov.matrix(), &all)?
    };
    let scheme = WeightScheme::MinVariance {
        shrinkage: cov.shrinkage.as_f64(),
        nonneg,
    };
    WeightVector::normalized(cov.ids.clone(), w, scheme, nonneg)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PenalizedWeights<F = f64> {
    /// Covers every model in the correlation matrix; excluded models get 0.
    pub weights: WeightVector<F>,
    /// Mean off-diagonal correlation per included model, in `weights.ids` order
    /// (`None` for excluded models).
    pub mean_correlation: Vec<Option<F>>,
    pub excluded: Vec<String>,
}

/// `w_i ∝ exp(−γ·r̄_i) / E_i`, with `r̄_i` the model's mean correlation with
/// the other included models. `γ = 0` gives inverse-error weights.
///
/// Only models whose pairwise correlations are all present take part; the
/// rest are reported in `excluded` with zero weight.
pub fn correlation_penalized_weights<F: Scalar>(
    errors: &[F],
    corr: &CorrelationMatrix<F>,
    gamma: F,
) -> Result<PenalizedWeights<F>> {
    let n = corr.len();
    if errors.len() != n {
        return Err(Error::param("one error per correlation-matrix model required"));
    }
    if !(gamma >= F::zero()) {
        return Err(Error::param(format!("gamma must be nonnegative, got {gamma}")));
    }
    if errors.iter().any(|e| !(e.is_finite() && *e >= F::zero())) {
        return Err(Error::param("errors must be finite and nonnegative"));
    }
    let all: Vec<usize> = (0..n).collect();
    let (kept, dropped) = restrict_complete(corr, &all);
    if kept.is_empty() {
        return Err(Error::CannotCluster);
    }
    let mut mean_correlation = vec![None; n];
    for &i in &kept {
        let others: Vec<F> = kept.iter().filter(|&&j| j != i).filter_map(|&j| corr.get(i, j)).collect();
        mean_correlation[i] = Some(crate::num::mean(&others).unwrap_or_else(F::zero));
    }
    let any_zero = kept.iter().any(|&i| errors[i] == F::zero());
    let raw: Vec<F> = (0..n)
        .map(|i| match mean_correlation[i] {
            None => F::zero(),
            Some(r) => {
                let inv = if any_zero {
                    if errors[i] == F::zero() { F::one() } else { F::zero() }
                } else {
                    F::one() / errors[i]
                };
                inv * (-gamma * r).exp()
            }
        })
        .collect();
    let weights = WeightVector::normalized(
        corr.ids().to_vec(),
        raw,
        WeightScheme::CorrelationPenalized { gamma: gamma.as_f64() },
        true,
    )?;
    Ok(PenalizedWeights {
        weights,
        mean_correlation,
        excluded: dropped.iter().map(|&i| corr.ids()[i].clone()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("m{i}")).collect()
    }

    fn cov(rows: Vec<Vec<f64>>) -> CovarianceEstimate<f64> {
        CovarianceEstimate::from_matrix(ids(rows.len()), rows).unwrap()
    }

    /// Objective on a simplex grid of resolution 1/steps, two or three models.
    fn grid_min(c: &CovarianceEstimate<f64>, steps: usize) -> (f64, Vec<f64>) {
        let n = c.dim();
        let mut best = (f64::INFINITY, Vec::new());
        for a in 0..=steps {
            let rest = steps - a;
            let combos: Vec<Vec<f64>> = if n == 2 {
                vec![vec![a as f64, rest as f64]]
            } else {
                (0..=rest).map(|b| vec![a as f64, b as f64, (rest - b) as f64]).collect()
            };
            for w in combos {
                let w: Vec<f64> = w.iter().map(|x| x / steps as f64).collect();
                let v = c.variance_of(&w);
                if v < best.0 {
                    best = (v, w);
                }
            }
        }
        best
    }

    #[test]
    fn inverse_error_examples() {
        let w = inverse_error_weights(&ids(2), &[1.0, 1.0], Metric::Mse).unwrap();
        assert_eq!(w.weights, vec![0.5, 0.5]);
        let w = inverse_error_weights(&ids(2), &[1.0, 3.0], Metric::Mse).unwrap();
        assert_relative_eq!(w.weights[0], 0.75, epsilon = 1e-15);
        assert_relative_eq!(w.weights[1], 0.25, epsilon = 1e-15);
        let w = inverse_error_weights(&ids(3), &[2.0f64, 2.0, 2.0], Metric::Mae).unwrap();
        assert!(w.weights.iter().all(|x| (x - 1.0 / 3.0).abs() < 1e-15));
        let w = inverse_error_weights(&ids(3), &[2.0, 0.0, 1.0], Metric::Mse).unwrap();
        assert_eq!(w.weights, vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn equicorrelated_gives_equal_weights() {
        let n = 4;
        let rows: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 2.0 } else { 0.6 }).collect()).collect();
        for nonneg in [false, true] {
            let w = min_variance_weights(&cov(rows.clone()), nonneg).unwrap();
            for x in &w.weights {
                assert_relative_eq!(*x, 0.25, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn diagonal_covariance() {
        let c = cov(vec![vec![1.0, 0.0], vec![0.0, 4.0]]);
        let w = min_variance_weights(&c, true).unwrap();
        assert_relative_eq!(w.weights[0], 0.8, epsilon = 1e-12);
        assert_relative_eq!(w.weights[1], 0.2, epsilon = 1e-12);
        let (best, grid_w) = grid_min(&c, 100);
        assert_eq!(grid_w, vec![0.8, 0.2]);
        assert_relative_eq!(c.variance_of(&w.weights), best, epsilon = 1e-12);
    }

    #[test]
    fn correlated_pair_equal_weights_lower_variance() {
        let c = cov(vec![vec![1.0, 0.9], vec![0.9, 1.0]]);
        let w = min_variance_weights(&c, true).unwrap();
        assert_relative_eq!(w.weights[0], 0.5, epsilon = 1e-12);
        assert_relative_eq!(c.variance_of(&w.weights), 0.95, epsilon = 1e-12);
        assert!((grid_min(&c, 100).0 - 0.95).abs() < 1e-12);
    }

    #[test]
    fn nonneg_constraint_binds() {
        // Unconstrained solution shorts model 1.
        let c = cov(vec![vec![1.0, 1.1, 0.2], vec![1.1, 2.0, 0.1], vec![0.2, 0.1, 3.0]]);
        let free = min_variance_weights(&c, false).unwrap();
        assert!(free.weights[1] < 0.0);
        let w = min_variance_weights(&c, true).unwrap();
        assert!(w.weights.iter().all(|x| *x >= 0.0));
        assert_relative_eq!(w.sum(), 1.0, epsilon = 1e-12);
        let (best, _) = grid_min(&c, 200);
        assert!(c.variance_of(&w.weights) <= best + 1e-12);
        assert!(c.variance_of(&free.weights) <= c.variance_of(&w.weights) + 1e-12);
    }

    #[test]
    fn two_model_closed_form() {
        let (s1, s2, s12) = (1.5, 0.7, 0.3);
        let c = cov(vec![vec![s1, s12], vec![s12, s2]]);
        let w = min_variance_weights(&c, false).unwrap();
        assert_relative_eq!(w.weights[0], (s2 - s12) / (s1 + s2 - 2.0 * s12), epsilon = 1e-10);
    }

    #[test]
    fn singular_covariance_reported() {
        let c = cov(vec![vec![1.0, 1.0], vec![1.0, 1.0]]);
        assert!(matches!(min_variance_weights(&c, false), Err(Error::SingularCovariance)));
    }

    fn corr(r: &[Vec<Option<f64>>]) -> CorrelationMatrix<f64> {
        CorrelationMatrix::from_dense(ids(r.len()), r.to_vec()).unwrap()
    }

    #[test]
    fn penalized_reduces_to_inverse_error() {
        let c = corr(&[
            vec![Some(1.0), Some(0.3), Some(0.8)],
            vec![Some(0.3), Some(1.0), Some(-0.2)],
            vec![Some(0.8), Some(-0.2), Some(1.0)],
        ]);
        let errors = [1.0, 2.5, 0.7];
        let p = correlation_penalized_weights(&errors, &c, 0.0).unwrap();
        let inv = inverse_error_weights(&ids(3), &errors, Metric::Mse).unwrap();
        assert_eq!(p.weights.weights, inv.weights);
    }

    #[test]
    fn penalized_weight_ratio() {
        // Mean correlations (0.9, 0.1, 0.15).
        let c = corr(&[
            vec![Some(1.0), Some(0.85), Some(0.95)],
            vec![Some(0.85), Some(1.0), Some(-0.65)],
            vec![Some(0.95), Some(-0.65), Some(1.0)],
        ]);
        let p = correlation_penalized_weights(&[1.0, 1.0, 1.0], &c, 1.0).unwrap();
        let r: Vec<f64> = p.mean_correlation.iter().map(|x| x.unwrap()).collect();
        assert_relative_eq!(r[0], 0.9, epsilon = 1e-15);
        assert_relative_eq!(r[1], 0.1, epsilon = 1e-15);
        let w = &p.weights.weights;
        assert_relative_eq!(w[0] / w[1], (-0.8f64).exp(), epsilon = 1e-12);
        let total = (-0.9f64).exp() + (-0.1f64).exp() + (-0.15f64).exp();
        assert_relative_eq!(w[0], (-0.9f64).exp() / total, epsilon = 1e-15);

        let two = corr(&[vec![Some(1.0), Some(0.4)], vec![Some(0.4), Some(1.0)]]);
        let p = correlation_penalized_weights(&[1.0, 1.0], &two, 3.0).unwrap();
        assert_eq!(p.weights.weights, vec![0.5, 0.5]);
    }

    #[test]
    fn penalized_excludes_incomplete_models() {
        let c = corr(&[
            vec![Some(1.0), Some(0.3), None],
            vec![Some(0.3), Some(1.0), Some(0.2)],
            vec![None, Some(0.2), Some(1.0)],
        ]);
        let p = correlation_penalized_weights(&[1.0, 1.0, 1.0], &c, 1.0).unwrap();
        assert_eq!(p.excluded, vec!["m2"]);
        assert_eq!(p.weights.weights[2], 0.0);
        assert_relative_eq!(p.weights.sum(), 1.0, epsilon = 1e-15);
    }
}
