use crate::error::{Error, Result};
use crate::linalg::Square;
use crate::num::Scalar;
use crate::residuals::ResidualPanel;

/// Default blend toward the diagonal.
pub const DEFAULT_SHRINKAGE: f64 = 0.1;

/// Shrunk sample covariance of model residuals.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceEstimate<F = f64> {
    pub ids: Vec<String>,
    matrix: Square<F>,
    pub shrinkage: F,
    /// Common dates the sample covariance was computed on.
    pub sample_size: usize,
}

impl<F: Scalar> CovarianceEstimate<F> {
    /// Wraps an explicit matrix; it must be symmetric with a positive diagonal.
    pub fn from_matrix(ids: Vec<String>, rows: Vec<Vec<F>>) -> Result<Self> {
        let n = ids.len();
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(Error::param("covariance matrix must be square and match the model ids"));
        }
        for i in 0..n {
            if !(rows[i][i] > F::zero()) {
                return Err(Error::param(format!("covariance diagonal {i} is not positive")));
            }
            for j in 0..i {
                let scale = rows[i][i].max(rows[j][j]);
                if (rows[i][j] - rows[j][i]).abs() > scale * F::lit(1e-12) {
                    return Err(Error::param(format!("covariance not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(Self {
            ids,
            matrix: Square::from_rows(&rows),
            shrinkage: F::zero(),
            sample_size: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.ids.len()
    }

    pub fn get(&self, i: usize, j: usize) -> F {
        self.matrix.get(i, j)
    }

    pub fn rows(&self) -> Vec<Vec<F>> {
        self.matrix.rows()
    }

    pub(crate) fn matrix(&self) -> &Square<F> {
        &self.matrix
    }

    /// `wᵀ Σ w`.
    pub fn variance_of(&self, weights: &[F]) -> F {
        self.matrix.quad_form(weights)
    }

    /// Smallest eigenvalue; nonnegative up to rounding for a valid estimate.
    pub fn min_eigenvalue(&self) -> F {
        self.matrix.symmetric_eigenvalues().first().copied().unwrap_or_else(F::zero)
    }
}

/// Sample covariance (denominator `n − 1`) over the dates common to every
/// model, blended as `(1 − λ)·Σ̂ + λ·diag(Σ̂)`.
pub fn estimate_covariance<F: Scalar>(residuals: &ResidualPanel<F>, shrinkage: F) -> Result<CovarianceEstimate<F>> {
    if !(shrinkage >= F::zero() && shrinkage <= F::one()) {
        return Err(Error::param(format!("shrinkage {shrinkage} outside [0, 1]")));
    }
    let ids = residuals.model_ids();
    let (_, rows) = residuals.complete_case(&ids);
    if rows.len() < 2 {
        return Err(Error::InsufficientOverlap {
            needed: 2,
            found: rows.len(),
        });
    }
    let n = ids.len();
    let t = F::from_usize_lossy(rows.len());
    let means: Vec<F> = (0..n).map(|j| rows.iter().map(|r| r[j]).sum::<F>() / t).collect();
    let mut matrix = Square::zeros(n);
    for i in 0..n {
        for j in 0..=i {
            let s: F = rows.iter().map(|r| (r[i] - means[i]) * (r[j] - means[j])).sum();
            let mut c = s / (t - F::one());
            if i != j {
                c = c * (F::one() - shrinkage);
            }
            matrix.set(i, j, c);
            matrix.set(j, i, c);
        }
    }
    if let Some(i) = (0..n).find(|&i| !(matrix.get(i, i) > F::zero())) {
        return Err(Error::param(format!(
            "residuals of {} have zero variance on the common dates",
            ids[i]
        )));
    }
    Ok(CovarianceEstimate {
        ids,
        matrix,
        shrinkage,
        sample_size: rows.len(),
    })
}
