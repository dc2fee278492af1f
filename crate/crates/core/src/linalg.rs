//! Small dense symmetric-matrix routines for covariance work.

use crate::num::Scalar;

/// Row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Square<F> {
    n: usize,
    data: Vec<F>,
}

impl<F: Scalar> Square<F> {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![F::zero(); n * n],
        }
    }

    pub fn from_rows(rows: &[Vec<F>]) -> Self {
        let n = rows.len();
        assert!(rows.iter().all(|r| r.len() == n), "matrix must be square");
        Self {
            n,
            data: rows.iter().flatten().copied().collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> F {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: F) {
        self.data[i * self.n + j] = v;
    }

    pub fn rows(&self) -> Vec<Vec<F>> {
        self.data.chunks(self.n.max(1)).map(<[F]>::to_vec).collect()
    }

    pub fn mul_vec(&self, x: &[F]) -> Vec<F> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j) * x[j]).sum())
            .collect()
    }

    pub fn quad_form(&self, x: &[F]) -> F {
        x.iter().zip(self.mul_vec(x)).map(|(a, b)| *a * b).sum()
    }

    /// Principal submatrix on `idx`.
    pub fn submatrix(&self, idx: &[usize]) -> Self {
        let mut out = Self::zeros(idx.len());
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                out.set(a, b, self.get(i, j));
            }
        }
        out
    }

    /// Lower Cholesky factor, `None` unless the matrix is numerically
    /// positive definite.
    pub fn cholesky(&self) -> Option<Self> {
        let n = self.n;
        let scale = (0..n).map(|i| self.get(i, i).abs()).fold(F::zero(), F::max);
        let tiny = scale * F::epsilon() * F::from_usize_lossy(n.max(1));
        let mut l = Self::zeros(n);
        for j in 0..n {
            let mut d = self.get(j, j);
            for k in 0..j {
                d = d - l.get(j, k) * l.get(j, k);
            }
            if !(d > tiny) {
                return None;
            }
            let d = d.sqrt();
            l.set(j, j, d);
            for i in j + 1..n {
                let mut s = self.get(i, j);
                for k in 0..j {
                    s = s - l.get(i, k) * l.get(j, k);
                }
                l.set(i, j, s / d);
            }
        }
        Some(l)
    }

    /// Solves `A x = b` given the Cholesky factor of `A`.
    pub fn cholesky_solve(l: &Self, b: &[F]) -> Vec<F> {
        let n = l.n;
        let mut y = vec![F::zero(); n];
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s = s - l.get(i, k) * y[k];
            }
            y[i] = s / l.get(i, i);
        }
        let mut x = vec![F::zero(); n];
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s = s - l.get(k, i) * x[k];
            }
            x[i] = s / l.get(i, i);
        }
        x
    }

    /// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
    pub fn symmetric_eigenvalues(&self) -> Vec<F> {
        let n = self.n;
        let mut a = self.clone();
        let two = F::one() + F::one();
        for _sweep in 0..100 {
            let off: F = (0..n)
                .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| a.get(i, j) * a.get(i, j))
                .sum();
            let diag: F = (0..n).map(|i| a.get(i, i) * a.get(i, i)).sum();
            if off <= F::epsilon() * F::epsilon() * diag.max(F::min_positive_value()) {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    let apq = a.get(p, q);
                    if apq == F::zero() {
                        continue;
                    }
                    let theta = (a.get(q, q) - a.get(p, p)) / (two * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + F::one()).sqrt());
                    let c = F::one() / (t * t + F::one()).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let (akp, akq) = (a.get(k, p), a.get(k, q));
                        a.set(k, p, c * akp - s * akq);
                        a.set(k, q, s * akp + c * akq);
                    }
                    for k in 0..n {
                        let (apk, aqk) = (a.get(p, k), a.get(q, k));
                        a.set(p, k, c * apk - s * aqk);
                        a.set(q, k, s * apk + c * aqk);
                    }
                }
            }
        }
        let mut eig: Vec<F> = (0..n).map(|i| a.get(i, i)).collect();
        eig.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
        eig
    }
}
