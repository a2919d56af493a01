//! Cholesky factorization with an adaptive diagonal jitter ladder.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// First non-zero rung of the jitter ladder.
pub const JITTER_START: f64 = 1e-20;
/// Last rung tried before giving up.
pub const JITTER_CEILING: f64 = 1e-2;

/// `0, 1e-20, 1e-19, ..., 1e-2`.
pub fn jitter_ladder() -> impl Iterator<Item = f64> {
    std::iter::once(0.0).chain((-20..=-2).map(|e| 10f64.powi(e)))
}

/// Lower-triangular factor `L` with `L Lᵀ = A + jitter·I`.
#[derive(Debug, Clone)]
pub struct JitteredCholesky {
    pub factor: DMatrix<f64>,
    pub jitter: f64,
}

impl JitteredCholesky {
    pub fn dim(&self) -> usize {
        self.factor.nrows()
    }

    /// Solves `L v = b`.
    pub fn solve_lower(&self, b: &DVector<f64>) -> DVector<f64> {
        forward_substitute(&self.factor, b)
    }

    /// Solves `(A + jitter·I) x = b`.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let v = forward_substitute(&self.factor, b);
        back_substitute_transpose(&self.factor, &v)
    }

    pub fn log_det(&self) -> f64 {
        2.0 * self.factor.diagonal().iter().map(|d| d.ln()).sum::<f64>()
    }
}

/// Factorizes a symmetric matrix, adding the smallest ladder rung that succeeds.
pub fn cholesky_with_jitter(a: &DMatrix<f64>) -> Result<JitteredCholesky> {
    let n = a.nrows();
    for jitter in jitter_ladder() {
        if let Some(factor) = try_cholesky(a, jitter) {
            return Ok(JitteredCholesky { factor, jitter });
        }
    }
    let diag = a.diagonal();
    Err(Error::Factorization {
        size: n,
        max_jitter: JITTER_CEILING,
        min_diag: diag.iter().cloned().fold(f64::INFINITY, f64::min),
        max_diag: diag.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    })
}

/// Plain Cholesky of `A + jitter·I`; `None` when a pivot is not strictly positive.
pub fn try_cholesky(a: &DMatrix<f64>, jitter: f64) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)] + jitter;
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    Some(l)
}

/// Whether a symmetric matrix admits a real Cholesky factor.
pub fn is_positive_definite(a: &DMatrix<f64>) -> bool {
    try_cholesky(a, 0.0).is_some()
}

pub fn forward_substitute(l: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = l.nrows();
    let mut v = b.clone();
    for j in 0..n {
        let vj = v[j] / l[(j, j)];
        v[j] = vj;
        if vj != 0.0 {
            for i in (j + 1)..n {
                v[i] -= l[(i, j)] * vj;
            }
        }
    }
    v
}

/// Solves `L X = B` column by column.
pub fn forward_substitute_columns(l: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let n = l.nrows();
    let mut x = b.clone();
    for c in 0..x.ncols() {
        let mut col = x.column_mut(c);
        for j in 0..n {
            let vj = col[j] / l[(j, j)];
            col[j] = vj;
            if vj != 0.0 {
                for i in (j + 1)..n {
                    col[i] -= l[(i, j)] * vj;
                }
            }
        }
    }
    x
}

/// `L⁻¹` for a lower-triangular `L`.
pub fn forward_substitute_matrix(l: &DMatrix<f64>) -> DMatrix<f64> {
    forward_substitute_columns(l, &DMatrix::identity(l.nrows(), l.ncols()))
}

/// Solves `Lᵀ x = v`.
pub fn back_substitute_transpose(l: &DMatrix<f64>, v: &DVector<f64>) -> DVector<f64> {
    let n = l.nrows();
    let mut x = v.clone();
    for i in (0..n).rev() {
        let mut s = x[i];
        for k in (i + 1)..n {
            s -= l[(k, i)] * x[k];
        }
        x[i] = s / l[(i, i)];
    }
    x
}

/// Draws `n_draws` samples of `N(mean, L Lᵀ)`, one per row.
pub fn sample_mvn<R: Rng + ?Sized>(
    mean: &DVector<f64>,
    chol: &DMatrix<f64>,
    n_draws: usize,
    rng: &mut R,
) -> DMatrix<f64> {
    let m = mean.len();
    let z = DMatrix::<f64>::from_fn(m, n_draws, |_, _| rng.sample(StandardNormal));
    let lz = chol * z;
    DMatrix::from_fn(n_draws, m, |r, c| mean[c] + lz[(c, r)])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ladder_shape() {
        let rungs: Vec<f64> = jitter_ladder().collect();
        assert_eq!(rungs[0], 0.0);
        assert_eq!(rungs[1], 1e-20);
        assert_eq!(*rungs.last().unwrap(), 1e-2);
        assert_eq!(rungs.len(), 20);
    }

    #[test]
    fn well_conditioned_needs_no_jitter() {
        let a = DMatrix::from_row_slice(2, 2, &[4.0, 2.0, 2.0, 3.0]);
        let c = cholesky_with_jitter(&a).unwrap();
        assert_eq!(c.jitter, 0.0);
        let rec = &c.factor * c.factor.transpose();
        assert!((rec - a).norm() < 1e-12);
    }

    #[test]
    fn singular_matrix_gets_first_working_rung() {
        // rank one: ones(3,3)
        let a = DMatrix::from_element(3, 3, 1.0);
        let c = cholesky_with_jitter(&a).unwrap();
        assert!(c.jitter > 0.0);
        // the rung below must fail
        let below = c.jitter / 10.0;
        if below >= JITTER_START {
            assert!(try_cholesky(&a, below).is_none());
        }
        let again = cholesky_with_jitter(&a).unwrap();
        assert_eq!(again.jitter, c.jitter);
        let mut shifted = a.clone();
        for i in 0..3 {
            shifted[(i, i)] += c.jitter;
        }
        let rec = &c.factor * c.factor.transpose();
        assert!((rec - &shifted).norm() / shifted.norm() < 1e-8);
    }

    #[test]
    fn negative_definite_fails() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -1.0]);
        assert!(cholesky_with_jitter(&a).is_err());
        assert!(!is_positive_definite(&a));
    }

    #[test]
    fn solve_matches_direct() {
        let a = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let b = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let c = cholesky_with_jitter(&a).unwrap();
        let x = c.solve(&b);
        assert!((&a * x - b).norm() < 1e-12);
    }
}
