//! Standard-normal helpers.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

pub fn norm_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

pub fn norm_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * FRAC_1_SQRT_2)
}

/// `E[max(gap + σ·ξ, 0)]` for `ξ ~ N(0, 1)`, i.e. `gap·Φ(gap/σ) + σ·φ(gap/σ)`,
/// with the `σ → 0` limit `max(gap, 0)`.
pub fn expected_positive_part(gap: f64, sigma: f64) -> f64 {
    if !(sigma > 0.0) {
        return gap.max(0.0);
    }
    let z = gap / sigma;
    (gap * norm_cdf(z) + sigma * norm_pdf(z)).max(0.0)
}

/// Shannon entropy (nats) of the categorical given by `counts`.
pub fn entropy_of_counts(counts: &[u32]) -> f64 {
    let total: u32 = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let t = total as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / t;
            -p * p.ln()
        })
        .sum()
}

/// Probabilists' Gauss–Hermite rule: nodes and weights for `E[f(ξ)]`, `ξ ~ N(0, 1)`.
pub fn gauss_hermite_normal(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "need at least one node");
    // Golub–Welsch on the Hermite (probabilists') Jacobi matrix: off-diagonal √k.
    let jacobi = nalgebra::DMatrix::from_fn(n, n, |i, j| {
        if i + 1 == j || j + 1 == i {
            ((i.max(j)) as f64).sqrt()
        } else {
            0.0
        }
    });
    let eig = jacobi.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|k| (eig.eigenvalues[k], eig.eigenvectors[(0, k)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}
