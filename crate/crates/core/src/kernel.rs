//! Stationary kernels with closed-form mixed partial derivatives.
//!
//! Both families are functions of the scaled squared distance
//! `u = Σ_k (a_k - b_k)² / ℓ_k²`, so every derivative of `k(a, b)` with respect
//! to coordinates of `a` and `b` follows from derivatives of a scalar profile
//! `g(u)` and the fact that `u` is quadratic in `τ = a - b`: a derivative over a
//! list of coordinates is a sum over matchings of that list into singletons
//! (each contributing `2 τ_i / ℓ_i²`) and pairs (each contributing
//! `2 δ_ij / ℓ_i²`), weighted by `g^(p)` where `p` is the number of blocks.
//!
//! For Matérn 5/2 the higher profile derivatives blow up like `1/s` and `1/s³`
//! (with `s = √(5u)`), but they always appear multiplied by enough singleton
//! factors to cancel. Writing the singletons as `τ_i / (ℓ_i² s)` and folding the
//! matching powers of `s` into the coefficient leaves expressions that are
//! polynomial in `s` times `e^{-s}`, finite at `s = 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum KernelFamily {
    Matern52,
    SquaredExponential,
}

impl KernelFamily {
    /// Profile value and first derivative `(g(u), g'(u))` for unit output scale.
    pub fn profile(self, u: f64) -> (f64, f64) {
        match self {
            KernelFamily::SquaredExponential => {
                let e = (-0.5 * u).exp();
                (e, -0.5 * e)
            }
            KernelFamily::Matern52 => {
                let s = (5.0 * u).sqrt();
                let e = (-s).exp();
                ((1.0 + s + s * s / 3.0) * e, -(5.0 / 6.0) * (1.0 + s) * e)
            }
        }
    }
}

/// Kernel family plus its scales. `output_scale` is a standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub output_scale: f64,
    pub lengthscales: Vec<f64>,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, output_scale: f64, lengthscales: Vec<f64>) -> Result<Self> {
        let spec = Self {
            family,
            output_scale,
            lengthscales,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.lengthscales.is_empty() {
            return Err(Error::InvalidArgument(
                "kernel needs at least one lengthscale".into(),
            ));
        }
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !ok(self.output_scale) || !self.lengthscales.iter().all(|l| ok(*l)) {
            return Err(Error::InvalidArgument(format!(
                "kernel scales must be positive and finite: {self:?}"
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }

    pub fn variance(&self) -> f64 {
        self.output_scale * self.output_scale
    }

    /// `k(a, b)`.
    pub fn value(&self, a: &[f64], b: &[f64]) -> f64 {
        let u = self.scaled_sq_dist(a, b);
        self.variance() * self.family.profile(u).0
    }

    pub fn scaled_sq_dist(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .zip(&self.lengthscales)
            .map(|((p, q), l)| {
                let t = (p - q) / l;
                t * t
            })
            .sum()
    }
}

/// Coordinates of a multi-index expanded with repetition, e.g. `(2, 1)` → `[0, 0, 1]`.
fn expand(mi: &[u32], out: &mut [usize; 4], len: &mut usize) -> Result<()> {
    for (k, &m) in mi.iter().enumerate() {
        for _ in 0..m {
            if *len == 4 {
                return Err(Error::InvalidArgument(
                    "kernel derivatives are supported up to order 2 per argument".into(),
                ));
            }
            out[*len] = k;
            *len += 1;
        }
    }
    Ok(())
}

fn order(mi: &[u32]) -> u32 {
    mi.iter().sum()
}

/// Profile derivative `g^(p)` times `s^(2p - m)` for Matérn 5/2 (unit scale);
/// see the module docs.
fn matern_coefficient(p: usize, m: usize, s: f64) -> f64 {
    let e = (-s).exp();
    let (base, shift) = match p {
        0 => (1.0 + s + s * s / 3.0, 0),
        1 => (-(5.0 / 6.0) * (1.0 + s), 0),
        2 => (25.0 / 12.0, 0),
        3 => (-125.0 / 24.0, -1),
        4 => (625.0 / 48.0 * (1.0 + s), -3),
        _ => unreachable!("profile derivatives above fourth order never occur"),
    };
    let power = 2 * p as i32 - m as i32 + shift;
    debug_assert!(power >= 0);
    base * e * s.powi(power)
}

/// `∂^{ia}_a ∂^{ib}_b k(a, b)` for multi-indices of total order at most 2 each.
pub fn kernel_derivative(
    spec: &KernelSpec,
    a: &[f64],
    b: &[f64],
    ia: &[u32],
    ib: &[u32],
) -> Result<f64> {
    if order(ia) > 2 || order(ib) > 2 {
        return Err(Error::InvalidArgument(
            "kernel derivatives are supported up to order 2 per argument".into(),
        ));
    }
    let mut coords = [0usize; 4];
    let mut m = 0;
    expand(ia, &mut coords, &mut m)?;
    expand(ib, &mut coords, &mut m)?;
    // canonical order keeps the (a, ia) <-> (b, ib) swap bit-exact
    coords[..m].sort_unstable();
    Ok(derivative_unchecked(spec, a, b, &coords[..m], order(ib)))
}

/// Core evaluation over an already expanded, sorted coordinate list.
pub(crate) fn derivative_unchecked(
    spec: &KernelSpec,
    a: &[f64],
    b: &[f64],
    coords: &[usize],
    b_order: u32,
) -> f64 {
    let m = coords.len();
    let d = spec.dim();
    let mut dir = [0.0f64; 16];
    let mut dir_heap;
    let dir: &mut [f64] = if d <= 16 {
        &mut dir[..d]
    } else {
        dir_heap = vec![0.0; d];
        &mut dir_heap
    };
    let mut u = 0.0;
    for k in 0..d {
        let l = spec.lengthscales[k];
        let t = a[k] - b[k];
        u += (t / l) * (t / l);
        dir[k] = t / (l * l);
    }
    let mut coeffs = [0.0f64; 5];
    match spec.family {
        KernelFamily::SquaredExponential => {
            let e = (-0.5 * u).exp();
            let mut c = e;
            for slot in coeffs.iter_mut().take(m + 1) {
                *slot = c;
                c *= -0.5;
            }
        }
        KernelFamily::Matern52 => {
            let s = (5.0 * u).sqrt();
            if s > 0.0 {
                for v in dir.iter_mut() {
                    *v /= s;
                }
            } else {
                // Every term with a singleton factor carries a positive power of s.
                for v in dir.iter_mut() {
                    *v = 0.0;
                }
            }
            for (p, slot) in coeffs.iter_mut().enumerate().take(m + 1) {
                if 2 * p >= m {
                    *slot = matern_coefficient(p, m, s);
                }
            }
        }
    }

    let mut used = [false; 4];
    let total = sum_matchings(coords, &mut used, 0, 1.0, &coeffs, dir, &spec.lengthscales);
    let sign = if b_order % 2 == 1 { -1.0 } else { 1.0 };
    sign * spec.variance() * total
}

/// Sums, over matchings of `coords` into singletons and pairs, the product of
/// block factors weighted by the coefficient for that block count.
fn sum_matchings(
    coords: &[usize],
    used: &mut [bool; 4],
    blocks: usize,
    product: f64,
    coeffs: &[f64; 5],
    dir: &[f64],
    lengthscales: &[f64],
) -> f64 {
    let first = match (0..coords.len()).find(|&i| !used[i]) {
        Some(i) => i,
        None => return coeffs[blocks] * product,
    };
    used[first] = true;
    let ci = coords[first];
    let mut total = 0.0;
    if dir[ci] != 0.0 {
        total += sum_matchings(
            coords,
            used,
            blocks + 1,
            product * 2.0 * dir[ci],
            coeffs,
            dir,
            lengthscales,
        );
    }
    let pair = 2.0 / (lengthscales[ci] * lengthscales[ci]);
    for j in (first + 1)..coords.len() {
        if used[j] || coords[j] != ci {
            continue;
        }
        used[j] = true;
        total += sum_matchings(
            coords,
            used,
            blocks + 1,
            product * pair,
            coeffs,
            dir,
            lengthscales,
        );
        used[j] = false;
    }
    used[first] = false;
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(family: KernelFamily, sigma: f64, ls: &[f64]) -> KernelSpec {
        KernelSpec::new(family, sigma, ls.to_vec()).unwrap()
    }

    #[test]
    fn zero_lag_value_is_variance() {
        for fam in [KernelFamily::Matern52, KernelFamily::SquaredExponential] {
            let k = spec(fam, 1.7, &[0.3, 2.0]);
            let v = kernel_derivative(&k, &[0.1, 0.2], &[0.1, 0.2], &[0, 0], &[0, 0]).unwrap();
            assert!((v - 1.7 * 1.7).abs() < 1e-14);
        }
    }

    #[test]
    fn odd_derivative_vanishes_at_zero_lag() {
        for fam in [KernelFamily::Matern52, KernelFamily::SquaredExponential] {
            let k = spec(fam, 1.0, &[0.5]);
            let v = kernel_derivative(&k, &[0.3], &[0.3], &[1], &[0]).unwrap();
            assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn matern_fourth_derivative_limit_at_zero() {
        // k(r) = 1 - 5r²/6 + 25r⁴/24 - ..., so ∂⁴k/∂τ⁴ at 0 is 25 (ℓ = 1).
        let k = spec(KernelFamily::Matern52, 1.0, &[1.0]);
        let v = kernel_derivative(&k, &[0.0], &[0.0], &[2], &[2]).unwrap();
        assert!((v - 25.0).abs() < 1e-12, "{v}");
        let near = kernel_derivative(&k, &[1e-9], &[0.0], &[2], &[2]).unwrap();
        assert!((near - 25.0).abs() < 1e-6, "{near}");
        assert!(v.is_finite());
    }

    #[test]
    fn se_second_derivative_closed_form() {
        // ∂²/∂a² exp(-(a-b)²/2) at a-b = t is (t² - 1) e^{-t²/2}
        let k = spec(KernelFamily::SquaredExponential, 1.0, &[1.0]);
        let t: f64 = 0.7;
        let v = kernel_derivative(&k, &[t], &[0.0], &[2], &[0]).unwrap();
        assert!((v - (t * t - 1.0) * (-0.5 * t * t).exp()).abs() < 1e-14);
    }

    #[test]
    fn rejects_third_order_per_argument() {
        let k = spec(KernelFamily::Matern52, 1.0, &[1.0, 1.0]);
        assert!(kernel_derivative(&k, &[0.0, 0.0], &[0.1, 0.0], &[2, 1], &[0, 0]).is_err());
    }

    #[test]
    fn rejects_bad_scales() {
        assert!(KernelSpec::new(KernelFamily::Matern52, 0.0, vec![1.0]).is_err());
        assert!(KernelSpec::new(KernelFamily::Matern52, 1.0, vec![f64::NAN]).is_err());
        assert!(KernelSpec::new(KernelFamily::Matern52, 1.0, vec![]).is_err());
    }
}
