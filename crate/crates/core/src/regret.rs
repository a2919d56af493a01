//! Monte-Carlo estimate of the global regret of a convex region: the expected
//! amount by which the minimum inside the region exceeds the minimum outside it.
//!
//! Joint posterior draws over a support set give, per draw, the outer minimum
//! `y_o`; the inner minimum is summarized by a normal fit `N(μᵢ, σᵢ²)` and
//! assumed independent of `y_o`, so each draw contributes the closed form
//! `E[max(y_i − y_o, 0)]`.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::convexity::ConvexRegion;
use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::gp::GpModel;
use crate::rng::{self, SeededRng};
use crate::stats::expected_positive_part;

/// Lower bound on the inner-minimum standard deviation.
pub const SIGMA_FLOOR: f64 = 1e-12;
/// Proposal budget of the variance-weighted rejection sampler.
pub const MAX_REJECTION_PROPOSALS: usize = 100_000;
/// Exploration weight of the lower confidence bound defining the minimizer density.
pub const LCB_WEIGHT: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SupportOrigin {
    MinimizerSampled,
    VarianceSampled,
}

#[derive(Debug, Clone)]
pub struct SupportSet {
    pub points: Vec<Vec<f64>>,
    pub inner_mask: Vec<bool>,
    pub origin: Vec<SupportOrigin>,
    /// The rejection sampler ran out of proposals and filled in uniform points.
    pub uniform_fallback: bool,
}

impl SupportSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn n_inner(&self) -> usize {
        self.inner_mask.iter().filter(|m| **m).count()
    }

    pub fn n_outer(&self) -> usize {
        self.len() - self.n_inner()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegretEstimate {
    pub value: f64,
    pub mu_i: f64,
    pub sigma_i: f64,
    pub n_draws: usize,
    /// Per-draw outer minima; empty when no support point lies outside the region.
    pub outer_samples: Vec<f64>,
}

/// Draws the support set: half from `exp(−LCB)` (standardized units) by slice
/// sampling, starting with the region centre itself, and half from the
/// posterior variance by rejection sampling.
pub fn build_support(
    model: &GpModel,
    region: &ConvexRegion,
    n_support: usize,
    seed: u64,
) -> Result<SupportSet> {
    if n_support < 4 || n_support % 2 != 0 {
        return Err(Error::InvalidArgument(format!(
            "support size must be even and at least 4, got {n_support}"
        )));
    }
    let domain = model.domain();
    let half = n_support / 2;
    let mut rng = rng::rng_for(seed, &[0x7375_7070]);

    let scale = model.kernel().output_scale;
    let centre_z = domain.to_normalized(&region.center);
    let log_density = |z: &[f64]| {
        let x = domain.from_normalized(z);
        let (mu, var) = model.predict(&x);
        -((mu - model.prior_mean()) / scale - LCB_WEIGHT * var.sqrt() / scale)
    };
    let mut points = vec![region.center.clone()];
    points.extend(
        slice_sample(&log_density, &centre_z, half - 1, &mut rng)
            .into_iter()
            .map(|z| domain.from_normalized(&z)),
    );
    let mut origin = vec![SupportOrigin::MinimizerSampled; half];

    let (variance_points, uniform_fallback) = variance_sample(model, half, &mut rng);
    points.extend(variance_points);
    origin.extend(std::iter::repeat(SupportOrigin::VarianceSampled).take(half));

    let inner_mask = points
        .iter()
        .map(|p| !region.is_empty() && region.contains(domain, p))
        .collect();
    Ok(SupportSet {
        points,
        inner_mask,
        origin,
        uniform_fallback,
    })
}

/// Coordinate-wise slice sampler with stepping out on `[-1, 1]^d`.
fn slice_sample<F: Fn(&[f64]) -> f64>(
    log_density: &F,
    start: &[f64],
    n: usize,
    rng: &mut SeededRng,
) -> Vec<Vec<f64>> {
    const WIDTH: f64 = 0.5;
    const MAX_STEPS: usize = 8;
    let d = start.len();
    let mut x = start.to_vec();
    let mut lx = log_density(&x);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        for k in 0..d {
            let level = lx + rng.random::<f64>().ln();
            let mut lo = x[k] - WIDTH * rng.random::<f64>();
            let mut hi = lo + WIDTH;
            let mut probe = x.clone();
            for _ in 0..MAX_STEPS {
                if lo <= -1.0 {
                    break;
                }
                probe[k] = lo;
                if log_density(&probe) <= level {
                    break;
                }
                lo -= WIDTH;
            }
            for _ in 0..MAX_STEPS {
                if hi >= 1.0 {
                    break;
                }
                probe[k] = hi;
                if log_density(&probe) <= level {
                    break;
                }
                hi += WIDTH;
            }
            lo = lo.max(-1.0);
            hi = hi.min(1.0);
            loop {
                let cand = lo + (hi - lo) * rng.random::<f64>();
                probe[k] = cand;
                let lc = log_density(&probe);
                if lc > level || hi - lo < 1e-12 {
                    x[k] = cand;
                    lx = lc;
                    break;
                }
                if cand < x[k] {
                    lo = cand;
                } else {
                    hi = cand;
                }
            }
        }
        out.push(x.clone());
    }
    out
}

/// Rejection sampling from the posterior variance with uniform proposals.
///
/// The envelope is twice the largest variance seen on a scan, capped by the
/// prior variance; after the proposal budget is spent the remainder is uniform.
fn variance_sample(model: &GpModel, n: usize, rng: &mut SeededRng) -> (Vec<Vec<f64>>, bool) {
    let domain = model.domain();
    let prior = model.prior_variance();
    let scan = rng::latin_hypercube(domain, 256, rng);
    let scan_max = scan.iter().map(|x| model.predict(x).1).fold(0.0, f64::max);
    let envelope = (2.0 * scan_max).min(prior);
    let uniform = |rng: &mut SeededRng| -> Vec<f64> {
        (0..domain.dim())
            .map(|k| domain.lower()[k] + domain.width(k) * rng.random::<f64>())
            .collect()
    };
    let mut out = Vec::with_capacity(n);
    let mut proposals = 0;
    if envelope > 0.0 {
        while out.len() < n && proposals < MAX_REJECTION_PROPOSALS {
            proposals += 1;
            let x = uniform(rng);
            if rng.random::<f64>() * envelope < model.predict(&x).1 {
                out.push(x);
            }
        }
    }
    let fallback = out.len() < n;
    while out.len() < n {
        out.push(uniform(rng));
    }
    (out, fallback)
}

/// Normal fit (maximum likelihood, `1/N` variance) of the per-draw inner minimum.
pub fn inner_stats(support: &SupportSet, draws: &DMatrix<f64>) -> Result<(f64, f64)> {
    if draws.ncols() != support.len() {
        return Err(Error::InvalidArgument(format!(
            "draw matrix has {} columns for {} support points",
            draws.ncols(),
            support.len()
        )));
    }
    let minima = column_minima(draws, &support.inner_mask, true);
    if minima.is_empty() {
        return Err(Error::UndefinedInnerMinimum);
    }
    let n = minima.len() as f64;
    let mu = minima.iter().sum::<f64>() / n;
    let var = minima.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / n;
    Ok((mu, var.sqrt().max(SIGMA_FLOOR)))
}

/// Per-row minimum over the columns whose mask equals `want`; empty if none match.
fn column_minima(draws: &DMatrix<f64>, mask: &[bool], want: bool) -> Vec<f64> {
    let cols: Vec<usize> = (0..mask.len()).filter(|&c| mask[c] == want).collect();
    if cols.is_empty() {
        return Vec::new();
    }
    (0..draws.nrows())
        .map(|r| {
            cols.iter()
                .map(|&c| draws[(r, c)])
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

/// Mean over outer minima of `E[max(Y_i − y_o, 0)]`, `Y_i ~ N(μᵢ, σᵢ²)`.
pub fn regret_from_samples(mu_i: f64, sigma_i: f64, outer: &[f64]) -> f64 {
    if outer.is_empty() {
        return 0.0;
    }
    let sigma = sigma_i.max(SIGMA_FLOOR);
    outer
        .iter()
        .map(|yo| expected_positive_part(mu_i - yo, sigma))
        .sum::<f64>()
        / outer.len() as f64
}

/// Regret estimate from an existing support set and draws over it.
pub fn regret_from_draws(support: &SupportSet, draws: &DMatrix<f64>) -> Result<RegretEstimate> {
    let (mu_i, sigma_i) = inner_stats(support, draws)?;
    let outer_samples = column_minima(draws, &support.inner_mask, false);
    Ok(RegretEstimate {
        value: regret_from_samples(mu_i, sigma_i, &outer_samples),
        mu_i,
        sigma_i,
        n_draws: draws.nrows(),
        outer_samples,
    })
}

/// Estimates the global regret of `region`. Without any outer support point the
/// region covers everything sampled and the estimate is zero.
pub fn estimate_global_regret(
    model: &GpModel,
    region: &ConvexRegion,
    n_draws: usize,
    n_support: usize,
    seed: u64,
) -> Result<RegretEstimate> {
    if n_draws < 100 {
        return Err(Error::InvalidArgument(format!(
            "need at least 100 draws, got {n_draws}"
        )));
    }
    let support = build_support(model, region, n_support, seed)?;
    let draws =
        model.draw_posterior(&support.points, n_draws, rng::derive_seed(seed, &[0x6472]))?;
    regret_from_draws(&support, &draws)
}

/// Whether `x` lies in `region` (convenience for callers holding only a domain).
pub fn in_region(domain: &Domain, region: &ConvexRegion, x: &[f64]) -> bool {
    !region.is_empty() && region.contains(domain, x)
}
