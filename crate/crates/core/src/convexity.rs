//! Probabilistic convexity: a positive-definiteness test on sampled Hessians,
//! and the radius of a sphere around a point inside which the test keeps passing.
//!
//! Radii are measured in normalized coordinates (each dimension mapped to
//! `[-1, 1]`), so one radius is meaningful across dimensions of different widths.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::gp::{GpModel, HessianBelief};
use crate::linalg;
use crate::rng;

/// Tolerance of the positive-definiteness test.
///
/// With a uniform prior on the probability that a Hessian sample is PD, and
/// `n` out of `n` samples passing, the posterior mean probability of a PD
/// sample is `(n + 1)/(n + 2)`; the test demands that this reaches `1 - ε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdTestConfig {
    pub epsilon: f64,
}

impl Default for PdTestConfig {
    fn default() -> Self {
        Self { epsilon: 0.01 }
    }
}

impl PdTestConfig {
    pub fn new(epsilon: f64) -> Result<Self> {
        let cfg = Self { epsilon };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 0.5) {
            return Err(Error::InvalidArgument(format!(
                "PD-test epsilon must lie in (0, 0.5), got {}",
                self.epsilon
            )));
        }
        Ok(())
    }

    /// Number of Hessian samples, `round(1/ε − 2)`, at least one.
    pub fn n_samples(&self) -> usize {
        ((1.0 / self.epsilon - 2.0).round() as usize).max(1)
    }
}

/// Sphere (normalized coordinates) centred on the posterior-mean minimizer
/// inside which sampled Hessians are consistently PD.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexRegion {
    pub center: Vec<f64>,
    /// Radius in normalized units.
    pub radius: f64,
    pub directions_tested: usize,
    pub resolution: f64,
}

impl ConvexRegion {
    pub fn contains(&self, domain: &Domain, x: &[f64]) -> bool {
        domain.normalized_distance(&self.center, x) <= self.radius
    }

    pub fn is_empty(&self) -> bool {
        self.radius <= 0.0
    }
}

/// Applies the test to an explicit belief: draws `n` Hessians and requires all to be PD.
pub fn pd_test_belief(belief: &HessianBelief, cfg: &PdTestConfig, seed: u64) -> bool {
    let n = cfg.n_samples();
    let size = belief.size();
    let mut rng = rng::rng_for(seed, &[0x7064]);
    let Ok(samples) = belief.triangle.sample(n, &mut rng) else {
        return false;
    };
    samples.row_iter().all(|row| {
        let entries: Vec<f64> = row.iter().cloned().collect();
        let h = HessianBelief::matrix_from_triangle(size, &entries);
        linalg::is_positive_definite(&h)
    })
}

/// Positive-definiteness test of the objective's Hessian at `x`.
///
/// Samples are seeded from `(seed, x)`, so the same point always gets the same
/// verdict. A point with no interior dimensions fails.
pub fn pd_test_point(model: &GpModel, x: &[f64], cfg: &PdTestConfig, seed: u64) -> bool {
    match model.infer_hessian(x) {
        Ok(belief) => pd_test_belief(&belief, cfg, rng::point_seed(seed, x)),
        Err(_) => false,
    }
}

/// Estimates the PD-sphere radius around `center`.
///
/// Directions are normalized standard-normal draws. The first direction is
/// searched from the farthest-corner distance; later directions test the current
/// estimate first and binary-search below it only on failure. A direction that
/// leaves the domain before the current estimate is tested at its exit point and,
/// if that passes, does not constrain the sphere (the sphere is intersected with
/// the box). Binary searches stop at resolution `h_r` and keep the largest radius
/// known to pass.
pub fn pd_sphere_radius(
    model: &GpModel,
    center: &[f64],
    n_u: usize,
    h_r: f64,
    cfg: &PdTestConfig,
    seed: u64,
) -> Result<ConvexRegion> {
    if n_u == 0 || !(h_r > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need n_u >= 1 and h_r > 0, got n_u = {n_u}, h_r = {h_r}"
        )));
    }
    let domain = model.domain();
    let mut region = ConvexRegion {
        center: center.to_vec(),
        radius: 0.0,
        directions_tested: 0,
        resolution: h_r,
    };
    if !pd_test_point(model, center, cfg, seed) {
        return Ok(region);
    }
    let d = domain.dim();
    let mut radius = domain.farthest_corner_distance(center);
    let test_at =
        |r: f64, u: &[f64]| pd_test_point(model, &domain.step_normalized(center, u, r), cfg, seed);

    for i in 0..n_u {
        region.directions_tested += 1;
        let mut rng = rng::rng_for(seed, &[0x6469_72, i as u64]);
        let mut u: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        u.iter_mut().for_each(|v| *v /= norm);

        let exit = domain.ray_exit_distance(center, &u);
        let probe = radius.min(exit);
        if probe <= 0.0 || test_at(probe, &u) {
            continue;
        }
        let (mut lo, mut hi) = (0.0, probe);
        while hi - lo > h_r {
            let mid = 0.5 * (lo + hi);
            if test_at(mid, &u) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        radius = lo;
        if radius == 0.0 {
            break;
        }
    }
    region.radius = radius;
    Ok(region)
}
