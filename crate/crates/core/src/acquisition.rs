//! Acquisition functions and their inner maximizer.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::convexity::ConvexRegion;
use crate::error::{Error, Result};
use crate::gp::GpModel;
use crate::linalg;
use crate::optim::compass_search;
use crate::rng;
use crate::stats::{entropy_of_counts, expected_positive_part, gauss_hermite_normal};

/// Everything an acquisition needs to score a point.
#[derive(Debug, Clone, Copy)]
pub struct AcquisitionContext<'a> {
    pub model: &'a GpModel,
    /// Lowest observed objective value.
    pub incumbent_best: f64,
    pub region: Option<&'a ConvexRegion>,
    /// Expected minimum inside the convex region, `E[y_i]`.
    pub expected_inner_min: Option<f64>,
    pub inner_sd: Option<f64>,
}

impl<'a> AcquisitionContext<'a> {
    pub fn new(model: &'a GpModel) -> Self {
        let best = model
            .data()
            .iter()
            .map(|o| o.y)
            .fold(f64::INFINITY, f64::min);
        Self {
            model,
            incumbent_best: best,
            region: None,
            expected_inner_min: None,
            inner_sd: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Proposal {
    pub x: Vec<f64>,
    pub value: f64,
    pub excluded_region_applied: bool,
}

/// Expected improvement over the incumbent.
pub fn expected_improvement(ctx: &AcquisitionContext, x: &[f64]) -> f64 {
    let (mu, var) = ctx.model.predict(x);
    expected_positive_part(ctx.incumbent_best - mu, var.sqrt())
}

/// Probability of improving on the incumbent, `Φ((best − μ)/σ)`.
pub fn probability_of_improvement(ctx: &AcquisitionContext, x: &[f64]) -> f64 {
    let (mu, var) = ctx.model.predict(x);
    let sd = var.sqrt();
    let gap = ctx.incumbent_best - mu;
    if sd > 0.0 {
        crate::stats::norm_cdf(gap / sd)
    } else if gap > 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Expected improvement over the estimated inner minimum `E[y_i]`.
pub fn global_regret_reduction(ctx: &AcquisitionContext, x: &[f64]) -> Result<f64> {
    let target = ctx.expected_inner_min.ok_or(Error::MissingInnerMinimum)?;
    let (mu, var) = ctx.model.predict(x);
    Ok(expected_positive_part(target - mu, var.sqrt()))
}

/// Precomputed sample paths for the discretized entropy-search acquisition.
///
/// The distribution of the minimizer is represented by the argmin of joint
/// posterior paths over a finite support set. A fantasy observation `y` at a
/// query `x` updates every path pathwise, `f_S ← f_S + c/v·(y − f(x))`, where
/// `f(x)` is drawn conditionally on that path; the acquisition is the expected
/// drop in argmin entropy, averaged over Gauss–Hermite fantasies.
#[derive(Debug, Clone)]
pub struct PesCache {
    support: Vec<Vec<f64>>,
    support_z: Vec<Vec<f64>>,
    /// `L⁻¹ k(X, S)` in unit space.
    v_support: DMatrix<f64>,
    /// Factor of the unit-space support covariance.
    chol_support: DMatrix<f64>,
    /// Paths over the support, one per column (`s × P`).
    paths: DMatrix<f64>,
    /// `Σ_S⁻¹ (paths − μ_S)`, `s × P`.
    whitened: DMatrix<f64>,
    /// Support indices of each path, sorted by the path's value.
    order: Vec<Vec<u32>>,
    /// Independent normals for the conditional draw of `f(x)`, one per path.
    noise: Vec<f64>,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    prior_entropy: f64,
}

impl PesCache {
    pub fn new(
        model: &GpModel,
        support: Vec<Vec<f64>>,
        n_paths: usize,
        n_fantasies: usize,
        seed: u64,
    ) -> Result<Self> {
        if n_paths == 0 || n_fantasies == 0 {
            return Err(Error::InvalidArgument(
                "PES needs at least one path and one fantasy".into(),
            ));
        }
        let domain = model.domain();
        let unit = model.unit_kernel();
        let inputs = model.normalized_inputs();
        let s = support.len();
        let zs: Vec<Vec<f64>> = support.iter().map(|p| domain.to_normalized(p)).collect();
        let cross = DMatrix::from_fn(inputs.len(), s, |r, c| unit.value(&inputs[r], &zs[c]));
        let v_support = linalg::forward_substitute_columns(model.factor(), &cross);
        let mean_support = cross.transpose() * model.unit_weights();
        let mut cov = DMatrix::from_fn(s, s, |i, j| unit.value(&zs[i], &zs[j]));
        cov -= v_support.transpose() * &v_support;
        let cov = (&cov + cov.transpose()) * 0.5;
        let chol = linalg::cholesky_with_jitter(&cov)?;

        let mut rng = rng::rng_for(seed, &[0x7065_73]);
        let xi = DMatrix::<f64>::from_fn(s, n_paths, |_, _| rng.sample(StandardNormal));
        let resid = &chol.factor * xi;
        let mut paths = resid.clone();
        for mut col in paths.column_iter_mut() {
            col += &mean_support;
        }
        let mut whitened = resid;
        for c in 0..n_paths {
            let w = chol.solve(&whitened.column(c).into_owned());
            whitened.set_column(c, &w);
        }
        let noise = (0..n_paths).map(|_| rng.sample(StandardNormal)).collect();
        let (nodes, weights) = gauss_hermite_normal(n_fantasies);
        let prior_entropy = entropy_of_counts(&argmin_counts(&paths));
        let order = paths
            .column_iter()
            .map(|col| {
                let mut idx: Vec<u32> = (0..s as u32).collect();
                idx.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]));
                idx
            })
            .collect();
        Ok(Self {
            support,
            support_z: zs,
            v_support,
            chol_support: chol.factor,
            paths,
            whitened,
            order,
            noise,
            nodes,
            weights,
            prior_entropy,
        })
    }

    pub fn support(&self) -> &[Vec<f64>] {
        &self.support
    }

    pub fn n_paths(&self) -> usize {
        self.paths.ncols()
    }

    /// Entropy (nats) of the sampled minimizer distribution.
    pub fn prior_entropy(&self) -> f64 {
        self.prior_entropy
    }

    /// Expected entropy reduction from observing the function at `x`.
    pub fn value(&self, model: &GpModel, x: &[f64]) -> f64 {
        let s = self.support.len();
        if s <= 1 || self.prior_entropy == 0.0 {
            return 0.0;
        }
        let domain = model.domain();
        let unit = model.unit_kernel();
        let z = domain.to_normalized(x);
        let kx = model.cross_values(&z);
        let vx = linalg::forward_substitute(model.factor(), &kx);
        let var_x = 1.0 - vx.norm_squared();
        if !(var_x > 1e-12) {
            return 0.0;
        }
        let mean_x = kx.dot(model.unit_weights());
        // posterior covariance between the support and x
        let mut c = DVector::from_iterator(s, self.support_z.iter().map(|p| unit.value(p, &z)));
        c -= self.v_support.transpose() * &vx;
        let lc = linalg::forward_substitute(&self.chol_support, &c);
        let cond_var = (var_x - lc.norm_squared()).max(0.0);
        let cond_sd = cond_var.sqrt();
        let gain = c / var_x;
        let gmax = gain.amax();

        // f(x) on each path, conditional on the path's support values
        let fx: Vec<f64> = (0..self.n_paths())
            .map(|p| mean_x + c_dot(&self.whitened, p, &gain, var_x) + cond_sd * self.noise[p])
            .collect();

        let sd_x = var_x.sqrt();
        let k = self.nodes.len();
        let mut counts = vec![0u32; k * s];
        let mut shift = vec![0.0; k];
        let mut best = vec![0.0; k];
        let mut arg = vec![0usize; k];
        for p in 0..self.n_paths() {
            for j in 0..k {
                shift[j] = mean_x + sd_x * self.nodes[j] - fx[p];
                best[j] = f64::INFINITY;
            }
            let col = self.paths.column(p);
            // A support point can only take the argmin if its value is within
            // the largest possible shift of the path's current leader.
            let smax = shift.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let order = &self.order[p];
            let cutoff = col[order[0] as usize] + 2.0 * gmax * smax;
            for &i in order {
                let i = i as usize;
                let f = col[i];
                if f > cutoff {
                    break;
                }
                let g = gain[i];
                for j in 0..k {
                    let v = f + g * shift[j];
                    if v < best[j] {
                        best[j] = v;
                        arg[j] = i;
                    }
                }
            }
            for j in 0..k {
                counts[j * s + arg[j]] += 1;
            }
        }
        let expected: f64 = (0..k)
            .map(|j| self.weights[j] * entropy_of_counts(&counts[j * s..(j + 1) * s]))
            .sum();
        (self.prior_entropy - expected).max(0.0)
    }
}

/// `cᵀ Σ⁻¹ r_p` recovered from `gain = c / var_x`.
fn c_dot(whitened: &DMatrix<f64>, p: usize, gain: &DVector<f64>, var_x: f64) -> f64 {
    var_x * whitened.column(p).dot(gain)
}

/// Argmin counts over the support for each path (column).
fn argmin_counts(paths: &DMatrix<f64>) -> Vec<u32> {
    let mut counts = vec![0u32; paths.nrows()];
    for col in paths.column_iter() {
        let mut best = f64::INFINITY;
        let mut arg = 0;
        for (i, v) in col.iter().enumerate() {
            if *v < best {
                best = *v;
                arg = i;
            }
        }
        counts[arg] += 1;
    }
    counts
}

/// Discretized entropy search at `x` using a prepared cache.
pub fn pes_discrete(ctx: &AcquisitionContext, cache: &PesCache, x: &[f64]) -> f64 {
    cache.value(ctx.model, x)
}

/// Budget and polish settings for [`maximize_acquisition`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaximizerConfig {
    /// Coarse Latin-hypercube evaluations.
    pub budget: usize,
    /// Upper bound on local polish starts (also limited to `budget / 10`).
    pub polish_starts: usize,
    /// Evaluations per polish start, per dimension.
    pub polish_evals_per_dim: usize,
}

impl MaximizerConfig {
    pub fn for_dim(d: usize) -> Self {
        Self {
            budget: 2000 * d,
            polish_starts: 5,
            polish_evals_per_dim: 40,
        }
    }
}

/// Maximizes `f` over the model's domain: a Latin-hypercube scan followed by
/// compass-search polish from the best few scan points.
///
/// Points inside `exclude` (when it has positive radius) are infeasible. Among
/// equal values the lower posterior mean wins, then the earlier scan point.
pub fn maximize_acquisition<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    model: &GpModel,
    exclude: Option<&ConvexRegion>,
    cfg: MaximizerConfig,
    seed: u64,
) -> Result<Proposal> {
    if cfg.budget == 0 {
        return Err(Error::InvalidArgument(
            "acquisition budget must be at least 1".into(),
        ));
    }
    let domain = model.domain();
    let exclude = exclude.filter(|r| !r.is_empty());
    let feasible = |x: &[f64]| exclude.is_none_or(|r| !r.contains(domain, x));
    let mut eval = |x: &[f64]| if feasible(x) { f(x) } else { f64::NEG_INFINITY };

    let mut rng = rng::rng_for(seed, &[0x6163_71]);
    let scan = rng::latin_hypercube(domain, cfg.budget, &mut rng);
    let values: Vec<f64> = scan.iter().map(|x| eval(x)).collect();
    let mut order: Vec<usize> = (0..scan.len())
        .filter(|&i| values[i] > f64::NEG_INFINITY)
        .collect();
    if order.is_empty() {
        return Err(Error::NoFeasibleProposal);
    }
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));

    let mut candidates: Vec<(Vec<f64>, f64)> = Vec::new();
    // all scan points tied with the best compete on posterior mean
    let top = values[order[0]];
    for &i in order.iter().take_while(|&&i| values[i] == top) {
        candidates.push((scan[i].clone(), values[i]));
    }
    let k = cfg.polish_starts.min(cfg.budget / 10);
    let d = domain.dim();
    let steps: Vec<f64> = (0..d).map(|j| 0.05 * domain.width(j)).collect();
    for &i in order.iter().take(k) {
        let (x, neg, _) = compass_search(
            |x| -eval(x),
            &scan[i],
            -values[i],
            domain.lower(),
            domain.upper(),
            &steps,
            1e-3,
            cfg.polish_evals_per_dim * d,
        );
        candidates.push((x, -neg));
    }

    let best_value = candidates
        .iter()
        .map(|c| c.1)
        .fold(f64::NEG_INFINITY, f64::max);
    let tied: Vec<&(Vec<f64>, f64)> = candidates.iter().filter(|c| c.1 == best_value).collect();
    let chosen = if tied.len() == 1 {
        tied[0]
    } else {
        let mut best = tied[0];
        let mut best_mean = model.predict_mean(&best.0);
        for c in &tied[1..] {
            let m = model.predict_mean(&c.0);
            if m < best_mean {
                best = c;
                best_mean = m;
            }
        }
        best
    };
    Ok(Proposal {
        x: chosen.0.clone(),
        value: chosen.1,
        excluded_region_applied: exclude.is_some(),
    })
}
