//! Maximum-a-posteriori fitting of kernel scales.
//!
//! The fit runs on standardized data: inputs in `[-1, 1]^d`, outputs shifted by
//! their mean and divided by their standard deviation. Log-normal priors are
//! centred on a lengthscale of a quarter of the domain width and an output
//! scale equal to the observed standard deviation, which in standardized units
//! are `0.5` and `1.0`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::domain::{Domain, Observation};
use crate::error::{Error, Result};
use crate::kernel::{KernelFamily, KernelSpec};
use crate::linalg;
use crate::optim::{minimize_box, BoxMinimizeOptions};
use crate::rng;

/// Standardized prior medians and search box (log space).
const PRIOR_LENGTHSCALE: f64 = 0.5;
const PRIOR_OUTPUT_SCALE: f64 = 1.0;
const LOG_LOWER: f64 = -4.605_170_185_988_091; // ln 1e-2
const LOG_UPPER: f64 = 4.605_170_185_988_091; // ln 1e2

#[derive(Debug, Clone)]
pub struct FitOptions {
    pub family: KernelFamily,
    /// Number of local optimizations: prior mode, warm start (if any), then random prior draws.
    pub restarts: usize,
    pub lengthscale_log_sd: f64,
    pub output_scale_log_sd: f64,
    /// Previous fit in original units, tried as a starting point.
    pub warm_start: Option<KernelSpec>,
    pub max_iter: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            family: KernelFamily::Matern52,
            restarts: 4,
            lengthscale_log_sd: 1.0,
            output_scale_log_sd: 1.0,
            warm_start: None,
            max_iter: 60,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitReport {
    pub kernel: KernelSpec,
    /// Log posterior density (up to a constant) at the optimum, standardized units.
    pub log_posterior: f64,
    /// All observations were equal; the prior mode was returned.
    pub degenerate: bool,
}

/// MAP kernel scales with the default options and a Matérn 5/2 kernel.
pub fn fit_hyperparameters(data: &[Observation], domain: &Domain, seed: u64) -> Result<KernelSpec> {
    fit_hyperparameters_with(data, domain, seed, &FitOptions::default()).map(|r| r.kernel)
}

pub fn fit_hyperparameters_with(
    data: &[Observation],
    domain: &Domain,
    seed: u64,
    options: &FitOptions,
) -> Result<FitReport> {
    let d = domain.dim();
    if data.len() < 2 {
        return Err(Error::InvalidArgument(
            "hyperparameter fitting needs at least two observations".into(),
        ));
    }
    for (i, a) in data.iter().enumerate() {
        if a.x.len() != d || !domain.contains(&a.x) {
            return Err(Error::InvalidArgument(format!(
                "observation {:?} is outside the domain",
                a.x
            )));
        }
        if !a.y.is_finite() {
            return Err(Error::NonFiniteObjective(a.x.clone()));
        }
        if data[..i].iter().any(|b| b.x == a.x) {
            return Err(Error::InvalidArgument(format!(
                "duplicate observation at {:?}",
                a.x
            )));
        }
    }

    let n = data.len() as f64;
    let mean = data.iter().map(|o| o.y).sum::<f64>() / n;
    let sd = (data.iter().map(|o| (o.y - mean).powi(2)).sum::<f64>() / n).sqrt();
    let to_original = |theta: &[f64], y_scale: f64| KernelSpec {
        family: options.family,
        output_scale: theta[0].exp() * y_scale,
        lengthscales: (0..d)
            .map(|k| theta[k + 1].exp() * domain.half_width(k))
            .collect(),
    };
    let prior_mode: Vec<f64> = std::iter::once(PRIOR_OUTPUT_SCALE.ln())
        .chain(std::iter::repeat(PRIOR_LENGTHSCALE.ln()).take(d))
        .collect();

    if !(sd > 1e-12 * (1.0 + mean.abs())) {
        return Ok(FitReport {
            kernel: to_original(&prior_mode, 1.0),
            log_posterior: f64::NAN,
            degenerate: true,
        });
    }

    let problem = Problem::new(data, domain, mean, sd, options);
    let mut starts = vec![prior_mode.clone()];
    if let Some(w) = &options.warm_start {
        if w.dim() == d && w.validate().is_ok() {
            let mut t = vec![(w.output_scale / sd).ln()];
            t.extend((0..d).map(|k| (w.lengthscales[k] / domain.half_width(k)).ln()));
            starts.push(t);
        }
    }
    let mut rng = rng::rng_for(seed, &[0x6669_74]);
    while starts.len() < options.restarts.max(1) {
        let mut t = vec![
            prior_mode[0] + options.output_scale_log_sd * rng.sample::<f64, _>(StandardNormal),
        ];
        t.extend((0..d).map(|_| {
            prior_mode[1] + options.lengthscale_log_sd * rng.sample::<f64, _>(StandardNormal)
        }));
        starts.push(t);
    }

    let lower = vec![LOG_LOWER; d + 1];
    let upper = vec![LOG_UPPER; d + 1];
    let opts = BoxMinimizeOptions {
        max_iter: options.max_iter,
        gtol: 1e-5,
        ftol: 1e-9,
    };
    let mut best: Option<(Vec<f64>, f64)> = None;
    for start in starts {
        if let Some(r) = minimize_box(|t| problem.objective(t), &start, &lower, &upper, opts) {
            if best.as_ref().is_none_or(|(_, f)| r.f < *f) {
                best = Some((r.x, r.f));
            }
        }
    }
    let (theta, f) = best.ok_or_else(|| Error::Factorization {
        size: data.len(),
        max_jitter: linalg::JITTER_CEILING,
        min_diag: f64::NAN,
        max_diag: f64::NAN,
    })?;
    Ok(FitReport {
        kernel: to_original(&theta, sd),
        log_posterior: -f,
        degenerate: false,
    })
}

struct Problem {
    family: KernelFamily,
    /// Per-dimension squared coordinate differences.
    sq_diffs: Vec<DMatrix<f64>>,
    resid: DVector<f64>,
    prior_mode: Vec<f64>,
    prior_sd: Vec<f64>,
}

impl Problem {
    fn new(
        data: &[Observation],
        domain: &Domain,
        mean: f64,
        sd: f64,
        options: &FitOptions,
    ) -> Self {
        let d = domain.dim();
        let n = data.len();
        let z: Vec<Vec<f64>> = data.iter().map(|o| domain.to_normalized(&o.x)).collect();
        let sq_diffs = (0..d)
            .map(|k| DMatrix::from_fn(n, n, |i, j| (z[i][k] - z[j][k]).powi(2)))
            .collect();
        let resid = DVector::from_iterator(n, data.iter().map(|o| (o.y - mean) / sd));
        let mut prior_mode = vec![PRIOR_OUTPUT_SCALE.ln()];
        prior_mode.extend(std::iter::repeat(PRIOR_LENGTHSCALE.ln()).take(d));
        let mut prior_sd = vec![options.output_scale_log_sd];
        prior_sd.extend(std::iter::repeat(options.lengthscale_log_sd).take(d));
        Self {
            family: options.family,
            sq_diffs,
            resid,
            prior_mode,
            prior_sd,
        }
    }

    /// Negative log posterior and its gradient in log-scale coordinates.
    fn objective(&self, theta: &[f64]) -> Option<(f64, Vec<f64>)> {
        let d = self.sq_diffs.len();
        let n = self.resid.len();
        let var = (2.0 * theta[0]).exp();
        let inv_l2: Vec<f64> = (0..d).map(|k| (-2.0 * theta[k + 1]).exp()).collect();
        let mut u = DMatrix::<f64>::zeros(n, n);
        for (k, dk) in self.sq_diffs.iter().enumerate() {
            u += dk * inv_l2[k];
        }
        let mut gram = DMatrix::<f64>::zeros(n, n);
        let mut dprofile = DMatrix::<f64>::zeros(n, n);
        for j in 0..n {
            for i in j..n {
                let (g, gp) = self.family.profile(u[(i, j)]);
                gram[(i, j)] = var * g;
                gram[(j, i)] = var * g;
                dprofile[(i, j)] = var * gp;
                dprofile[(j, i)] = var * gp;
            }
        }
        // the jitter ladder is relative to the unit-variance gram matrix
        let chol = linalg::cholesky_with_jitter(&(&gram / var)).ok()?;
        let scaled_resid = &self.resid / var.sqrt();
        let alpha_unit = chol.solve(&scaled_resid);
        // for K = var·(G + jI): α = K⁻¹ r = α_unit / √var
        let alpha = &alpha_unit / var.sqrt();
        let data_fit = 0.5 * self.resid.dot(&alpha);
        let log_det = chol.log_det() + n as f64 * var.ln();
        let mut nlp = data_fit + 0.5 * log_det + 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();

        let linv = linalg::forward_substitute_matrix(&chol.factor);
        // K⁻¹ = L⁻ᵀ L⁻¹ / var
        let kinv = (linv.transpose() * &linv) / var;
        // W = K⁻¹ - ααᵀ; ∂nll/∂θ = ½ tr(W ∂K)
        let w = kinv - &alpha * alpha.transpose();
        let mut grad = vec![0.0; d + 1];
        grad[0] = w.dot(&gram);
        for k in 0..d {
            // ∂K/∂ln ℓ_k = var·g'(u)·(-2 Δ²_k / ℓ_k²)
            let dk = dprofile.component_mul(&self.sq_diffs[k]) * (-2.0 * inv_l2[k]);
            grad[k + 1] = 0.5 * w.dot(&dk);
        }
        for (i, g) in grad.iter_mut().enumerate() {
            let z = (theta[i] - self.prior_mode[i]) / self.prior_sd[i];
            nlp += 0.5 * z * z;
            *g += z / self.prior_sd[i];
        }
        nlp.is_finite().then_some((nlp, grad))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::GpModel;

    #[test]
    fn gradient_matches_finite_differences() {
        let domain = Domain::new(vec![0.0, -2.0], vec![1.0, 2.0]).unwrap();
        let data: Vec<Observation> = (0..12)
            .map(|i| {
                let x = vec![(i as f64 * 0.37) % 1.0, -2.0 + (i as f64 * 1.13) % 4.0];
                let y = (3.0 * x[0]).sin() + 0.2 * x[1] * x[1];
                Observation::new(x, y)
            })
            .collect();
        for family in [KernelFamily::Matern52, KernelFamily::SquaredExponential] {
            let opts = FitOptions {
                family,
                ..Default::default()
            };
            let p = Problem::new(&data, &domain, 0.3, 1.2, &opts);
            let theta = vec![0.2, -0.4, 0.1];
            let (_, g) = p.objective(&theta).unwrap();
            for i in 0..3 {
                let h = 1e-6;
                let mut tp = theta.clone();
                tp[i] += h;
                let mut tm = theta.clone();
                tm[i] -= h;
                let fd = (p.objective(&tp).unwrap().0 - p.objective(&tm).unwrap().0) / (2.0 * h);
                assert!(
                    (g[i] - fd).abs() < 1e-5 * (1.0 + fd.abs()),
                    "{family:?} {i}: {} vs {}",
                    g[i],
                    fd
                );
            }
        }
    }

    #[test]
    fn recovers_lengthscale_from_gp_sample() {
        let domain = Domain::symmetric_unit(1);
        let truth = KernelSpec::new(KernelFamily::Matern52, 1.0, vec![0.3]).unwrap();
        let prior = GpModel::new(truth, domain.clone(), vec![]).unwrap();
        let xs: Vec<Vec<f64>> = (0..60)
            .map(|i| vec![-1.0 + 2.0 * i as f64 / 59.0])
            .collect();
        let ys = prior.draw_posterior(&xs, 1, 17).unwrap();
        let data: Vec<Observation> = xs
            .into_iter()
            .zip(ys.row(0).iter())
            .map(|(x, y)| Observation::new(x, *y))
            .collect();
        let fitted = fit_hyperparameters(&data, &domain, 3).unwrap();
        let ratio = fitted.lengthscales[0] / 0.3;
        assert!((0.5..=2.0).contains(&ratio), "fitted {fitted:?}");
    }

    #[test]
    fn constant_data_returns_prior_mode() {
        let domain = Domain::new(vec![0.0], vec![4.0]).unwrap();
        let data = vec![
            Observation::new(vec![1.0], 2.0),
            Observation::new(vec![3.0], 2.0),
        ];
        let r = fit_hyperparameters_with(&data, &domain, 0, &FitOptions::default()).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.kernel.lengthscales, vec![1.0]);
        assert_eq!(r.kernel.output_scale, 1.0);
    }

    #[test]
    fn rejects_too_few_or_duplicate_points() {
        let domain = Domain::symmetric_unit(1);
        assert!(fit_hyperparameters(&[Observation::new(vec![0.0], 1.0)], &domain, 0).is_err());
        let dup = vec![
            Observation::new(vec![0.5], 1.0),
            Observation::new(vec![0.5], 2.0),
        ];
        assert!(fit_hyperparameters(&dup, &domain, 0).is_err());
    }

    #[test]
    fn fit_is_deterministic_in_seed() {
        let domain = Domain::symmetric_unit(2);
        let data: Vec<Observation> = (0..10)
            .map(|i| {
                let x = vec![((i * 7) % 10) as f64 / 5.0 - 0.9, (i as f64 / 5.0) - 0.9];
                Observation::new(x.clone(), x[0].exp() + x[1])
            })
            .collect();
        assert_eq!(
            fit_hyperparameters(&data, &domain, 5).unwrap(),
            fit_hyperparameters(&data, &domain, 5).unwrap()
        );
    }
}
