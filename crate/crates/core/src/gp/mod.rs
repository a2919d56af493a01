//! Gaussian-process regression with joint value/gradient/Hessian inference.
//!
//! Internally the model works on inputs mapped to `[-1, 1]^d` and on residuals
//! `(y - prior_mean) / output_scale`, so the kernel matrix has a unit diagonal
//! and the jitter ladder is scale-free. Every quantity handed out is converted
//! back to original units.

pub mod fit;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::domain::{Domain, Observation};
use crate::error::{Error, Result};
use crate::kernel::{kernel_derivative, KernelFamily, KernelSpec};
use crate::linalg::{self, JitteredCholesky};
use crate::rng;

pub use fit::{fit_hyperparameters, fit_hyperparameters_with, FitOptions, FitReport};

/// A derivative of the latent function at a point; total order at most 2.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeSpec {
    pub point: Vec<f64>,
    pub multi_index: Vec<u32>,
}

impl DerivativeSpec {
    pub fn value(point: Vec<f64>) -> Self {
        let d = point.len();
        Self {
            point,
            multi_index: vec![0; d],
        }
    }

    pub fn partial(point: Vec<f64>, k: usize) -> Self {
        let mut mi = vec![0; point.len()];
        mi[k] = 1;
        Self {
            point,
            multi_index: mi,
        }
    }

    pub fn second(point: Vec<f64>, i: usize, j: usize) -> Self {
        let mut mi = vec![0; point.len()];
        mi[i] += 1;
        mi[j] += 1;
        Self {
            point,
            multi_index: mi,
        }
    }

    pub fn order(&self) -> u32 {
        self.multi_index.iter().sum()
    }
}

/// Multivariate normal belief.
#[derive(Debug, Clone)]
pub struct GaussianBelief {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

impl GaussianBelief {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn variance(&self, i: usize) -> f64 {
        self.covariance[(i, i)]
    }

    /// Draws `n` joint samples (rows), factorizing the covariance with the jitter ladder.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<DMatrix<f64>> {
        let scale = self
            .covariance
            .diagonal()
            .iter()
            .cloned()
            .fold(0.0, f64::max);
        if scale <= 0.0 {
            return Ok(DMatrix::from_fn(n, self.dim(), |_, c| self.mean[c]));
        }
        let chol = linalg::cholesky_with_jitter(&(&self.covariance / scale))?;
        let mut draws = linalg::sample_mvn(&DVector::zeros(self.dim()), &chol.factor, n, rng);
        let s = scale.sqrt();
        for mut row in draws.row_iter_mut() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = self.mean[c] + s * *v;
            }
        }
        Ok(draws)
    }
}

/// Joint belief over the upper-triangle Hessian entries in the interior dimensions.
#[derive(Debug, Clone)]
pub struct HessianBelief {
    /// `d' × d'` symmetric mean, built from the triangle.
    pub mean: DMatrix<f64>,
    /// Belief over entries `(i, j), i <= j`, in row-major triangle order.
    pub triangle: GaussianBelief,
    pub active_dims: Vec<usize>,
}

impl HessianBelief {
    pub fn size(&self) -> usize {
        self.active_dims.len()
    }

    /// `(i, j)` positions (within the active block) of each triangle entry.
    pub fn triangle_positions(size: usize) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(size * (size + 1) / 2);
        for i in 0..size {
            for j in i..size {
                out.push((i, j));
            }
        }
        out
    }

    pub fn matrix_from_triangle(size: usize, entries: &[f64]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(size, size);
        for (v, (i, j)) in entries.iter().zip(Self::triangle_positions(size)) {
            m[(i, j)] = *v;
            m[(j, i)] = *v;
        }
        m
    }
}

/// A trained GP surrogate. Immutable once built.
#[derive(Debug, Clone)]
pub struct GpModel {
    kernel: KernelSpec,
    domain: Domain,
    data: Vec<Observation>,
    prior_mean: f64,
    unit_kernel: KernelSpec,
    inputs: Vec<Vec<f64>>,
    chol: JitteredCholesky,
    alpha: DVector<f64>,
}

impl GpModel {
    /// Conditions a GP with the given kernel on `data`. The prior mean is the
    /// sample mean of the observations when there are at least two, else zero.
    pub fn new(kernel: KernelSpec, domain: Domain, data: Vec<Observation>) -> Result<Self> {
        let prior_mean = if data.len() >= 2 {
            data.iter().map(|o| o.y).sum::<f64>() / data.len() as f64
        } else {
            0.0
        };
        Self::with_prior_mean(kernel, domain, data, prior_mean)
    }

    pub fn with_prior_mean(
        kernel: KernelSpec,
        domain: Domain,
        data: Vec<Observation>,
        prior_mean: f64,
    ) -> Result<Self> {
        kernel.validate()?;
        if kernel.dim() != domain.dim() {
            return Err(Error::InvalidArgument(format!(
                "kernel has {} lengthscales but the domain has {} dimensions",
                kernel.dim(),
                domain.dim()
            )));
        }
        for o in &data {
            if !domain.contains(&o.x) {
                return Err(Error::InvalidArgument(format!(
                    "observation {:?} lies outside the domain",
                    o.x
                )));
            }
            if !o.y.is_finite() {
                return Err(Error::NonFiniteObjective(o.x.clone()));
            }
        }
        let unit_kernel = KernelSpec {
            family: kernel.family,
            output_scale: 1.0,
            lengthscales: kernel
                .lengthscales
                .iter()
                .enumerate()
                .map(|(k, l)| l / domain.half_width(k))
                .collect(),
        };
        let inputs: Vec<Vec<f64>> = data.iter().map(|o| domain.to_normalized(&o.x)).collect();
        let n = inputs.len();
        let gram = DMatrix::from_fn(n, n, |i, j| unit_kernel.value(&inputs[i], &inputs[j]));
        let chol = linalg::cholesky_with_jitter(&gram)?;
        let resid = DVector::from_iterator(
            n,
            data.iter()
                .map(|o| (o.y - prior_mean) / kernel.output_scale),
        );
        let alpha = chol.solve(&resid);
        Ok(Self {
            kernel,
            domain,
            data,
            prior_mean,
            unit_kernel,
            inputs,
            chol,
            alpha,
        })
    }

    /// Fits hyperparameters by MAP and conditions on the data.
    pub fn fit(
        data: Vec<Observation>,
        domain: Domain,
        seed: u64,
        options: &FitOptions,
    ) -> Result<(Self, FitReport)> {
        let report = fit_hyperparameters_with(&data, &domain, seed, options)?;
        let model = Self::new(report.kernel.clone(), domain, data)?;
        Ok((model, report))
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn family(&self) -> KernelFamily {
        self.kernel.family
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn data(&self) -> &[Observation] {
        &self.data
    }

    pub fn prior_mean(&self) -> f64 {
        self.prior_mean
    }

    /// Diagonal jitter added to the unit-scale kernel matrix.
    pub fn jitter(&self) -> f64 {
        self.chol.jitter
    }

    /// Lower-triangular factor of the unit-scale kernel matrix plus jitter.
    pub fn factor(&self) -> &DMatrix<f64> {
        &self.chol.factor
    }

    /// Prior variance of the latent function in original units.
    pub fn prior_variance(&self) -> f64 {
        self.kernel.variance()
    }

    fn derivative_scale(&self, multi_index: &[u32]) -> f64 {
        multi_index
            .iter()
            .enumerate()
            .fold(self.kernel.output_scale, |acc, (k, &m)| {
                acc / self.domain.half_width(k).powi(m as i32)
            })
    }

    /// Exact posterior over an arbitrary set of derivative queries.
    pub fn posterior_joint(&self, queries: &[DerivativeSpec]) -> Result<GaussianBelief> {
        if queries.is_empty() {
            return Err(Error::InvalidArgument(
                "posterior_joint needs at least one query".into(),
            ));
        }
        let d = self.domain.dim();
        let n = self.inputs.len();
        let m = queries.len();
        let mut zq = Vec::with_capacity(m);
        for q in queries {
            if q.point.len() != d || q.multi_index.len() != d {
                return Err(Error::InvalidArgument(format!(
                    "query dimension mismatch: {q:?} in a {d}-dimensional model"
                )));
            }
            if q.order() > 2 {
                return Err(Error::InvalidArgument(
                    "posterior queries support derivatives up to order 2".into(),
                ));
            }
            zq.push(self.domain.to_normalized(&q.point));
        }

        // cross covariances k(query, data), one column per query
        let mut cross = DMatrix::<f64>::zeros(n, m);
        for (c, q) in queries.iter().enumerate() {
            for (r, x) in self.inputs.iter().enumerate() {
                cross[(r, c)] =
                    kernel_derivative(&self.unit_kernel, &zq[c], x, &q.multi_index, &[])?;
            }
        }
        let mut prior = DMatrix::<f64>::zeros(m, m);
        for i in 0..m {
            for j in i..m {
                let v = kernel_derivative(
                    &self.unit_kernel,
                    &zq[i],
                    &zq[j],
                    &queries[i].multi_index,
                    &queries[j].multi_index,
                )?;
                prior[(i, j)] = v;
                prior[(j, i)] = v;
            }
        }

        let mut mean = DVector::<f64>::zeros(m);
        let mut cov = prior;
        if n > 0 {
            mean = cross.transpose() * &self.alpha;
            let v = linalg::forward_substitute_columns(&self.chol.factor, &cross);
            cov -= v.transpose() * &v;
        }

        let scales: Vec<f64> = queries
            .iter()
            .map(|q| self.derivative_scale(&q.multi_index))
            .collect();
        for i in 0..m {
            mean[i] *= scales[i];
            if queries[i].order() == 0 {
                mean[i] += self.prior_mean;
            }
        }
        for i in 0..m {
            for j in i..m {
                let v = 0.5 * (cov[(i, j)] + cov[(j, i)]) * scales[i] * scales[j];
                cov[(i, j)] = v;
                cov[(j, i)] = v;
            }
        }
        Ok(GaussianBelief {
            mean,
            covariance: cov,
        })
    }

    /// Kernel with unit output scale acting on normalized inputs.
    pub(crate) fn unit_kernel(&self) -> &KernelSpec {
        &self.unit_kernel
    }

    /// Normalized training inputs.
    pub(crate) fn normalized_inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    /// `K⁻¹ r` for the standardized residuals `r`.
    pub(crate) fn unit_weights(&self) -> &DVector<f64> {
        &self.alpha
    }

    pub(crate) fn cross_values(&self, z: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            self.inputs.len(),
            self.inputs.iter().map(|x| self.unit_kernel.value(z, x)),
        )
    }

    /// Posterior mean and variance of the function value at `x`.
    pub fn predict(&self, x: &[f64]) -> (f64, f64) {
        let z = self.domain.to_normalized(x);
        if self.inputs.is_empty() {
            return (self.prior_mean, self.kernel.variance());
        }
        let k = self.cross_values(&z);
        let mean = k.dot(&self.alpha);
        let v = linalg::forward_substitute(&self.chol.factor, &k);
        let var = (1.0 - v.norm_squared()).max(0.0);
        (
            self.prior_mean + self.kernel.output_scale * mean,
            self.kernel.variance() * var,
        )
    }

    pub fn predict_mean(&self, x: &[f64]) -> f64 {
        if self.inputs.is_empty() {
            return self.prior_mean;
        }
        let z = self.domain.to_normalized(x);
        self.prior_mean + self.kernel.output_scale * self.cross_values(&z).dot(&self.alpha)
    }

    /// Posterior mean and its gradient (original units).
    pub fn mean_and_gradient(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let d = self.domain.dim();
        let z = self.domain.to_normalized(x);
        let mut grad = vec![0.0; d];
        let mut mean = 0.0;
        let mut mi = vec![0u32; d];
        for (j, xj) in self.inputs.iter().enumerate() {
            let a = self.alpha[j];
            mean += self.unit_kernel.value(&z, xj) * a;
            for k in 0..d {
                mi[k] = 1;
                grad[k] += kernel_derivative(&self.unit_kernel, &z, xj, &mi, &[])
                    .expect("first-order derivative is always valid")
                    * a;
                mi[k] = 0;
            }
        }
        for (k, g) in grad.iter_mut().enumerate() {
            *g *= self.kernel.output_scale / self.domain.half_width(k);
        }
        (self.prior_mean + self.kernel.output_scale * mean, grad)
    }

    /// Belief over the Hessian at `x`, restricted to dimensions where `x` is strictly interior.
    pub fn infer_hessian(&self, x: &[f64]) -> Result<HessianBelief> {
        let active: Vec<usize> = (0..self.domain.dim())
            .filter(|&k| !self.domain.on_boundary(x, k))
            .collect();
        if active.is_empty() {
            return Err(Error::NoInteriorDimensions);
        }
        let size = active.len();
        let queries: Vec<DerivativeSpec> = HessianBelief::triangle_positions(size)
            .into_iter()
            .map(|(i, j)| DerivativeSpec::second(x.to_vec(), active[i], active[j]))
            .collect();
        let triangle = self.posterior_joint(&queries)?;
        let mean = HessianBelief::matrix_from_triangle(size, triangle.mean.as_slice());
        Ok(HessianBelief {
            mean,
            triangle,
            active_dims: active,
        })
    }

    /// `n_draws` joint posterior samples of the latent function at `points`
    /// (one row per draw).
    pub fn draw_posterior(
        &self,
        points: &[Vec<f64>],
        n_draws: usize,
        seed: u64,
    ) -> Result<DMatrix<f64>> {
        if n_draws == 0 {
            return Err(Error::InvalidArgument("n_draws must be at least 1".into()));
        }
        if points.is_empty() {
            return Ok(DMatrix::zeros(n_draws, 0));
        }
        let queries: Vec<DerivativeSpec> = points
            .iter()
            .map(|p| DerivativeSpec::value(p.clone()))
            .collect();
        let belief = self.posterior_joint(&queries)?;
        // factorize on the unit scale so the jitter ladder means the same thing as for the gram matrix
        let unit_cov = &belief.covariance / self.kernel.variance();
        let chol = linalg::cholesky_with_jitter(&unit_cov)?;
        let mut rng = rng::rng_for(seed, &[0x6472_6177]);
        let m = points.len();
        let z = DMatrix::<f64>::from_fn(m, n_draws, |_, _| rng.sample(StandardNormal));
        let lz = &chol.factor * z;
        let s = self.kernel.output_scale;
        Ok(DMatrix::from_fn(n_draws, m, |r, c| {
            belief.mean[c] + s * lz[(c, r)]
        }))
    }
}
