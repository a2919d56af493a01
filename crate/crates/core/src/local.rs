//! Local exploitation: BFGS in coordinates where the surrogate's Hessian
//! estimate is the identity, with finite-difference gradients.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::domain::Domain;
use crate::gp::GpModel;
use crate::optim::{bfgs_inverse_update, dot, identity};

/// Finite-difference step in rescaled units.
pub const FD_STEP: f64 = 1e-6;
const ARMIJO: f64 = 1e-4;
const CURVATURE: f64 = 0.9;
const MAX_TRIALS: usize = 40;
const MAX_EXPANSIONS: usize = 6;

/// Linear change of variables `z = T (x − origin)` over the active dimensions,
/// with `T = Cᵀ` for `H = C Cᵀ`, so that `xᵀ H x = zᵀ z`.
#[derive(Debug, Clone)]
pub struct RescaledProblem {
    pub transform: DMatrix<f64>,
    pub inverse: DMatrix<f64>,
    pub origin: Vec<f64>,
    pub hessian_estimate: DMatrix<f64>,
    /// Dimensions that move; the others stay at `origin`.
    pub active_dims: Vec<usize>,
    /// The Hessian estimate was not PD and the identity was used instead.
    pub fallback: bool,
}

impl RescaledProblem {
    pub fn identity(origin: Vec<f64>, active_dims: Vec<usize>) -> Self {
        let n = active_dims.len();
        Self {
            transform: DMatrix::identity(n, n),
            inverse: DMatrix::identity(n, n),
            origin,
            hessian_estimate: DMatrix::identity(n, n),
            active_dims,
            fallback: false,
        }
    }

    pub fn from_hessian(hessian: DMatrix<f64>, origin: Vec<f64>, active_dims: Vec<usize>) -> Self {
        let sym = (&hessian + hessian.transpose()) * 0.5;
        match sym.clone().cholesky() {
            Some(chol) => {
                let c = chol.l();
                let transform = c.transpose();
                let inverse = transform
                    .clone()
                    .try_inverse()
                    .expect("triangular factor with positive diagonal is invertible");
                Self {
                    transform,
                    inverse,
                    origin,
                    hessian_estimate: sym,
                    active_dims,
                    fallback: false,
                }
            }
            None => Self {
                hessian_estimate: sym,
                fallback: true,
                ..Self::identity(origin, active_dims)
            },
        }
    }

    pub fn dim(&self) -> usize {
        self.active_dims.len()
    }

    pub fn to_z(&self, x: &[f64]) -> DVector<f64> {
        let dx = DVector::from_iterator(
            self.dim(),
            self.active_dims.iter().map(|&k| x[k] - self.origin[k]),
        );
        &self.transform * dx
    }

    pub fn to_x(&self, z: &DVector<f64>) -> Vec<f64> {
        let dx = &self.inverse * z;
        let mut x = self.origin.clone();
        for (i, &k) in self.active_dims.iter().enumerate() {
            x[k] += dx[i];
        }
        x
    }
}

/// Rescaling from the surrogate's Hessian mean at `x_hat`; falls back to the
/// identity when the mean is not PD or every dimension sits on the boundary.
pub fn build_rescaling(model: &GpModel, x_hat: &[f64]) -> RescaledProblem {
    match model.infer_hessian(x_hat) {
        Ok(belief) => {
            RescaledProblem::from_hessian(belief.mean, x_hat.to_vec(), belief.active_dims)
        }
        Err(_) => RescaledProblem {
            fallback: true,
            ..RescaledProblem::identity(x_hat.to_vec(), (0..x_hat.len()).collect())
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalResult {
    pub x_final: Vec<f64>,
    /// `NaN` when the budget allowed no evaluation at all.
    pub y_final: f64,
    pub n_evals: usize,
    /// Evaluations spent on function values (start point and line searches).
    pub value_evals: usize,
    /// Number of finite-difference gradients, each costing `2 d'` evaluations.
    pub gradient_evals: usize,
    pub line_searches: usize,
    pub grad_norm: f64,
    pub converged: bool,
    /// Why the search stopped without converging.
    pub diagnostic: Option<String>,
}

struct Stop(String);

struct Evaluator<'a> {
    objective: &'a mut dyn FnMut(&[f64]) -> f64,
    problem: &'a RescaledProblem,
    domain: &'a Domain,
    used: usize,
    budget: usize,
    value_evals: usize,
    gradient_evals: usize,
}

impl Evaluator<'_> {
    fn point(&self, z: &DVector<f64>) -> (DVector<f64>, Vec<f64>) {
        let x = self.domain.clamped(&self.problem.to_x(z));
        (self.problem.to_z(&x), x)
    }

    fn raw(&mut self, x: &[f64]) -> Result<f64, Stop> {
        if self.used >= self.budget {
            return Err(Stop("evaluation budget exhausted".into()));
        }
        self.used += 1;
        let y = (self.objective)(x);
        if !y.is_finite() {
            return Err(Stop(format!("objective returned {y} at {x:?}")));
        }
        Ok(y)
    }

    fn value(&mut self, x: &[f64]) -> Result<f64, Stop> {
        let y = self.raw(x)?;
        self.value_evals += 1;
        Ok(y)
    }

    /// Central differences in z; one-sided second-order differences where a
    /// central probe would leave the box. Always `2 d'` evaluations.
    fn gradient(&mut self, z: &DVector<f64>, f0: f64) -> Result<DVector<f64>, Stop> {
        let n = z.len();
        if self.used + 2 * n > self.budget {
            return Err(Stop("evaluation budget exhausted".into()));
        }
        let h = FD_STEP;
        let (problem, domain) = (self.problem, self.domain);
        let mut g = DVector::zeros(n);
        for i in 0..n {
            let probe = |s: f64| {
                let mut zz = z.clone();
                zz[i] += s;
                problem.to_x(&zz)
            };
            let (xp, xm) = (probe(h), probe(-h));
            let (inside_p, inside_m) = (domain.contains(&xp), domain.contains(&xm));
            g[i] = if inside_p == inside_m {
                let fp = self.raw(&domain.clamped(&xp))?;
                let fm = self.raw(&domain.clamped(&xm))?;
                (fp - fm) / (2.0 * h)
            } else if inside_p {
                let f1 = self.raw(&xp)?;
                let f2 = self.raw(&domain.clamped(&probe(2.0 * h)))?;
                (-3.0 * f0 + 4.0 * f1 - f2) / (2.0 * h)
            } else {
                let f1 = self.raw(&xm)?;
                let f2 = self.raw(&domain.clamped(&probe(-2.0 * h)))?;
                (3.0 * f0 - 4.0 * f1 + f2) / (2.0 * h)
            };
        }
        self.gradient_evals += 1;
        Ok(g)
    }
}

/// BFGS in rescaled coordinates from `x0`, identity initial inverse Hessian.
///
/// The line search tries the unit step first, backtracks on insufficient
/// decrease (no gradient needed), and expands while the curvature condition
/// fails. Iterates are clamped to the domain. Stops when the z-gradient norm is
/// below `grad_tol`, on budget exhaustion, on a failed line search, or when the
/// objective returns a non-finite value.
pub fn bfgs_minimize(
    objective: &mut dyn FnMut(&[f64]) -> f64,
    problem: &RescaledProblem,
    domain: &Domain,
    x0: &[f64],
    grad_tol: f64,
    max_evals: usize,
) -> LocalResult {
    let mut ev = Evaluator {
        objective,
        problem,
        domain,
        used: 0,
        budget: max_evals,
        value_evals: 0,
        gradient_evals: 0,
    };
    let (mut z, mut x) = ev.point(&problem.to_z(x0));
    let mut fx = f64::NAN;
    let mut grad_norm = f64::NAN;
    let mut line_searches = 0;
    let mut converged = false;
    let mut diagnostic = None;

    let outcome: Result<(), Stop> = (|| {
        fx = ev.value(&x)?;
        let mut g = ev.gradient(&z, fx)?;
        let n = z.len();
        let mut h = identity(n);
        loop {
            grad_norm = g.norm();
            if grad_norm < grad_tol {
                converged = true;
                return Ok(());
            }
            let gs = g.as_slice();
            let mut p: Vec<f64> = (0..n).map(|i| -dot(&h[i], gs)).collect();
            if dot(&p, gs) >= 0.0 {
                h = identity(n);
                p = gs.iter().map(|v| -v).collect();
            }
            let p = DVector::from_vec(p);
            let slope = g.dot(&p);
            line_searches += 1;

            let mut alpha = 1.0;
            let mut expansions = 0;
            let mut backtracked = false;
            let mut accepted: Option<(DVector<f64>, Vec<f64>, f64, DVector<f64>)> = None;
            for _ in 0..MAX_TRIALS {
                let (zt, xt) = ev.point(&(&z + &p * alpha));
                let step = &zt - &z;
                if step.iter().all(|v| *v == 0.0) {
                    break;
                }
                let clamped = (&step - &p * alpha).norm() > 1e-12 * (1.0 + step.norm());
                let ft = ev.value(&xt)?;
                if !(ft <= fx + ARMIJO * g.dot(&step)) {
                    if accepted.is_some() {
                        break;
                    }
                    backtracked = true;
                    alpha *= 0.5;
                    continue;
                }
                let gt = ev.gradient(&zt, ft)?;
                let curvature_ok = gt.dot(&p) >= CURVATURE * slope;
                accepted = Some((zt, xt, ft, gt));
                if curvature_ok || backtracked || clamped || expansions >= MAX_EXPANSIONS {
                    break;
                }
                expansions += 1;
                alpha *= 2.0;
            }
            let Some((zn, xn, fnew, gn)) = accepted else {
                return Err(Stop("line search found no decrease".into()));
            };
            let s = &zn - &z;
            let y = &gn - &g;
            let sy = s.dot(&y);
            if sy > 1e-12 * s.norm() * y.norm() {
                bfgs_inverse_update(&mut h, s.as_slice(), y.as_slice(), sy);
            }
            z = zn;
            x = xn;
            fx = fnew;
            g = gn;
        }
    })();
    if let Err(Stop(msg)) = outcome {
        diagnostic = Some(msg);
    }
    LocalResult {
        x_final: x,
        y_final: fx,
        n_evals: ev.used,
        value_evals: ev.value_evals,
        gradient_evals: ev.gradient_evals,
        line_searches,
        grad_norm,
        converged,
        diagnostic,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_hessian_transform() {
        let h = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 1.0]));
        let p = RescaledProblem::from_hessian(h.clone(), vec![0.0, 0.0], vec![0, 1]);
        assert!(!p.fallback);
        assert!(
            (p.transform[(0, 0)] - 2.0).abs() < 1e-15 && (p.transform[(1, 1)] - 1.0).abs() < 1e-15
        );
        assert!((&p.transform * &p.inverse - DMatrix::identity(2, 2)).norm() < 1e-10);
        // xᵀ H x == zᵀ z
        let x = [0.3, -0.7];
        let z = p.to_z(&x);
        let xhx = 4.0 * x[0] * x[0] + x[1] * x[1];
        assert!((z.dot(&z) - xhx).abs() < 1e-14);
        assert_eq!(p.to_x(&z), x.to_vec());
    }

    #[test]
    fn indefinite_falls_back_to_identity() {
        let h = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0]));
        let p = RescaledProblem::from_hessian(h, vec![0.0, 0.0], vec![0, 1]);
        assert!(p.fallback);
        assert_eq!(p.transform, DMatrix::identity(2, 2));
    }

    #[test]
    fn zero_budget_returns_start() {
        let p = RescaledProblem::identity(vec![0.1], vec![0]);
        let mut f = |x: &[f64]| x[0] * x[0];
        let r = bfgs_minimize(&mut f, &p, &Domain::symmetric_unit(1), &[0.1], 1e-6, 0);
        assert_eq!(r.x_final, vec![0.1]);
        assert!(!r.converged);
        assert_eq!(r.n_evals, 0);
    }

    #[test]
    fn unit_quadratic_in_one_line_search() {
        let domain = Domain::symmetric_unit(3);
        let p = RescaledProblem::identity(vec![0.0; 3], vec![0, 1, 2]);
        let mut f = |x: &[f64]| 0.5 * x.iter().map(|v| v * v).sum::<f64>();
        let r = bfgs_minimize(&mut f, &p, &domain, &[0.4, -0.2, 0.9], 1e-6, 1000);
        assert!(r.converged, "{r:?}");
        assert!(r.line_searches <= 3);
        assert_eq!(r.n_evals, r.value_evals + 2 * 3 * r.gradient_evals);
    }

    #[test]
    fn non_finite_objective_aborts() {
        let domain = Domain::symmetric_unit(1);
        let p = RescaledProblem::identity(vec![0.0], vec![0]);
        let mut f = |x: &[f64]| if x[0] < 0.2 { f64::NAN } else { x[0] * x[0] };
        let r = bfgs_minimize(&mut f, &p, &domain, &[0.5], 1e-6, 1000);
        assert!(!r.converged);
        assert!(r.diagnostic.unwrap().contains("objective"));
    }
}
