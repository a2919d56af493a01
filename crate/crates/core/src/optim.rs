//! Small inner optimizers shared by model fitting and acquisition search.

/// Options for [`minimize_box`].
#[derive(Debug, Clone, Copy)]
pub struct BoxMinimizeOptions {
    pub max_iter: usize,
    /// Stop when the projected gradient's largest component falls below this.
    pub gtol: f64,
    /// Stop after two consecutive iterations with relative decrease below this.
    pub ftol: f64,
}

impl Default for BoxMinimizeOptions {
    fn default() -> Self {
        Self {
            max_iter: 100,
            gtol: 1e-6,
            ftol: 1e-10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BoxMinimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub evaluations: usize,
}

fn project(x: &mut [f64], lower: &[f64], upper: &[f64]) {
    for (k, v) in x.iter_mut().enumerate() {
        *v = v.clamp(lower[k], upper[k]);
    }
}

/// Projected quasi-Newton minimization with an analytic gradient.
///
/// `f` returns `None` where the objective cannot be evaluated; such points are
/// rejected by the backtracking search. Returns `None` only if `x0` itself fails.
pub fn minimize_box<F>(
    mut f: F,
    x0: &[f64],
    lower: &[f64],
    upper: &[f64],
    opts: BoxMinimizeOptions,
) -> Option<BoxMinimum>
where
    F: FnMut(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    project(&mut x, lower, upper);
    let (mut fx, mut g) = f(&x)?;
    let mut evaluations = 1;
    let mut h = identity(n);
    let mut stalls = 0;
    let mut iterations = 0;

    for _ in 0..opts.max_iter {
        iterations += 1;
        let free: Vec<bool> = (0..n)
            .map(|i| !((x[i] <= lower[i] && g[i] > 0.0) || (x[i] >= upper[i] && g[i] < 0.0)))
            .collect();
        let pg: Vec<f64> = (0..n).map(|i| if free[i] { g[i] } else { 0.0 }).collect();
        if pg.iter().fold(0.0f64, |m, v| m.max(v.abs())) < opts.gtol {
            break;
        }
        let mut dir: Vec<f64> = (0..n)
            .map(|i| {
                if !free[i] {
                    return 0.0;
                }
                -(0..n)
                    .filter(|&j| free[j])
                    .map(|j| h[i][j] * pg[j])
                    .sum::<f64>()
            })
            .collect();
        if dot(&dir, &pg) >= 0.0 {
            h = identity(n);
            dir = pg.iter().map(|v| -v).collect();
        }

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let mut trial: Vec<f64> = x.iter().zip(&dir).map(|(a, b)| a + step * b).collect();
            project(&mut trial, lower, upper);
            let moved: Vec<f64> = trial.iter().zip(&x).map(|(a, b)| a - b).collect();
            if moved.iter().all(|v| *v == 0.0) {
                break;
            }
            evaluations += 1;
            if let Some((ft, gt)) = f(&trial) {
                if ft.is_finite() && ft <= fx + 1e-4 * dot(&g, &moved) {
                    accepted = Some((trial, ft, gt, moved));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((xn, fnew, gn, s)) = accepted else {
            break;
        };
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * norm(&s) * norm(&y) {
            bfgs_inverse_update(&mut h, &s, &y, sy);
        }
        let decrease = fx - fnew;
        x = xn;
        g = gn;
        if decrease.abs() <= opts.ftol * (1.0 + fx.abs()) {
            stalls += 1;
            if stalls >= 2 {
                fx = fnew;
                break;
            }
        } else {
            stalls = 0;
        }
        fx = fnew;
    }
    Some(BoxMinimum {
        x,
        f: fx,
        iterations,
        evaluations,
    })
}

/// Derivative-free compass search minimizing `f` inside a box.
///
/// `steps` are the initial per-coordinate step lengths; the search halves all
/// steps after a sweep without improvement and stops once every step drops
/// below `min_step_fraction` of its initial value or `max_evals` is reached.
/// Returns `(x, f(x), evaluations used)`.
pub fn compass_search<F>(
    mut f: F,
    x0: &[f64],
    f0: f64,
    lower: &[f64],
    upper: &[f64],
    steps: &[f64],
    min_step_fraction: f64,
    max_evals: usize,
) -> (Vec<f64>, f64, usize)
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut fx = f0;
    let mut step = steps.to_vec();
    let mut evals = 0;
    let mut scale = 1.0;
    while evals < max_evals && scale >= min_step_fraction {
        let mut improved = false;
        'sweep: for k in 0..n {
            for sign in [1.0, -1.0] {
                if evals >= max_evals {
                    break 'sweep;
                }
                let mut trial = x.clone();
                trial[k] = (trial[k] + sign * step[k]).clamp(lower[k], upper[k]);
                if trial[k] == x[k] {
                    continue;
                }
                evals += 1;
                let ft = f(&trial);
                if ft < fx {
                    x = trial;
                    fx = ft;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            scale *= 0.5;
            for s in step.iter_mut() {
                *s *= 0.5;
            }
        }
    }
    (x, fx, evals)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

/// Standard BFGS update of an inverse-Hessian approximation.
pub(crate) fn bfgs_inverse_update(h: &mut [Vec<f64>], s: &[f64], y: &[f64], sy: f64) {
    let n = s.len();
    let rho = 1.0 / sy;
    let hy: Vec<f64> = (0..n).map(|i| dot(&h[i], y)).collect();
    let yhy = dot(y, &hy);
    for i in 0..n {
        for j in 0..n {
            h[i][j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
        }
    }
}
