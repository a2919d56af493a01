//! Benchmark objectives, the log transform, and synthetic objectives drawn from a GP prior.

use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::domain::{Domain, Observation};
use crate::error::{Error, Result};
use crate::kernel::{KernelFamily, KernelSpec};
use crate::optim::{compass_search, minimize_box, BoxMinimizeOptions};
use crate::rng;

pub type ObjectiveFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Supported benchmark names.
pub const BENCHMARKS: [&str; 6] = [
    "branin",
    "camel3",
    "camel6",
    "hartmann3",
    "hartmann4",
    "hartmann6",
];

#[derive(Clone)]
pub struct Benchmark {
    pub name: String,
    pub dimension: usize,
    pub domain: Domain,
    pub evaluate: ObjectiveFn,
    pub known_minimum: Option<f64>,
    pub known_minimizers: Option<Vec<Vec<f64>>>,
}

impl std::fmt::Debug for Benchmark {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Benchmark")
            .field("name", &self.name)
            .field("dimension", &self.dimension)
            .field("domain", &self.domain)
            .field("known_minimum", &self.known_minimum)
            .field("known_minimizers", &self.known_minimizers)
            .finish()
    }
}

impl Benchmark {
    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.evaluate)(x)
    }
}

pub fn branin(x: &[f64]) -> f64 {
    let b = 5.1 / (4.0 * PI * PI);
    let c = 5.0 / PI;
    let t = 1.0 / (8.0 * PI);
    let q = x[1] - b * x[0] * x[0] + c * x[0] - 6.0;
    q * q + 10.0 * (1.0 - t) * x[0].cos() + 10.0
}

pub fn camel3(x: &[f64]) -> f64 {
    let (a, b) = (x[0], x[1]);
    2.0 * a * a - 1.05 * a.powi(4) + a.powi(6) / 6.0 + a * b + b * b
}

pub fn camel6(x: &[f64]) -> f64 {
    let (a, b) = (x[0], x[1]);
    (4.0 - 2.1 * a * a + a.powi(4) / 3.0) * a * a + a * b + (-4.0 + 4.0 * b * b) * b * b
}

const HARTMANN_ALPHA: [f64; 4] = [1.0, 1.2, 3.0, 3.2];
const HARTMANN3_A: [[f64; 3]; 4] = [
    [3.0, 10.0, 30.0],
    [0.1, 10.0, 35.0],
    [3.0, 10.0, 30.0],
    [0.1, 10.0, 35.0],
];
const HARTMANN3_P: [[f64; 3]; 4] = [
    [0.3689, 0.1170, 0.2673],
    [0.4699, 0.4387, 0.7470],
    [0.1091, 0.8732, 0.5547],
    [0.0381, 0.5743, 0.8828],
];
const HARTMANN6_A: [[f64; 6]; 4] = [
    [10.0, 3.0, 17.0, 3.5, 1.7, 8.0],
    [0.05, 10.0, 17.0, 0.1, 8.0, 14.0],
    [3.0, 3.5, 1.7, 10.0, 17.0, 8.0],
    [17.0, 8.0, 0.05, 10.0, 0.1, 14.0],
];
const HARTMANN6_P: [[f64; 6]; 4] = [
    [0.1312, 0.1696, 0.5569, 0.0124, 0.8283, 0.5886],
    [0.2329, 0.4135, 0.8307, 0.3736, 0.1004, 0.9991],
    [0.2348, 0.1451, 0.3522, 0.2883, 0.3047, 0.6650],
    [0.4047, 0.8828, 0.8732, 0.5743, 0.1091, 0.0381],
];

fn hartmann<const D: usize>(x: &[f64], a: &[[f64; D]; 4], p: &[[f64; D]; 4], dims: usize) -> f64 {
    -(0..4)
        .map(|i| {
            let inner: f64 = (0..dims).map(|j| a[i][j] * (x[j] - p[i][j]).powi(2)).sum();
            HARTMANN_ALPHA[i] * (-inner).exp()
        })
        .sum::<f64>()
}

pub fn hartmann3(x: &[f64]) -> f64 {
    hartmann(x, &HARTMANN3_A, &HARTMANN3_P, 3)
}

/// The first four input dimensions of the six-dimensional Hartmann function.
pub fn hartmann4(x: &[f64]) -> f64 {
    hartmann(x, &HARTMANN6_A, &HARTMANN6_P, 4)
}

pub fn hartmann6(x: &[f64]) -> f64 {
    hartmann(x, &HARTMANN6_A, &HARTMANN6_P, 6)
}

fn canonical(name: &str) -> String {
    name.to_ascii_lowercase()
        .chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .collect::<String>()
        .replace("hump", "")
}

fn definition(name: &str) -> Option<(&'static str, fn(&[f64]) -> f64, Vec<f64>, Vec<f64>)> {
    Some(match canonical(name).as_str() {
        "branin" => (
            "branin",
            branin as fn(&[f64]) -> f64,
            vec![-5.0, 0.0],
            vec![10.0, 15.0],
        ),
        "camel3" => ("camel3", camel3, vec![-5.0, -5.0], vec![5.0, 5.0]),
        "camel6" => ("camel6", camel6, vec![-3.0, -2.0], vec![3.0, 2.0]),
        "hartmann3" | "hartmann3d" => ("hartmann3", hartmann3, vec![0.0; 3], vec![1.0; 3]),
        "hartmann4" | "hartmann4d" => ("hartmann4", hartmann4, vec![0.0; 4], vec![1.0; 4]),
        "hartmann6" | "hartmann6d" => ("hartmann6", hartmann6, vec![0.0; 6], vec![1.0; 6]),
        _ => return None,
    })
}

/// Global minimum and its (distinct) minimizers, found by a quasi-random scan
/// followed by gradient and compass refinement of the best scan points.
pub fn multistart_minimum(
    f: &dyn Fn(&[f64]) -> f64,
    domain: &Domain,
    scan: usize,
    starts: usize,
) -> (f64, Vec<Vec<f64>>) {
    let d = domain.dim();
    let mut points: Vec<(f64, Vec<f64>)> = rng::halton(d, scan, 0)
        .into_iter()
        .map(|u| {
            let x: Vec<f64> = (0..d)
                .map(|k| domain.lower()[k] + u[k] * domain.width(k))
                .collect();
            (f(&x), x)
        })
        .collect();
    points.sort_by(|a, b| a.0.total_cmp(&b.0));
    let fd = |x: &[f64]| -> Option<(f64, Vec<f64>)> {
        let fx = f(x);
        let g = (0..d)
            .map(|k| {
                let h = 1e-7 * domain.width(k);
                let mut xp = x.to_vec();
                let mut xm = x.to_vec();
                xp[k] = (xp[k] + h).min(domain.upper()[k]);
                xm[k] = (xm[k] - h).max(domain.lower()[k]);
                (f(&xp) - f(&xm)) / (xp[k] - xm[k])
            })
            .collect();
        Some((fx, g))
    };
    let opts = BoxMinimizeOptions {
        max_iter: 500,
        gtol: 1e-10,
        ftol: 1e-15,
    };
    let steps: Vec<f64> = (0..d).map(|k| 1e-3 * domain.width(k)).collect();
    let mut found: Vec<(f64, Vec<f64>)> = Vec::new();
    for (_, x0) in points.iter().take(starts) {
        let r = minimize_box(fd, x0, domain.lower(), domain.upper(), opts)
            .expect("objective is finite");
        let (x, fx, _) = compass_search(
            f,
            &r.x,
            f(&r.x),
            domain.lower(),
            domain.upper(),
            &steps,
            1e-9,
            20_000,
        );
        found.push((fx, x));
    }
    found.sort_by(|a, b| a.0.total_cmp(&b.0));
    let best = found[0].0.min(points[0].0);
    let mut minimizers: Vec<Vec<f64>> = Vec::new();
    for (v, x) in &found {
        if *v <= best + 1e-7 * (1.0 + best.abs())
            && minimizers
                .iter()
                .all(|m| domain.normalized_distance(m, x) > 1e-3)
        {
            minimizers.push(x.clone());
        }
    }
    (best, minimizers)
}

fn cached_minimum(
    name: &'static str,
    f: fn(&[f64]) -> f64,
    domain: &Domain,
) -> (f64, Vec<Vec<f64>>) {
    static CACHE: [OnceLock<(f64, Vec<Vec<f64>>)>; 6] = [
        OnceLock::new(),
        OnceLock::new(),
        OnceLock::new(),
        OnceLock::new(),
        OnceLock::new(),
        OnceLock::new(),
    ];
    let idx = BENCHMARKS
        .iter()
        .position(|n| *n == name)
        .expect("registered benchmark");
    CACHE[idx]
        .get_or_init(|| {
            let d = domain.dim();
            multistart_minimum(&f, domain, 4000 * d, 40 * d)
        })
        .clone()
}

/// Standard form of a named benchmark on its standard domain.
pub fn make_benchmark(name: &str) -> Result<Benchmark> {
    let (canon, f, lower, upper) = definition(name).ok_or_else(|| Error::UnknownObjective {
        name: name.to_string(),
        supported: BENCHMARKS.join(", "),
    })?;
    let domain = Domain::new(lower, upper)?;
    let (min, minimizers) = cached_minimum(canon, f, &domain);
    Ok(Benchmark {
        name: canon.to_string(),
        dimension: domain.dim(),
        domain,
        evaluate: Arc::new(f),
        known_minimum: Some(min),
        known_minimizers: Some(minimizers),
    })
}

/// `y' = ln(y − y* + 1)`: minimizers unchanged, minimum zero.
pub fn log_transform(b: &Benchmark) -> Result<Benchmark> {
    let y_star = b
        .known_minimum
        .ok_or_else(|| Error::MissingKnownMinimum(b.name.clone()))?;
    let inner = b.evaluate.clone();
    Ok(Benchmark {
        name: format!("{}-log", b.name),
        dimension: b.dimension,
        domain: b.domain.clone(),
        evaluate: Arc::new(move |x: &[f64]| (inner(x) - y_star + 1.0).ln()),
        known_minimum: Some(0.0),
        known_minimizers: b.known_minimizers.clone(),
    })
}

/// Number of random features in a GP-draw objective.
pub const GP_DRAW_FEATURES: usize = 4096;

/// A sample path of a stationary GP, represented with random Fourier features
/// so that any point can be evaluated exactly and reproducibly.
#[derive(Debug, Clone)]
pub struct GpDrawObjective {
    pub kernel: KernelSpec,
    pub domain: Domain,
    pub seed: u64,
    /// Every point evaluated through [`GpDrawObjective::evaluate`], with its value.
    pub interpolation_grid: Vec<Observation>,
    frequencies: Vec<Vec<f64>>,
    phases: Vec<f64>,
    weights: Vec<f64>,
}

pub fn draw_gp_objective(kernel: KernelSpec, domain: Domain, seed: u64) -> Result<GpDrawObjective> {
    kernel.validate()?;
    if kernel.dim() != domain.dim() {
        return Err(Error::InvalidArgument(
            "kernel and domain dimensions differ".into(),
        ));
    }
    let d = domain.dim();
    let mut rng = rng::rng_for(seed, &[0x6770_6472_6177]);
    let chi = ChiSquared::<f64>::new(5.0).expect("valid degrees of freedom");
    let mut frequencies = Vec::with_capacity(GP_DRAW_FEATURES);
    let mut phases = Vec::with_capacity(GP_DRAW_FEATURES);
    let mut weights = Vec::with_capacity(GP_DRAW_FEATURES);
    for _ in 0..GP_DRAW_FEATURES {
        // Matérn 5/2 spectral density: multivariate t with 5 degrees of freedom
        let scale = match kernel.family {
            KernelFamily::Matern52 => (5.0f64 / chi.sample(&mut rng)).sqrt(),
            KernelFamily::SquaredExponential => 1.0,
        };
        frequencies.push(
            (0..d)
                .map(|k| rng.sample::<f64, _>(StandardNormal) * scale / kernel.lengthscales[k])
                .collect(),
        );
        phases.push(2.0 * PI * rng.random::<f64>());
        weights.push(rng.sample::<f64, _>(StandardNormal));
    }
    Ok(GpDrawObjective {
        kernel,
        domain,
        seed,
        interpolation_grid: Vec::new(),
        frequencies,
        phases,
        weights,
    })
}

impl GpDrawObjective {
    fn amplitude(&self) -> f64 {
        self.kernel.output_scale * (2.0 / GP_DRAW_FEATURES as f64).sqrt()
    }

    /// Path value at `x` without recording it.
    pub fn value(&self, x: &[f64]) -> f64 {
        let s: f64 = self
            .frequencies
            .iter()
            .zip(&self.phases)
            .zip(&self.weights)
            .map(|((w, b), a)| a * (w.iter().zip(x).map(|(p, q)| p * q).sum::<f64>() + b).cos())
            .sum();
        self.amplitude() * s
    }

    pub fn value_and_gradient(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let mut v = 0.0;
        let mut g = vec![0.0; x.len()];
        for ((w, b), a) in self.frequencies.iter().zip(&self.phases).zip(&self.weights) {
            let arg = w.iter().zip(x).map(|(p, q)| p * q).sum::<f64>() + b;
            v += a * arg.cos();
            let s = -a * arg.sin();
            for (gk, wk) in g.iter_mut().zip(w) {
                *gk += s * wk;
            }
        }
        let amp = self.amplitude();
        (amp * v, g.into_iter().map(|v| amp * v).collect())
    }

    /// Evaluates and records the point.
    pub fn evaluate(&mut self, x: &[f64]) -> f64 {
        let y = self.value(x);
        self.interpolation_grid
            .push(Observation::new(x.to_vec(), y));
        y
    }

    /// Minimum of the path by a quasi-random scan plus gradient polish.
    pub fn oracle_minimum(&self) -> (Vec<f64>, f64) {
        let d = self.domain.dim();
        let mut scan: Vec<(f64, Vec<f64>)> = rng::halton(d, 5000 * d, 0)
            .into_iter()
            .map(|u| {
                let x: Vec<f64> = (0..d)
                    .map(|k| self.domain.lower()[k] + u[k] * self.domain.width(k))
                    .collect();
                (self.value(&x), x)
            })
            .collect();
        scan.sort_by(|a, b| a.0.total_cmp(&b.0));
        let opts = BoxMinimizeOptions {
            max_iter: 300,
            gtol: 1e-12,
            ftol: 1e-16,
        };
        let mut best = (scan[0].1.clone(), scan[0].0);
        for (_, x0) in scan.iter().take(10) {
            if let Some(r) = minimize_box(
                |x| Some(self.value_and_gradient(x)),
                x0,
                self.domain.lower(),
                self.domain.upper(),
                opts,
            ) {
                if r.f < best.1 {
                    best = (r.x, r.f);
                }
            }
        }
        best
    }
}
