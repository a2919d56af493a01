//! Oracles and trace checks shared by the integration tests.
#![allow(dead_code)]

use blossom::controller::{IterationView, Phase, StepRecord};
use blossom::convexity::ConvexRegion;
use blossom::{kernel_derivative, Domain, KernelSpec};

/// `∂^{ia}_a ∂^{ib}_b k(a, b)` by nested central differences of the kernel
/// value, with step `h` per differentiated coordinate.
pub fn kernel_derivative_fd(
    spec: &KernelSpec,
    a: &[f64],
    b: &[f64],
    ia: &[u32],
    ib: &[u32],
    h: f64,
) -> f64 {
    // expand each multi-index into the list of coordinates to difference
    let mut steps: Vec<(bool, usize)> = Vec::new();
    for (k, &m) in ia.iter().enumerate() {
        steps.extend(std::iter::repeat_n((true, k), m as usize));
    }
    for (k, &m) in ib.iter().enumerate() {
        steps.extend(std::iter::repeat_n((false, k), m as usize));
    }
    fn rec(
        spec: &KernelSpec,
        a: &mut Vec<f64>,
        b: &mut Vec<f64>,
        steps: &[(bool, usize)],
        h: f64,
    ) -> f64 {
        match steps.split_first() {
            None => spec.value(a, b),
            Some((&(on_a, k), rest)) => {
                let v = if on_a { &mut *a } else { &mut *b };
                let orig = v[k];
                v[k] = orig + h;
                let plus = rec(spec, a, b, rest, h);
                let v = if on_a { &mut *a } else { &mut *b };
                v[k] = orig - h;
                let minus = rec(spec, a, b, rest, h);
                let v = if on_a { &mut *a } else { &mut *b };
                v[k] = orig;
                (plus - minus) / (2.0 * h)
            }
        }
    }
    rec(spec, &mut a.to_vec(), &mut b.to_vec(), &steps, h)
}

/// Every multi-index of total order at most `max_order` in `d` dimensions.
pub fn multi_indices(d: usize, max_order: u32) -> Vec<Vec<u32>> {
    let mut out = vec![vec![0; d]];
    for k in 0..d {
        out.push((0..d).map(|j| u32::from(j == k)).collect());
    }
    if max_order >= 2 {
        for i in 0..d {
            for j in i..d {
                let mut mi = vec![0; d];
                mi[i] += 1;
                mi[j] += 1;
                out.push(mi);
            }
        }
    }
    out
}

/// Absolute error of the analytic derivative against central differences.
/// Nested differences lose about `eps / h^order` to round-off, so `h` should
/// be moderate (around 1e-2 lengthscales); one Richardson step removes the
/// leading `h^2` truncation term.
pub fn kernel_fd_error(
    spec: &KernelSpec,
    a: &[f64],
    b: &[f64],
    ia: &[u32],
    ib: &[u32],
    h: f64,
) -> (f64, f64, f64) {
    let exact = kernel_derivative(spec, a, b, ia, ib).unwrap();
    let coarse = kernel_derivative_fd(spec, a, b, ia, ib, h);
    let fine = kernel_derivative_fd(spec, a, b, ia, ib, h / 2.0);
    let fd = (4.0 * fine - coarse) / 3.0;
    (exact, fd, (exact - fd).abs())
}

/// Region and evaluated point of each global-regret-reduction proposal,
/// keyed by trace index. Collected through the controller's stop hook.
#[derive(Default)]
pub struct RegionLog {
    pub entries: Vec<(usize, ConvexRegion)>,
}

impl RegionLog {
    pub fn record(&mut self, view: &IterationView) {
        if view.phase == Phase::GlobalRegretReduction {
            if let Some(r) = view.region {
                self.entries.push((view.iteration, r.clone()));
            }
        }
    }
}

/// Checks a finished trace against the controller's invariants; returns the
/// first violation found.
pub fn check_trace(
    trace: &[StepRecord],
    domain: &Domain,
    target: f64,
    regions: &RegionLog,
) -> Result<(), String> {
    for w in trace.windows(2) {
        if !w[0].phase.may_precede(w[1].phase) {
            return Err(format!(
                "illegal transition {:?} -> {:?} at {}",
                w[0].phase, w[1].phase, w[1].iteration
            ));
        }
    }
    if let Some(first) = trace.iter().position(|s| s.phase == Phase::LocalExploit) {
        if trace[first..]
            .iter()
            .any(|s| s.phase != Phase::LocalExploit)
        {
            return Err("local phase is not a suffix".into());
        }
        match trace[first].regret_estimate {
            Some(r) if r <= target => {}
            other => {
                return Err(format!(
                    "local phase entered with regret estimate {other:?} (target {target})"
                ))
            }
        }
    }
    for (i, s) in trace.iter().enumerate() {
        if s.iteration != i {
            return Err(format!(
                "iteration {} recorded at position {i}",
                s.iteration
            ));
        }
        let best = trace[..=i]
            .iter()
            .map(|t| t.y)
            .fold(f64::INFINITY, f64::min);
        if s.incumbent_y != best {
            return Err(format!(
                "incumbent {} differs from running minimum {best} at {i}",
                s.incumbent_y
            ));
        }
        if i > 0 && s.incumbent_y > trace[i - 1].incumbent_y {
            return Err(format!("incumbent increased at {i}"));
        }
        if !domain.contains(&s.x) {
            return Err(format!("point {:?} outside the domain at {i}", s.x));
        }
    }
    let grr = trace
        .iter()
        .filter(|s| s.phase == Phase::GlobalRegretReduction)
        .count();
    if grr != regions.entries.len() {
        return Err(format!(
            "{grr} GRR steps but {} logged regions",
            regions.entries.len()
        ));
    }
    for (i, region) in &regions.entries {
        let s = trace
            .get(*i)
            .ok_or_else(|| format!("logged GRR step {i} missing from trace"))?;
        if s.phase != Phase::GlobalRegretReduction {
            return Err(format!("logged GRR step {i} has phase {:?}", s.phase));
        }
        if region.contains(domain, &s.x) {
            return Err(format!("GRR point {:?} lies inside the region at {i}", s.x));
        }
    }
    Ok(())
}

/// Traces equal in everything but timing.
pub fn same_trace(a: &[StepRecord], b: &[StepRecord]) -> bool {
    a.len() == b.len()
        && a.iter().zip(b).all(|(p, q)| {
            let mut q = q.clone();
            q.wall_time_s = p.wall_time_s;
            *p == q
        })
}

/// Mean and standard error of a sample.
pub fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

/// Regret estimates from the normal-fit summation and from a brute-force
/// double Monte-Carlo over independent inner and outer minima, each with its
/// standard error: `((eq, eq_se), (brute, brute_se))`.
pub fn regret_oracle_pair(
    model: &blossom::GpModel,
    region: &ConvexRegion,
    n_draws: usize,
    seed: u64,
) -> ((f64, f64), (f64, f64)) {
    use blossom::regret::{build_support, inner_stats, regret_from_samples};
    let support = build_support(model, region, 100, seed).unwrap();
    assert!(support.n_inner() > 0 && support.n_outer() > 0);
    let minima = |draws: &nalgebra::DMatrix<f64>| -> (Vec<f64>, Vec<f64>) {
        let mut inner = Vec::new();
        let mut outer = Vec::new();
        for r in 0..draws.nrows() {
            let (mut yi, mut yo) = (f64::INFINITY, f64::INFINITY);
            for (c, &is_inner) in support.inner_mask.iter().enumerate() {
                let v = draws[(r, c)];
                if is_inner {
                    yi = yi.min(v);
                } else {
                    yo = yo.min(v);
                }
            }
            inner.push(yi);
            outer.push(yo);
        }
        (inner, outer)
    };

    let draws = model
        .draw_posterior(&support.points, n_draws, seed ^ 0x5151)
        .unwrap();
    let (mu, sigma) = inner_stats(&support, &draws).unwrap();
    let (_, outer) = minima(&draws);
    let summands: Vec<f64> = outer
        .iter()
        .map(|&yo| regret_from_samples(mu, sigma, &[yo]))
        .collect();
    let eq = mean_se(&summands);

    // independent draw sets for the inner and the outer minimum
    let (inner_b, _) = minima(
        &model
            .draw_posterior(&support.points, n_draws, seed ^ 0xa1a1)
            .unwrap(),
    );
    let (_, outer_b) = minima(
        &model
            .draw_posterior(&support.points, n_draws, seed ^ 0xb2b2)
            .unwrap(),
    );
    let n = n_draws as f64;
    let g: Vec<f64> = inner_b
        .iter()
        .map(|&yi| outer_b.iter().map(|&yo| (yi - yo).max(0.0)).sum::<f64>() / n)
        .collect();
    let h: Vec<f64> = outer_b
        .iter()
        .map(|&yo| inner_b.iter().map(|&yi| (yi - yo).max(0.0)).sum::<f64>() / n)
        .collect();
    let (brute, se_g) = mean_se(&g);
    let (_, se_h) = mean_se(&h);
    ((eq.0, eq.1), (brute, (se_g * se_g + se_h * se_h).sqrt()))
}

/// Fixed 1D model with five observations and two basins of similar depth.
pub fn two_basin_model() -> blossom::GpModel {
    use blossom::{GpModel, KernelFamily, Observation};
    let domain = Domain::new(vec![0.0], vec![1.0]).unwrap();
    let data = [(0.1, 0.05), (0.3, 0.8), (0.5, 0.4), (0.7, -0.1), (0.9, 0.6)]
        .iter()
        .map(|&(x, y)| Observation::new(vec![x], y))
        .collect();
    let kernel = KernelSpec::new(KernelFamily::Matern52, 0.5, vec![0.15]).unwrap();
    GpModel::new(kernel, domain, data).unwrap()
}
