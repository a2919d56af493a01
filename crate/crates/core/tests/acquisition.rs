use blossom::acquisition::{
    expected_improvement, global_regret_reduction, maximize_acquisition, pes_discrete,
    probability_of_improvement, AcquisitionContext, MaximizerConfig, PesCache,
};
use blossom::convexity::ConvexRegion;
use blossom::stats::{entropy_of_counts, gauss_hermite_normal, norm_pdf};
use blossom::{Domain, GpModel, KernelFamily, KernelSpec, Observation};

fn model_1d(points: &[(f64, f64)], ell: f64) -> GpModel {
    let data = points
        .iter()
        .map(|&(x, y)| Observation::new(vec![x], y))
        .collect();
    let k = KernelSpec::new(KernelFamily::Matern52, 1.0, vec![ell]).unwrap();
    GpModel::new(k, Domain::symmetric_unit(1), data).unwrap()
}

/// `E[max(t − Y, 0)]` for `Y ~ N(μ, σ²)` by midpoint quadrature.
fn improvement_quadrature(t: f64, mu: f64, sd: f64) -> f64 {
    let n = 100_000;
    let h = 16.0 * sd / n as f64;
    (0..n)
        .map(|i| {
            let y = mu - 8.0 * sd + (i as f64 + 0.5) * h;
            (t - y).max(0.0) * norm_pdf((y - mu) / sd) / sd * h
        })
        .sum()
}

#[test]
fn ei_pi_and_grr_match_quadrature() {
    let m = model_1d(&[(-0.7, 0.4), (-0.1, -0.3), (0.5, 0.2), (0.9, 0.8)], 0.4);
    let ctx = AcquisitionContext::new(&m);
    assert_eq!(ctx.incumbent_best, -0.3);
    let inner = -0.45;
    let grr_ctx = AcquisitionContext {
        expected_inner_min: Some(inner),
        ..ctx
    };
    for x in [-0.95, -0.4, 0.2, 0.7] {
        let (mu, var) = m.predict(&[x]);
        let sd = var.sqrt();
        let ei = expected_improvement(&ctx, &[x]);
        assert!(
            (ei - improvement_quadrature(-0.3, mu, sd)).abs() < 1e-7,
            "EI at {x}"
        );
        let grr = global_regret_reduction(&grr_ctx, &[x]).unwrap();
        assert!(
            (grr - improvement_quadrature(inner, mu, sd)).abs() < 1e-7,
            "GRR at {x}"
        );
        // PI as the improvement probability mass
        let n = 100_000;
        let h = 16.0 * sd / n as f64;
        let mass: f64 = (0..n)
            .map(|i| mu - 8.0 * sd + (i as f64 + 0.5) * h)
            .filter(|&y| y < -0.3)
            .map(|y| norm_pdf((y - mu) / sd) / sd * h)
            .sum();
        assert!(
            (probability_of_improvement(&ctx, &[x]) - mass).abs() < 1e-4,
            "PI at {x}"
        );
    }
    // at an observation the posterior is (numerically) certain
    assert!(expected_improvement(&ctx, &[-0.1]) < 1e-6);
}

/// Entropy of the argmin distribution over the support estimated from `n` draws.
fn argmin_entropy(model: &GpModel, support: &[Vec<f64>], n: usize, seed: u64) -> f64 {
    let draws = model.draw_posterior(support, n, seed).unwrap();
    let mut counts = vec![0u32; support.len()];
    for r in 0..n {
        let row = draws.row(r);
        let (arg, _) =
            row.iter().enumerate().fold(
                (0, f64::INFINITY),
                |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc },
            );
        counts[arg] += 1;
    }
    entropy_of_counts(&counts)
}

#[test]
fn pes_matches_refit_fantasies() {
    let m = model_1d(&[(-0.6, 0.1), (0.0, 0.6), (0.55, 0.0)], 0.3);
    let support: Vec<Vec<f64>> = (0..15).map(|i| vec![-0.98 + 0.14 * i as f64]).collect();
    let cache = PesCache::new(&m, support.clone(), 2000, 7, 5).unwrap();
    let ctx = AcquisitionContext::new(&m);
    let (nodes, weights) = gauss_hermite_normal(7);
    let n = 20_000;
    let h0 = argmin_entropy(&m, &support, n, 1);
    for x in [-0.85, 0.3, 0.8] {
        let (mu, var) = m.predict(&[x]);
        let mut expected = 0.0;
        for (j, (z, w)) in nodes.iter().zip(&weights).enumerate() {
            let mut data = m.data().to_vec();
            data.push(Observation::new(vec![x], mu + var.sqrt() * z));
            let mj = GpModel::with_prior_mean(
                m.kernel().clone(),
                m.domain().clone(),
                data,
                m.prior_mean(),
            )
            .unwrap();
            expected += w * argmin_entropy(&mj, &support, n, 10 + j as u64);
        }
        let brute = h0 - expected;
        let fast = pes_discrete(&ctx, &cache, &[x]);
        assert!(
            brute > 0.05,
            "x = {x}: refit value {brute} too small to compare"
        );
        assert!(
            (fast - brute).abs() < 0.06,
            "x = {x}: cache {fast} vs refit {brute}"
        );
    }
}

#[test]
fn pes_is_bounded_by_prior_entropy() {
    let m = model_1d(&[(-0.5, 0.3), (0.4, -0.2)], 0.3);
    let support: Vec<Vec<f64>> = (0..25).map(|i| vec![-0.96 + 0.08 * i as f64]).collect();
    let cache = PesCache::new(&m, support, 200, 7, 9).unwrap();
    let ctx = AcquisitionContext::new(&m);
    assert!(cache.prior_entropy() <= (25f64).ln() + 1e-12);
    for i in 0..41 {
        let x = -1.0 + 0.05 * i as f64;
        let v = pes_discrete(&ctx, &cache, &[x]);
        assert!(
            v.is_finite() && v >= -1e-12 && v <= cache.prior_entropy() + 1e-12,
            "{x}: {v}"
        );
    }
    let again = PesCache::new(&m, cache.support().to_vec(), 200, 7, 9).unwrap();
    assert_eq!(
        pes_discrete(&ctx, &again, &[0.1]),
        pes_discrete(&ctx, &cache, &[0.1])
    );
}

#[test]
fn maximizer_never_proposes_inside_exclusion() {
    let domain = Domain::new(vec![0.0, -2.0, 1.0], vec![1.0, 2.0, 3.0]).unwrap();
    let k = KernelSpec::new(KernelFamily::Matern52, 1.0, vec![0.3, 1.0, 0.5]).unwrap();
    let model = GpModel::new(k, domain.clone(), vec![]).unwrap();
    let center = vec![0.4, 0.5, 2.2];
    let region = ConvexRegion {
        center: center.clone(),
        radius: 0.35,
        directions_tested: 20,
        resolution: 1e-3,
    };
    // the unconstrained peak is the region's center
    let f = |x: &[f64]| -domain.normalized_distance(x, &center);
    let cfg = MaximizerConfig::for_dim(3);
    let free = maximize_acquisition(f, &model, None, cfg, 4).unwrap();
    assert!(domain.normalized_distance(&free.x, &center) < 0.05);
    for seed in 0..5 {
        let p = maximize_acquisition(f, &model, Some(&region), cfg, seed).unwrap();
        assert!(!region.contains(&domain, &p.x), "seed {seed}: {:?}", p.x);
        assert!(domain.contains(&p.x));
        let dist = domain.normalized_distance(&p.x, &center);
        assert!((0.35..=0.4).contains(&dist), "seed {seed}: distance {dist}");
        assert_eq!(
            p,
            maximize_acquisition(f, &model, Some(&region), cfg, seed).unwrap()
        );
    }
}

#[test]
fn ties_prefer_lower_posterior_mean() {
    let m = model_1d(&[(-0.8, 2.0), (0.8, -2.0)], 0.3);
    let flat = |_: &[f64]| 1.0;
    let p = maximize_acquisition(flat, &m, None, MaximizerConfig::for_dim(1), 0).unwrap();
    let mean = m.predict_mean(&p.x);
    for i in 0..21 {
        let x = -1.0 + 0.1 * i as f64;
        assert!(
            mean <= m.predict_mean(&[x]) + 0.3,
            "{:?} has mean {mean}",
            p.x
        );
    }
}
