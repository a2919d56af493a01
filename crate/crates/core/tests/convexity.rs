use blossom::controller::posterior_minimum;
use blossom::convexity::{pd_sphere_radius, pd_test_point, PdTestConfig};
use blossom::gp::FitOptions;
use blossom::{Domain, GpModel, Observation};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn fit_2d(f: impl Fn(f64, f64) -> f64, n: usize, seed: u64) -> GpModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..n)
        .map(|_| {
            let (a, b) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            Observation::new(vec![a, b], f(a, b))
        })
        .collect();
    GpModel::fit(
        data,
        Domain::symmetric_unit(2),
        seed,
        &FitOptions::default(),
    )
    .unwrap()
    .0
}

#[test]
fn bowl_passes_and_saddle_fails() {
    let cfg = PdTestConfig::default();
    assert_eq!(cfg.n_samples(), 98);
    for seed in 0..3 {
        let bowl = fit_2d(|a, b| a * a + b * b, 40, seed);
        assert!(
            pd_test_point(&bowl, &[0.0, 0.0], &cfg, seed),
            "bowl seed {seed}"
        );
        let saddle = fit_2d(|a, b| a * a - b * b, 40, seed);
        assert!(
            !pd_test_point(&saddle, &[0.0, 0.0], &cfg, seed),
            "saddle seed {seed}"
        );
    }
}

#[test]
fn bowl_radius_is_large() {
    let cfg = PdTestConfig::default();
    let model = fit_2d(|a, b| a * a + b * b, 60, 2);
    let region = pd_sphere_radius(&model, &[0.0, 0.0], 16, 1e-3, &cfg, 2).unwrap();
    assert!(region.radius >= 0.5, "radius {}", region.radius);
    assert!(region.radius <= 2f64.sqrt() + 1e-12);
    let again = pd_sphere_radius(&model, &[0.0, 0.0], 16, 1e-3, &cfg, 2).unwrap();
    assert_eq!(region, again);
}

#[test]
fn saddle_center_has_zero_radius() {
    let cfg = PdTestConfig::default();
    let model = fit_2d(|a, b| a * a - b * b, 40, 0);
    let region = pd_sphere_radius(&model, &[0.0, 0.0], 8, 1e-3, &cfg, 0).unwrap();
    assert_eq!(region.radius, 0.0);
    assert!(region.is_empty());
}

#[test]
fn sine_basin_is_bounded_by_inflections() {
    let cfg = PdTestConfig::default();
    let domain = Domain::new(vec![0.0], vec![1.0]).unwrap();
    let data = (0..13)
        .map(|i| {
            let x = i as f64 / 12.0;
            Observation::new(vec![x], (2.0 * std::f64::consts::PI * x).sin())
        })
        .collect();
    let (model, _) = GpModel::fit(data, domain.clone(), 0, &FitOptions::default()).unwrap();
    let center = posterior_minimum(&model, 500, 0);
    assert!((center[0] - 0.75).abs() < 0.02, "center {center:?}");
    for seed in 0..3 {
        let region = pd_sphere_radius(&model, &center, 20, 1e-3, &cfg, seed).unwrap();
        // normalized radius to x units on [0, 1]
        let r = region.radius * domain.half_width(0);
        assert!(r > 0.0 && r <= 0.3, "seed {seed}: radius {r}");
    }
}
