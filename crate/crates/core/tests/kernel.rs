mod common;

use blossom::{kernel_derivative, KernelFamily, KernelSpec};
use common::{kernel_fd_error, multi_indices};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_pair(rng: &mut ChaCha8Rng, d: usize, ell: f64) -> (Vec<f64>, Vec<f64>) {
    loop {
        let a: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let dist = a
            .iter()
            .zip(&b)
            .map(|(p, q)| (p - q) * (p - q))
            .sum::<f64>()
            .sqrt();
        if dist > 0.3 * ell {
            return (a, b);
        }
    }
}

#[test]
fn derivatives_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for family in [KernelFamily::Matern52, KernelFamily::SquaredExponential] {
        for d in 1..=3 {
            let ells: Vec<f64> = (0..d).map(|k| 0.4 + 0.3 * k as f64).collect();
            let spec = KernelSpec::new(family, 1.3, ells.clone()).unwrap();
            let min_ell = ells.iter().cloned().fold(f64::INFINITY, f64::min);
            let mis = multi_indices(d, 2);
            for _ in 0..10 {
                let (a, b) = random_pair(&mut rng, d, min_ell);
                for ia in &mis {
                    for ib in &mis {
                        let (exact, fd, err) =
                            kernel_fd_error(&spec, &a, &b, ia, ib, 2e-2 * min_ell);
                        let scale = exact.abs().max(1e-3 * spec.variance());
                        assert!(
                            err / scale <= 1e-4,
                            "{family:?} d={d} ia={ia:?} ib={ib:?}: {exact} vs {fd}"
                        );
                    }
                }
            }
        }
    }
}

#[test]
fn matern_second_by_second_example() {
    let spec = KernelSpec::new(KernelFamily::Matern52, 1.0, vec![1.0]).unwrap();
    let (exact, fd, err) = kernel_fd_error(&spec, &[0.0], &[0.5], &[2], &[2], 2e-2);
    assert!(err / exact.abs() <= 1e-4, "{exact} vs {fd}");
}

#[test]
fn swapping_arguments_is_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let spec = KernelSpec::new(KernelFamily::Matern52, 0.7, vec![0.3, 0.9]).unwrap();
    let mis = multi_indices(2, 2);
    for _ in 0..20 {
        let (a, b) = random_pair(&mut rng, 2, 0.3);
        for ia in &mis {
            for ib in &mis {
                let p = kernel_derivative(&spec, &a, &b, ia, ib).unwrap();
                let q = kernel_derivative(&spec, &b, &a, ib, ia).unwrap();
                assert_eq!(p, q);
            }
        }
    }
}

#[test]
fn zero_lag_values() {
    for family in [KernelFamily::Matern52, KernelFamily::SquaredExponential] {
        let spec = KernelSpec::new(family, 2.0, vec![0.5, 0.5]).unwrap();
        let a = [0.1, -0.2];
        assert!((kernel_derivative(&spec, &a, &a, &[0, 0], &[0, 0]).unwrap() - 4.0).abs() < 1e-14);
        assert_eq!(
            kernel_derivative(&spec, &a, &a, &[1, 0], &[0, 0]).unwrap(),
            0.0
        );
        // the (2,2) derivative is finite at zero lag
        let v = kernel_derivative(&spec, &a, &a, &[2, 0], &[2, 0]).unwrap();
        assert!(v.is_finite() && v > 0.0);
        let near = [a[0] + 1e-9, a[1]];
        let w = kernel_derivative(&spec, &a, &near, &[2, 0], &[2, 0]).unwrap();
        assert!((v - w).abs() / v < 1e-6, "{v} vs {w}");
    }
}
