use std::cell::Cell;

use blossom::gp::fit::FitOptions;
use blossom::local::{bfgs_minimize, build_rescaling, RescaledProblem};
use blossom::{Domain, GpModel, Observation};
use nalgebra::{DMatrix, DVector};

#[test]
fn exact_hessian_rescaling_needs_few_line_searches() {
    let domain = Domain::new(vec![-3.0, -3.0], vec![3.0, 3.0]).unwrap();
    let h = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 1.0]));
    let origin = vec![0.5, -0.5];
    let problem = RescaledProblem::from_hessian(h, origin.clone(), vec![0, 1]);
    let mut f = |x: &[f64]| 2.0 * (x[0] - 1.0).powi(2) + 0.5 * (x[1] + 2.0).powi(2);
    let r = bfgs_minimize(&mut f, &problem, &domain, &origin, 1e-6, 1000);
    assert!(r.converged, "{r:?}");
    assert!(r.line_searches <= 3, "{} line searches", r.line_searches);
    assert!(r.grad_norm < 1e-6);
    assert!(
        (r.x_final[0] - 1.0).abs() < 1e-5 && (r.x_final[1] + 2.0).abs() < 1e-5,
        "{:?}",
        r.x_final
    );
}

#[test]
fn rosenbrock_from_the_classic_start() {
    let domain = Domain::new(vec![-2.0, -2.0], vec![2.0, 2.0]).unwrap();
    let x0 = [-1.2, 1.0];
    let problem = RescaledProblem::identity(x0.to_vec(), vec![0, 1]);
    let mut f = |x: &[f64]| 100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2);
    let r = bfgs_minimize(&mut f, &problem, &domain, &x0, 1e-6, 2000);
    assert!(r.n_evals <= 2000);
    let err = ((r.x_final[0] - 1.0).powi(2) + (r.x_final[1] - 1.0).powi(2)).sqrt();
    assert!(
        err < 1e-4,
        "ended at {:?} after {} evaluations",
        r.x_final,
        r.n_evals
    );
}

#[test]
fn evaluation_accounting_matches_calls() {
    let domain = Domain::symmetric_unit(3);
    let problem = RescaledProblem::identity(vec![0.0; 3], vec![0, 1, 2]);
    for budget in [0, 1, 5, 7, 13, 50, 400] {
        let calls = Cell::new(0usize);
        let mut f = |x: &[f64]| {
            calls.set(calls.get() + 1);
            (x[0] - 0.3).powi(2) + 3.0 * (x[1] + 0.1).powi(4) + (x[2] * x[0]).cosh()
        };
        let r = bfgs_minimize(&mut f, &problem, &domain, &[0.8, 0.6, -0.9], 1e-9, budget);
        assert_eq!(r.n_evals, calls.get(), "budget {budget}");
        assert!(r.n_evals <= budget, "budget {budget}: used {}", r.n_evals);
        assert_eq!(r.n_evals, r.value_evals + 2 * 3 * r.gradient_evals);
        if budget == 0 {
            assert!(r.y_final.is_nan());
        }
    }
}

#[test]
fn iterates_stay_in_the_domain() {
    // minimizer outside the box: the search must end on the boundary
    let domain = Domain::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
    let problem = RescaledProblem::identity(vec![0.5, 0.5], vec![0, 1]);
    let mut f = |x: &[f64]| {
        assert!(domain.contains(x), "evaluated outside the domain: {x:?}");
        (x[0] - 2.0).powi(2) + (x[1] - 0.25).powi(2)
    };
    let r = bfgs_minimize(&mut f, &problem, &domain, &[0.5, 0.5], 1e-6, 500);
    assert!(domain.contains(&r.x_final));
    assert!(r.x_final[0] > 0.99, "{:?}", r.x_final);
}

#[test]
fn rescaling_from_a_fitted_model_whitens_the_quadratic() {
    let domain = Domain::symmetric_unit(2);
    let f = |x: &[f64]| 3.0 * x[0] * x[0] + 0.5 * x[1] * x[1];
    let mut data = Vec::new();
    for i in 0..7 {
        for j in 0..7 {
            let x = vec![-1.0 + i as f64 / 3.0, -1.0 + j as f64 / 3.0];
            let y = f(&x);
            data.push(Observation::new(x, y));
        }
    }
    let (model, _) = GpModel::fit(data, domain, 0, &FitOptions::default()).unwrap();
    let p = build_rescaling(&model, &[0.0, 0.0]);
    assert!(!p.fallback);
    // zᵀz should reproduce xᵀ H x with H = diag(6, 1)
    for x in [[0.3, 0.0], [0.0, -0.4], [0.2, 0.3]] {
        let z = p.to_z(&x);
        let quad = 6.0 * x[0] * x[0] + x[1] * x[1];
        assert!(
            (z.dot(&z) - quad).abs() < 0.1 * quad,
            "{x:?}: {} vs {quad}",
            z.dot(&z)
        );
    }
}
