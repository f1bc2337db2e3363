mod common;

use common::*;
use nysadmm::admm::{solve, AdmmConfig, ProblemSpec, StoppingRule};
use nysadmm::problems::{
    elastic_net_spec, lasso_kkt, logistic_spec, logistic_weights, svm_spec, ElasticNetProblem, LogisticProblem,
    SvmProblem,
};
use nysadmm::{DenseMatrix, Vector};

fn dense(m: &Mat) -> DenseMatrix {
    DenseMatrix::from_matrix(m.clone()).unwrap()
}

fn tight() -> AdmmConfig {
    AdmmConfig {
        eps_abs: 1e-9,
        eps_rel: 1e-9,
        max_admm_iters: 20_000,
        ..AdmmConfig::default()
    }
}

fn binary_labels(a: &Mat, seed: u64) -> Vec64 {
    let w = gaussian_vec(a.ncols(), seed);
    let noise = gaussian_vec(a.nrows(), seed + 1);
    Vec64::from_fn(a.nrows(), |i, _| if (a.row(i) * &w)[0] + 0.5 * noise[i] > 0.0 { 1.0 } else { 0.0 })
}

fn pm_labels(n: usize) -> Vec64 {
    Vec64::from_fn(n, |i, _| if i % 2 == 0 { 1.0 } else { -1.0 })
}

#[test]
fn unregularized_least_squares_matches_normal_equations() {
    let a = scaled_design(60, &[1.0, 2.0, 0.5, 1.5, 1.0, 3.0], 1);
    let b = gaussian_vec(60, 2);
    let spec = elastic_net_spec(ElasticNetProblem::new(dense(&a), b.clone(), 0.0, 0.0).unwrap()).unwrap();
    let report = solve(&spec, &tight(), None).unwrap();
    let exact = (a.transpose() * &a).cholesky().unwrap().solve(&(a.transpose() * &b));
    assert!((&report.solution - &exact).norm() <= 1e-6 * exact.norm());
}

#[test]
fn elastic_net_matches_fista() {
    let a = scaled_design(40, &[1.0; 20], 3);
    let b = gaussian_vec(40, 4);
    let gamma = 0.3;
    let problem = ElasticNetProblem::coupled(dense(&a), b.clone(), gamma).unwrap();
    assert_eq!(problem.ridge_weight, 1.0 - gamma);
    let spec = elastic_net_spec(problem).unwrap();
    let report = solve(&spec, &tight(), None).unwrap();
    assert!(report.converged);
    let oracle = elastic_net_oracle(&a, &b, gamma, 1.0 - gamma);
    let rel = rel_diff(
        elastic_net_objective(&a, &b, gamma, 1.0 - gamma, &report.solution),
        elastic_net_objective(&a, &b, gamma, 1.0 - gamma, &oracle),
    );
    assert!(rel <= 1e-6, "relative gap {rel}");
}

#[test]
fn lasso_kkt_vanishes_at_the_optimum_and_is_scale_aware() {
    let a = scaled_design(30, &[1.0; 12], 5);
    let b = gaussian_vec(30, 6);
    let gamma = 0.2 * (a.transpose() * &b).amax();
    let x = elastic_net_oracle(&a, &b, gamma, 0.0);
    assert!(lasso_kkt(&x, &dense(&a), &b, gamma) <= 1e-8);

    // At a non-optimal point the metric equals its defining ratio.
    let y = gaussian_vec(12, 7);
    let resid = &a * &y - &b;
    let step = &y - a.transpose() * &resid;
    let expected = (&y - soft(&step, gamma)).norm() / (1.0 + y.norm() + resid.norm());
    assert!(rel_diff(lasso_kkt(&y, &dense(&a), &b, gamma), expected) <= 1e-12);
}

#[test]
fn heavy_regularization_gives_zero() {
    let a = scaled_design(25, &[1.0; 8], 8);
    let b = gaussian_vec(25, 9);
    let gamma = 2.0 * (a.transpose() * &b).amax();
    let cfg = AdmmConfig {
        max_admm_iters: 5000,
        ..AdmmConfig::default()
    };
    let lasso = elastic_net_spec(ElasticNetProblem::lasso(dense(&a), b, gamma).unwrap()).unwrap();
    let report = solve(&lasso, &cfg, None).unwrap();
    assert!(report.solution.iter().all(|&v| v == 0.0));

    let labels = binary_labels(&a, 10);
    // The logistic gradient at zero is Aᵀ(½ − b).
    let grad0 = a.transpose() * labels.map(|l| 0.5 - l);
    let logistic = logistic_spec(LogisticProblem::new(dense(&a), labels, 2.0 * grad0.amax()).unwrap());
    let report = solve(&logistic, &cfg, None).unwrap();
    assert!(report.solution.iter().all(|&v| v == 0.0));
}

#[test]
fn logistic_matches_proximal_gradient() {
    let a = scaled_design(60, &[1.0; 15], 11);
    let b = binary_labels(&a, 12);
    let gamma = 0.5;
    let spec = logistic_spec(LogisticProblem::new(dense(&a), b.clone(), gamma).unwrap());
    let cfg = AdmmConfig {
        eps_abs: 1e-8,
        eps_rel: 1e-8,
        max_admm_iters: 5000,
        ..AdmmConfig::default()
    };
    let report = solve(&spec, &cfg, None).unwrap();
    assert!(report.converged);
    let oracle = logistic_oracle(&a, &b, gamma);
    let objective = |x: &Vec64| logistic_loss(&a, &b, x) + gamma * x.lp_norm(1);
    let rel = rel_diff(objective(&report.solution), objective(&oracle));
    assert!(rel <= 1e-5, "relative gap {rel}");
    // Linearization refreshes every iteration, one sketch each.
    assert_eq!(report.preconditioner_builds, report.iterations);
}

#[test]
fn relative_change_rule_stops_logistic() {
    let a = scaled_design(50, &[1.0; 10], 13);
    let b = binary_labels(&a, 14);
    let spec = logistic_spec(LogisticProblem::new(dense(&a), b, 0.2).unwrap());
    let cfg = AdmmConfig {
        stopping: StoppingRule::RelativeChange { tol: 1e-6 },
        max_admm_iters: 5000,
        ..AdmmConfig::default()
    };
    let report = solve(&spec, &cfg, None).unwrap();
    assert!(report.converged);
    assert!(report.iterations < 5000);
}

#[test]
fn logistic_weights_are_positive_and_bounded() {
    let margins = Vector::from_row_slice(&[-800.0, -30.0, -1.0, 0.0, 2.5, 30.0, 800.0]);
    let labels = Vector::from_row_slice(&[0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0]);
    let (w, q) = logistic_weights(&margins, &labels);
    for (i, &t) in margins.iter().enumerate() {
        assert!(w[i] > 0.0 && w[i] <= 0.25, "w({t}) = {}", w[i]);
        assert!(q[i].is_finite());
        // 1/(2 + e^{-t} + e^{t}) wherever that is representable
        if t.abs() < 700.0 {
            let direct = 1.0 / (2.0 + (-t).exp() + t.exp());
            assert!(rel_diff(w[i], direct) <= 1e-12);
        }
    }
}

#[test]
fn logistic_operator_matches_finite_difference_hessian() {
    let a = scaled_design(6, &[1.0, 0.5, 2.0, 1.0], 15);
    let b = Vec64::from_row_slice(&[1.0, 0.0, 1.0, 1.0, 0.0, 0.0]);
    let spec = logistic_spec(LogisticProblem::new(dense(&a), b.clone(), 0.1).unwrap());
    let x = gaussian_vec(4, 16) * 0.7;
    let op = spec.operator(&x).unwrap();
    let h = 1e-5;
    for j in 0..4 {
        let mut e = Vec64::zeros(4);
        e[j] = 1.0;
        let fd = (logistic_gradient(&a, &b, &(&x + &e * h)) - logistic_gradient(&a, &b, &(&x - &e * h))) / (2.0 * h);
        let col = op.apply(&e);
        assert!((&col - &fd).norm() <= 1e-6 * (1.0 + fd.norm()), "column {j}");
    }
}

/// The subproblem right-hand side must equal `Hx̃ − ∇ℓ(x̃) + ρ(z − u)`
/// with the loss Hessian and gradient computed independently.
#[test]
fn right_hand_sides_follow_the_linearization() {
    let a = scaled_design(20, &[1.0; 7], 17);
    let rho = 1.7;
    let zs = gaussian_vec(7, 18);
    let us = gaussian_vec(7, 19) * 0.3;

    let y = gaussian_vec(20, 20);
    let ridge = 0.4;
    let en = elastic_net_spec(ElasticNetProblem::new(dense(&a), y.clone(), 0.1, ridge).unwrap()).unwrap();
    let labels = binary_labels(&a, 21);
    let lg = logistic_spec(LogisticProblem::new(dense(&a), labels.clone(), 0.1).unwrap());

    for probe in 0..10 {
        let x = gaussian_vec(7, 100 + probe);
        let v = gaussian_vec(7, 200 + probe);

        let hess = a.transpose() * &a + Mat::identity(7, 7) * ridge;
        let grad = a.transpose() * (&a * &x - &y) + &x * ridge;
        let op = en.operator(&x).unwrap();
        assert!((op.apply(&v) - &hess * &v).norm() <= 1e-10 * (1.0 + (&hess * &v).norm()));
        let expected = &hess * &x - &grad + (&zs - &us) * rho;
        assert!((en.rhs(&x, &zs, &us, rho) - &expected).norm() <= 1e-10 * (1.0 + expected.norm()));

        let p = (&a * &x).map(|t| 1.0 / (1.0 + (-t).exp()));
        let w = p.map(|s| s * (1.0 - s));
        let hess = a.transpose() * Mat::from_diagonal(&w) * &a;
        let op = lg.operator(&x).unwrap();
        assert!((op.apply(&v) - &hess * &v).norm() <= 1e-10 * (1.0 + (&hess * &v).norm()));
        let expected = &hess * &x - logistic_gradient(&a, &labels, &x) + (&zs - &us) * rho;
        assert!((lg.rhs(&x, &zs, &us, rho) - &expected).norm() <= 1e-9 * (1.0 + expected.norm()));
    }
}

#[test]
fn svm_operator_and_rhs() {
    let feats = scaled_design(9, &[1.0, 1.0, 1.0], 22);
    let k = &feats * feats.transpose();
    let b = pm_labels(9);
    let spec = svm_spec(SvmProblem::new(dense(&k), b.clone(), 2.0).unwrap()).unwrap();
    let q = Mat::from_fn(9, 9, |i, j| b[i] * k[(i, j)] * b[j]);
    for probe in 0..10 {
        let x = gaussian_vec(9, 300 + probe);
        let v = gaussian_vec(9, 400 + probe);
        let op = spec.operator(&x).unwrap();
        assert!((op.apply(&v) - &q * &v).norm() <= 1e-10 * (1.0 + (&q * &v).norm()));
        let z = gaussian_vec(9, 500 + probe);
        let u = gaussian_vec(9, 600 + probe);
        let grad = &q * &x - Vec64::repeat(9, 1.0);
        let expected = &q * &x - grad + (&z - &u) * 0.9;
        assert!((spec.rhs(&x, &z, &u, 0.9) - &expected).norm() <= 1e-10 * (1.0 + expected.norm()));
    }
}

#[test]
fn two_point_svm_hits_the_box_corner() {
    let k = Mat::identity(2, 2);
    let b = Vec64::from_row_slice(&[1.0, -1.0]);
    let spec = svm_spec(SvmProblem::new(dense(&k), b, 10.0).unwrap()).unwrap();
    let report = solve(&spec, &tight(), None).unwrap();
    assert!(report.converged);
    assert!((&report.solution - Vec64::from_row_slice(&[1.0, 1.0])).amax() <= 1e-6);
}

#[test]
fn svm_matches_projected_gradient_and_stays_feasible() {
    let n = 30;
    let feats = scaled_design(n, &[1.0, 1.0, 1.0, 1.0], 23);
    let sq = |i: usize, j: usize| (feats.row(i) - feats.row(j)).norm_squared();
    let k = Mat::from_fn(n, n, |i, j| (-0.5 * sq(i, j)).exp());
    let w = gaussian_vec(4, 24);
    let b = Vec64::from_fn(n, |i, _| if (feats.row(i) * &w)[0] >= 0.0 { 1.0 } else { -1.0 });
    let c = 1.0;
    let spec = svm_spec(SvmProblem::new(dense(&k), b.clone(), c).unwrap()).unwrap();
    let report = solve(&spec, &tight(), None).unwrap();
    assert!(report.converged);
    let x = &report.solution;
    assert!(b.dot(x).abs() <= 1e-10 * n as f64 * c);
    assert!(x.iter().all(|&v| (0.0..=c).contains(&v)));
    let oracle = svm_oracle(&k, &b, c);
    let gap = rel_diff(svm_objective(&k, &b, x), svm_objective(&k, &b, &oracle));
    assert!(gap <= 1e-5, "relative gap {gap}");
}

#[test]
fn invalid_inputs_are_rejected() {
    let a = dense(&scaled_design(4, &[1.0, 1.0], 25));
    assert!(ElasticNetProblem::new(a.clone(), Vector::zeros(3), 0.1, 0.0).is_err());
    assert!(ElasticNetProblem::lasso(a.clone(), Vector::zeros(4), -1.0).is_err());
    assert!(ElasticNetProblem::coupled(a.clone(), Vector::zeros(4), 1.5).is_err());
    assert!(LogisticProblem::new(a.clone(), Vector::from_row_slice(&[0.0, 1.0, 2.0, 0.0]), 0.1).is_err());
    let indefinite = Mat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
    assert!(SvmProblem::new(dense(&indefinite), Vec64::from_row_slice(&[1.0, -1.0]), 1.0).is_err());
    assert!(SvmProblem::new(dense(&Mat::identity(2, 2)), Vec64::from_row_slice(&[1.0, 0.0]), 1.0).is_err());
    assert!(SvmProblem::new(dense(&Mat::identity(2, 2)), Vec64::from_row_slice(&[1.0, -1.0]), 0.0).is_err());
}
