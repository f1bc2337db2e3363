//! Independent reference solvers and dense oracles shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use nysadmm::rng;

pub type Mat = DMatrix<f64>;
pub type Vec64 = DVector<f64>;

/// Random orthogonal `d×d` matrix.
pub fn orthogonal(d: usize, seed: u64) -> Mat {
    let mut r = rng::seeded(seed);
    rng::gaussian_matrix(&mut r, d, d).qr().q()
}

/// `Q diag(eigs) Qᵀ` with a seeded random orthogonal `Q`, symmetrized.
pub fn psd_with_spectrum(eigs: &[f64], seed: u64) -> Mat {
    let d = eigs.len();
    let q = orthogonal(d, seed);
    let h = &q * Mat::from_diagonal(&Vec64::from_row_slice(eigs)) * q.transpose();
    (&h + h.transpose()) * 0.5
}

/// Eigenvalues in descending order.
pub fn eigenvalues_desc(m: &Mat) -> Vec<f64> {
    let mut e: Vec<f64> = m.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
    e.sort_by(|a, b| b.partial_cmp(a).unwrap());
    e
}

pub fn spectral_norm_sym(m: &Mat) -> f64 {
    eigenvalues_desc(m).iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Condition number of `P^{-1/2}(H+ρI)P^{-1/2}` with the preconditioner
/// formed densely from its defining formula.
pub fn preconditioned_condition(h: &Mat, u: &Mat, eigs: &[f64], rho: f64) -> f64 {
    let d = h.nrows();
    let lam_s = *eigs.last().unwrap();
    let scale = Vec64::from_iterator(eigs.len(), eigs.iter().map(|&l| ((lam_s + rho) / (l + rho)).sqrt()));
    let p_inv_half = u * Mat::from_diagonal(&scale) * u.transpose() + (Mat::identity(d, d) - u * u.transpose());
    let mut hr = h.clone();
    for i in 0..d {
        hr[(i, i)] += rho;
    }
    let m = &p_inv_half * hr * &p_inv_half;
    let e = eigenvalues_desc(&((&m + m.transpose()) * 0.5));
    e[0] / e[d - 1]
}

pub fn soft(v: &Vec64, tau: f64) -> Vec64 {
    v.map(|x| x.signum() * (x.abs() - tau).max(0.0))
}

/// FISTA on `½‖Ax−b‖² + ½ridge‖x‖² + l1‖x‖₁`, run until the prox-gradient
/// fixed-point gap is below `1e-14·(1+‖x‖)`.
pub fn elastic_net_oracle(a: &Mat, b: &Vec64, l1: f64, ridge: f64) -> Vec64 {
    let d = a.ncols();
    let ata = a.transpose() * a;
    let l = eigenvalues_desc(&ata)[0] + ridge;
    let step = 1.0 / l;
    let atb = a.transpose() * b;
    let grad = |x: &Vec64| &ata * x - &atb + x * ridge;
    let mut x = Vec64::zeros(d);
    let mut y = x.clone();
    let mut t = 1.0_f64;
    for _ in 0..500_000 {
        let x_new = soft(&(&y - grad(&y) * step), l1 * step);
        let t_new = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        y = &x_new + (&x_new - &x) * ((t - 1.0) / t_new);
        x = x_new;
        t = t_new;
        let gap = (&x - soft(&(&x - grad(&x) * step), l1 * step)).norm();
        if gap < 1e-14 * (1.0 + x.norm()) {
            break;
        }
    }
    x
}

pub fn elastic_net_objective(a: &Mat, b: &Vec64, l1: f64, ridge: f64, x: &Vec64) -> f64 {
    0.5 * (a * x - b).norm_squared() + 0.5 * ridge * x.norm_squared() + l1 * x.lp_norm(1)
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

pub fn logistic_loss(a: &Mat, b: &Vec64, x: &Vec64) -> f64 {
    let t = a * x;
    t.iter()
        .zip(b.iter())
        .map(|(&ti, &bi)| {
            let sp = if ti > 0.0 { ti + (-ti).exp().ln_1p() } else { ti.exp().ln_1p() };
            sp - bi * ti
        })
        .sum()
}

pub fn logistic_gradient(a: &Mat, b: &Vec64, x: &Vec64) -> Vec64 {
    let p = (a * x).map(sigmoid);
    a.transpose() * (p - b)
}

/// Proximal gradient with backtracking on the ℓ1-logistic objective, run to a
/// gradient-mapping norm of `1e-10`.
pub fn logistic_oracle(a: &Mat, b: &Vec64, gamma: f64) -> Vec64 {
    let mut x = Vec64::zeros(a.ncols());
    let mut step = 1.0;
    for _ in 0..200_000 {
        let g = logistic_gradient(a, b, &x);
        let f = logistic_loss(a, b, &x);
        loop {
            let cand = soft(&(&x - &g * step), gamma * step);
            let diff = &cand - &x;
            let model = f + g.dot(&diff) + diff.norm_squared() / (2.0 * step);
            if logistic_loss(a, b, &cand) <= model + 1e-15 * f.abs() {
                break;
            }
            step *= 0.5;
        }
        let x_new = soft(&(&x - &g * step), gamma * step);
        let mapping = (&x_new - &x).norm() / step;
        x = x_new;
        step *= 1.5;
        if mapping < 1e-10 {
            break;
        }
    }
    x
}

/// Projection onto `{0 ≤ z ≤ C, bᵀz = 0}` by bisection on the multiplier.
pub fn bisection_projection(v: &Vec64, b: &Vec64, c: f64) -> Vec64 {
    let at = |mu: f64| v.zip_map(b, |vi, bi| (vi - mu * bi).clamp(0.0, c));
    let bal = |mu: f64| at(mu).dot(b);
    let span = v.amax() + c + 1.0;
    let (mut lo, mut hi) = (-span, span);
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if bal(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(0.5 * (lo + hi))
}

/// Exact projection by enumerating every lower/upper/free assignment (n ≤ 10).
pub fn exhaustive_projection(v: &Vec64, b: &Vec64, c: f64) -> Option<Vec64> {
    let n = v.len();
    assert!(n <= 10);
    let mut best: Option<(f64, Vec64)> = None;
    for code in 0..3usize.pow(n as u32) {
        let mut state = vec![0u8; n];
        let mut rem = code;
        for s in state.iter_mut() {
            *s = (rem % 3) as u8;
            rem /= 3;
        }
        let free: Vec<usize> = (0..n).filter(|&i| state[i] == 2).collect();
        let upper: f64 = (0..n).filter(|&i| state[i] == 1).map(|i| b[i] * c).sum();
        let mu = if free.is_empty() {
            if upper.abs() > 1e-12 {
                continue;
            }
            0.0
        } else {
            (free.iter().map(|&i| b[i] * v[i]).sum::<f64>() + upper) / free.len() as f64
        };
        let z = Vec64::from_fn(n, |i, _| match state[i] {
            0 => 0.0,
            1 => c,
            _ => v[i] - mu * b[i],
        });
        if free.iter().any(|&i| z[i] < -1e-12 || z[i] > c + 1e-12) {
            continue;
        }
        let dist = (&z - v).norm_squared();
        if best.as_ref().is_none_or(|(d, _)| dist < *d) {
            best = Some((dist, z));
        }
    }
    best.map(|(_, z)| z)
}

pub fn svm_objective(k: &Mat, b: &Vec64, x: &Vec64) -> f64 {
    let bx = x.component_mul(b);
    0.5 * bx.dot(&(k * &bx)) - x.sum()
}

/// Accelerated projected gradient on the SVM dual, run to a projected-gradient
/// fixed-point gap of `1e-10`.
pub fn svm_oracle(k: &Mat, b: &Vec64, c: f64) -> Vec64 {
    let n = b.len();
    let q = Mat::from_fn(n, n, |i, j| b[i] * k[(i, j)] * b[j]);
    let step = 1.0 / eigenvalues_desc(&q)[0].max(1e-12);
    let grad = |x: &Vec64| &q * x - Vec64::repeat(n, 1.0);
    let mut x = Vec64::zeros(n);
    let mut y = x.clone();
    let mut t = 1.0_f64;
    for _ in 0..500_000 {
        let x_new = bisection_projection(&(&y - grad(&y) * step), b, c);
        let t_new = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        y = &x_new + (&x_new - &x) * ((t - 1.0) / t_new);
        x = x_new;
        t = t_new;
        let gap = (&x - bisection_projection(&(&x - grad(&x) * step), b, c)).norm();
        if gap < 1e-10 {
            break;
        }
    }
    x
}

/// Gaussian design with a column scaling `scales[j]`.
pub fn scaled_design(n: usize, scales: &[f64], seed: u64) -> Mat {
    let mut r = rng::seeded(seed);
    let mut a = rng::gaussian_matrix(&mut r, n, scales.len());
    for (j, &s) in scales.iter().enumerate() {
        a.column_mut(j).scale_mut(s);
    }
    a
}

pub fn gaussian_vec(len: usize, seed: u64) -> Vec64 {
    let mut r = rng::seeded(seed);
    rng::gaussian_vector(&mut r, len)
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}
