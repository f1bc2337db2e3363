use std::sync::Arc;

use crate::admm::ProblemSpec;
use crate::error::{check_dim, Error, Result};
use crate::linops::{gram_operator, mat_t_vec, mat_vec, DenseMatrix, SharedOperator, Vector};
use crate::prox::soft_threshold;

/// `−Σ (bᵢ(Ax)ᵢ − log(1 + exp((Ax)ᵢ))) + γ‖x‖₁` with `bᵢ ∈ {0, 1}`.
#[derive(Debug, Clone)]
pub struct LogisticProblem {
    pub a: DenseMatrix,
    pub b: Vector,
    pub gamma: f64,
}

impl LogisticProblem {
    pub fn new(a: DenseMatrix, b: Vector, gamma: f64) -> Result<Self> {
        check_dim("label count", a.rows(), b.len())?;
        if let Some((i, v)) = b.iter().enumerate().find(|(_, &v)| v != 0.0 && v != 1.0) {
            return Err(Error::InvalidArgument(format!(
                "logistic label {v} at index {i} is not in {{0, 1}}"
            )));
        }
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidArgument(format!("gamma must be ≥ 0, got {gamma}")));
        }
        Ok(Self { a, b, gamma })
    }

    /// The negative log-likelihood alone.
    pub fn loss(&self, x: &Vector) -> f64 {
        let margins = mat_vec(self.a.as_matrix(), x);
        margins
            .iter()
            .zip(self.b.iter())
            .map(|(&t, &b)| softplus(t) - b * t)
            .sum()
    }

    pub fn objective(&self, x: &Vector) -> f64 {
        self.loss(x) + self.gamma * x.lp_norm(1)
    }
}

/// `log(1 + eᵗ)` without overflow.
fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

/// `1 / (1 + e⁻ᵗ)` without overflow.
fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Smallest IRLS weight; keeps `q` finite when a margin saturates.
const WEIGHT_FLOOR: f64 = f64::MIN_POSITIVE;

/// IRLS weights and working responses at margins `t = Ax̃`:
/// `wᵢ = 1 / (2 + e^{−tᵢ} + e^{tᵢ})`, `qᵢ = tᵢ + (bᵢ − σ(tᵢ)) / wᵢ`.
pub fn logistic_weights(margins: &Vector, b: &Vector) -> (Vector, Vector) {
    assert_eq!(margins.len(), b.len(), "logistic_weights dimension mismatch");
    let mut w = Vector::zeros(margins.len());
    let mut q = Vector::zeros(margins.len());
    for i in 0..margins.len() {
        let t = margins[i];
        let (pos, neg) = (sigmoid(t), sigmoid(-t));
        // σ(t)σ(−t) equals 1/(2 + e⁻ᵗ + eᵗ)
        let wi = (pos * neg).max(WEIGHT_FLOOR);
        // b − σ(t), written so neither term cancels catastrophically
        let resid = b[i] * neg - (1.0 - b[i]) * pos;
        w[i] = wi;
        q[i] = t + resid / wi;
    }
    (w, q)
}

pub struct LogisticSpec {
    problem: LogisticProblem,
}

pub fn logistic_spec(p: LogisticProblem) -> LogisticSpec {
    LogisticSpec { problem: p }
}

impl ProblemSpec for LogisticSpec {
    fn dim(&self) -> usize {
        self.problem.a.cols()
    }

    fn operator(&self, x: &Vector) -> Result<SharedOperator> {
        let margins = mat_vec(self.problem.a.as_matrix(), x);
        let (w, _) = logistic_weights(&margins, &self.problem.b);
        Ok(Arc::new(gram_operator(&self.problem.a, Some(&w), None)?))
    }

    fn rhs(&self, x: &Vector, z: &Vector, u: &Vector, rho: f64) -> Vector {
        let margins = mat_vec(self.problem.a.as_matrix(), x);
        let (w, q) = logistic_weights(&margins, &self.problem.b);
        (z - u) * rho + mat_t_vec(self.problem.a.as_matrix(), &w.component_mul(&q))
    }

    fn z_step(&self, v: &Vector, rho: f64) -> Result<Vector> {
        Ok(soft_threshold(v, self.problem.gamma / rho))
    }

    fn objective(&self, x: &Vector) -> f64 {
        self.problem.objective(x)
    }

    fn default_refresh_interval(&self) -> usize {
        1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn weights_at_zero_margin() {
        let (w, q) = logistic_weights(&Vector::zeros(2), &Vector::from_row_slice(&[1.0, 0.0]));
        assert_eq!(w.as_slice(), &[0.25, 0.25]);
        assert_eq!(q.as_slice(), &[2.0, -2.0]);
    }

    #[test]
    fn weights_at_saturated_margin() {
        let (w, q) = logistic_weights(&Vector::from_row_slice(&[30.0]), &Vector::from_row_slice(&[1.0]));
        // w = e⁻³⁰/(1+e⁻³⁰)², q = 30 + 1 + e⁻³⁰
        let e = (-30.0f64).exp();
        assert!((w[0] - e / ((1.0 + e) * (1.0 + e))).abs() <= 1e-15 * e);
        assert!((q[0] - 31.0).abs() < 1e-12);
    }

    #[test]
    fn weights_stay_finite_at_extremes() {
        let t = Vector::from_row_slice(&[800.0, -800.0, 800.0, -800.0]);
        let b = Vector::from_row_slice(&[0.0, 1.0, 1.0, 0.0]);
        let (w, q) = logistic_weights(&t, &b);
        assert!(w.iter().all(|&v| v > 0.0 && v <= 0.25));
        assert!(q.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn loss_is_stable() {
        let a = DenseMatrix::from_row_major(1, 1, &[1.0]).unwrap();
        let p = LogisticProblem::new(a, Vector::from_row_slice(&[0.0]), 0.0).unwrap();
        assert!((p.loss(&Vector::from_row_slice(&[1000.0])) - 1000.0).abs() < 1e-9);
        assert!((p.loss(&Vector::zeros(1)) - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn rejects_non_binary_labels() {
        let mut r = rng::seeded(1);
        let a = DenseMatrix::from_matrix(rng::gaussian_matrix(&mut r, 3, 2)).unwrap();
        assert!(LogisticProblem::new(a, Vector::from_row_slice(&[1.0, -1.0, 0.0]), 0.1).is_err());
    }
}
