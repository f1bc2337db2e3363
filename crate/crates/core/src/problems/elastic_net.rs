use std::sync::Arc;

use crate::admm::ProblemSpec;
use crate::error::{check_dim, Error, Result};
use crate::linops::{gram_operator, mat_t_vec, mat_vec, DenseMatrix, SharedOperator, Vector};
use crate::prox::soft_threshold;

/// `½‖Ax − b‖² + ½·ridge·‖x‖² + l1·‖x‖₁`.
#[derive(Debug, Clone)]
pub struct ElasticNetProblem {
    pub a: DenseMatrix,
    pub b: Vector,
    pub l1_weight: f64,
    pub ridge_weight: f64,
}

impl ElasticNetProblem {
    pub fn new(a: DenseMatrix, b: Vector, l1_weight: f64, ridge_weight: f64) -> Result<Self> {
        check_dim("response length", a.rows(), b.len())?;
        if b.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("response"));
        }
        for (name, w) in [("l1 weight", l1_weight), ("ridge weight", ridge_weight)] {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be ≥ 0, got {w}")));
            }
        }
        Ok(Self {
            a,
            b,
            l1_weight,
            ridge_weight,
        })
    }

    pub fn lasso(a: DenseMatrix, b: Vector, gamma: f64) -> Result<Self> {
        Self::new(a, b, gamma, 0.0)
    }

    /// The single-parameter mix `½(1−γ)‖x‖² + γ‖x‖₁`, `0 ≤ γ ≤ 1`.
    pub fn coupled(a: DenseMatrix, b: Vector, gamma: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::InvalidArgument(format!(
                "coupled elastic-net gamma must lie in [0, 1], got {gamma}"
            )));
        }
        Self::new(a, b, gamma, 1.0 - gamma)
    }

    pub fn objective(&self, x: &Vector) -> f64 {
        let resid = mat_vec(self.a.as_matrix(), x) - &self.b;
        0.5 * resid.norm_squared()
            + 0.5 * self.ridge_weight * x.norm_squared()
            + self.l1_weight * x.lp_norm(1)
    }
}

pub struct ElasticNetSpec {
    problem: ElasticNetProblem,
    atb: Vector,
    operator: SharedOperator,
}

pub fn elastic_net_spec(p: ElasticNetProblem) -> Result<ElasticNetSpec> {
    let d = p.a.cols();
    let ridge = (p.ridge_weight > 0.0).then(|| Vector::from_element(d, p.ridge_weight));
    let operator: SharedOperator = Arc::new(gram_operator(&p.a, None, ridge.as_ref())?);
    Ok(ElasticNetSpec {
        atb: mat_t_vec(p.a.as_matrix(), &p.b),
        problem: p,
        operator,
    })
}

impl ElasticNetSpec {
    pub fn problem(&self) -> &ElasticNetProblem {
        &self.problem
    }
}

impl ProblemSpec for ElasticNetSpec {
    fn dim(&self) -> usize {
        self.problem.a.cols()
    }

    fn operator(&self, _x: &Vector) -> Result<SharedOperator> {
        Ok(self.operator.clone())
    }

    fn rhs(&self, _x: &Vector, z: &Vector, u: &Vector, rho: f64) -> Vector {
        // The Hessian terms cancel the gradient's x-dependence: (AᵀA + rI)x − Aᵀ(Ax − b) − r·x = Aᵀb.
        (z - u) * rho + &self.atb
    }

    fn z_step(&self, v: &Vector, rho: f64) -> Result<Vector> {
        Ok(soft_threshold(v, self.problem.l1_weight / rho))
    }

    fn objective(&self, x: &Vector) -> f64 {
        self.problem.objective(x)
    }

    fn kkt_metric(&self, x: &Vector) -> Option<f64> {
        (self.problem.ridge_weight == 0.0)
            .then(|| lasso_kkt(x, &self.problem.a, &self.problem.b, self.problem.l1_weight))
    }
}

/// Relative KKT residual of the lasso:
/// `‖x − soft(x − Aᵀ(Ax − b), γ)‖ / (1 + ‖x‖ + ‖Ax − b‖)`.
pub fn lasso_kkt(x: &Vector, a: &DenseMatrix, b: &Vector, gamma: f64) -> f64 {
    let resid = mat_vec(a.as_matrix(), x) - b;
    let step = x - mat_t_vec(a.as_matrix(), &resid);
    let gap = (x - soft_threshold(&step, gamma)).norm();
    gap / (1.0 + x.norm() + resid.norm())
}
