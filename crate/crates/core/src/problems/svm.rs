use std::sync::Arc;

use crate::admm::ProblemSpec;
use crate::error::{check_dim, Error, Result};
use crate::linops::{mat_vec, probe_symmetric_psd, svm_operator, DenseMatrix, SharedOperator, SvmOperator, SymmetricOperator, Vector};
use crate::prox::{project_box_hyperplane, BoxHyperplaneSet};

const PSD_PROBES: usize = 20;

/// Dual SVM: minimize `½xᵀdiag(b)Kdiag(b)x − 1ᵀx` over `{xᵀb = 0, 0 ≤ x ≤ C}`.
#[derive(Debug, Clone)]
pub struct SvmProblem {
    pub k: DenseMatrix,
    pub b: Vector,
    pub c: f64,
}

impl SvmProblem {
    /// Checks shapes, labels, `C > 0`, and that `K` passes random symmetry/psd probes.
    pub fn new(k: DenseMatrix, b: Vector, c: f64) -> Result<Self> {
        check_dim("kernel matrix columns", k.rows(), k.cols())?;
        let op = svm_operator(&k, &b)?;
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidArgument(format!("C must be positive, got {c}")));
        }
        let probe = probe_symmetric_psd(&op, PSD_PROBES, 0);
        let scale = k.as_matrix().amax().max(1.0);
        if probe.max_asymmetry > 1e-8 || probe.min_quadratic < -1e-10 * scale {
            return Err(Error::InvalidArgument(
                "kernel matrix is not symmetric positive semidefinite".into(),
            ));
        }
        Ok(Self { k, b, c })
    }

    pub fn objective(&self, x: &Vector) -> f64 {
        let bx = x.component_mul(&self.b);
        let kbx = mat_vec(self.k.as_matrix(), &bx);
        0.5 * bx.dot(&kbx) - x.sum()
    }
}

pub struct SvmSpec {
    problem: SvmProblem,
    operator: Arc<SvmOperator>,
    set: BoxHyperplaneSet,
}

pub fn svm_spec(p: SvmProblem) -> Result<SvmSpec> {
    let operator = Arc::new(svm_operator(&p.k, &p.b)?);
    let set = BoxHyperplaneSet::new(p.b.clone(), p.c)?;
    Ok(SvmSpec {
        problem: p,
        operator,
        set,
    })
}

impl SvmSpec {
    pub fn problem(&self) -> &SvmProblem {
        &self.problem
    }
}

impl ProblemSpec for SvmSpec {
    fn dim(&self) -> usize {
        self.operator.dim()
    }

    fn operator(&self, _x: &Vector) -> Result<SharedOperator> {
        Ok(self.operator.clone())
    }

    fn rhs(&self, _x: &Vector, z: &Vector, u: &Vector, rho: f64) -> Vector {
        // Quadratic loss and linear g: Hx̃ − ∇ℓ(x̃) = 0 and −∇g = 1.
        (z - u) * rho + Vector::from_element(z.len(), 1.0)
    }

    fn z_step(&self, v: &Vector, _rho: f64) -> Result<Vector> {
        project_box_hyperplane(v, &self.set)
    }

    fn objective(&self, x: &Vector) -> f64 {
        self.problem.objective(x)
    }
}

/// Decision function recovered from a dual solution.
#[derive(Debug, Clone)]
pub struct SvmModel {
    pub bias: f64,
    pub support_vectors: usize,
}

impl SvmModel {
    /// Bias from the margin support vectors (`0 < αᵢ < C`), averaged; falls
    /// back to the midpoint of the feasible bias interval when none are free.
    pub fn recover(p: &SvmProblem, alpha: &Vector) -> Self {
        let tol = 1e-8 * p.c;
        let f = mat_vec(p.k.as_matrix(), &alpha.component_mul(&p.b));
        let free: Vec<f64> = (0..alpha.len())
            .filter(|&i| alpha[i] > tol && alpha[i] < p.c - tol)
            .map(|i| p.b[i] - f[i])
            .collect();
        let bias = if !free.is_empty() {
            free.iter().sum::<f64>() / free.len() as f64
        } else {
            // yᵢ(fᵢ + β) ≥ 1 at α = 0, ≤ 1 at α = C
            let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
            for i in 0..alpha.len() {
                let edge = p.b[i] - f[i];
                let at_upper = alpha[i] >= p.c - tol;
                if (p.b[i] > 0.0) != at_upper {
                    lo = lo.max(edge);
                } else {
                    hi = hi.min(edge);
                }
            }
            match (lo.is_finite(), hi.is_finite()) {
                (true, true) => 0.5 * (lo + hi),
                (true, false) => lo,
                (false, true) => hi,
                (false, false) => 0.0,
            }
        };
        Self {
            bias,
            support_vectors: alpha.iter().filter(|&&a| a > tol).count(),
        }
    }

    /// Decision values on the training points.
    pub fn decision_values(&self, p: &SvmProblem, alpha: &Vector) -> Vector {
        mat_vec(p.k.as_matrix(), &alpha.component_mul(&p.b)).add_scalar(self.bias)
    }

    pub fn training_accuracy(&self, p: &SvmProblem, alpha: &Vector) -> f64 {
        let f = self.decision_values(p, alpha);
        let correct = f
            .iter()
            .zip(p.b.iter())
            .filter(|(&fi, &bi)| fi * bi > 0.0)
            .count();
        correct as f64 / p.b.len().max(1) as f64
    }
}
