//! Nyström preconditioner for `H + ρI`.
//!
//! `P⁻¹ = (λ̂ₛ + ρ) U (Λ̂ + ρI)⁻¹ Uᵀ + (I − UUᵀ)`, applied in `O(ds)` from the
//! factored form.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};
use crate::linops::Vector;
use crate::nystrom::NystromApproximation;

/// Anything PCG can use to apply an approximate inverse.
pub trait Preconditioner: Send + Sync {
    fn dim(&self) -> usize;
    fn apply_inverse(&self, v: &Vector) -> Vector;
}

/// No preconditioning; turns PCG into plain CG.
#[derive(Debug, Clone, Copy)]
pub struct IdentityPreconditioner(pub usize);

impl Preconditioner for IdentityPreconditioner {
    fn dim(&self) -> usize {
        self.0
    }
    fn apply_inverse(&self, v: &Vector) -> Vector {
        v.clone()
    }
}

#[derive(Debug, Clone)]
pub struct NystromPreconditioner {
    u: DMatrix<f64>,
    eigs: DVector<f64>,
    lam_s: f64,
    rho: f64,
}

pub fn build_preconditioner(approx: NystromApproximation, rho: f64) -> Result<NystromPreconditioner> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::InvalidArgument(format!("rho must be positive, got {rho}")));
    }
    if approx.rank() == 0 {
        return Err(Error::InvalidArgument("empty Nyström approximation".into()));
    }
    check_dim("approximation basis columns", approx.rank(), approx.u.ncols())?;
    let lam_s = approx.last_eig();
    Ok(NystromPreconditioner {
        u: approx.u,
        eigs: approx.eigs,
        lam_s,
        rho,
    })
}

impl NystromPreconditioner {
    pub fn rank(&self) -> usize {
        self.eigs.len()
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn lam_s(&self) -> f64 {
        self.lam_s
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.u
    }

    pub fn eigs(&self) -> &DVector<f64> {
        &self.eigs
    }

    /// `(λ̂ₛ + ρ)/ρ`.
    pub fn empirical_condition_number(&self) -> f64 {
        (self.lam_s + self.rho) / self.rho
    }

    /// `P v = U(Λ̂ + ρI)Uᵀv / (λ̂ₛ + ρ) + v − UUᵀv`.
    pub fn apply(&self, v: &Vector) -> Vector {
        self.apply_scaled(v, |lam| (lam + self.rho) / (self.lam_s + self.rho))
    }

    fn apply_scaled(&self, v: &Vector, scale: impl Fn(f64) -> f64) -> Vector {
        assert_eq!(v.len(), self.u.nrows(), "preconditioner dimension mismatch");
        let coeffs = self.u.tr_mul(v);
        let scaled = DVector::from_fn(coeffs.len(), |i, _| coeffs[i] * (scale(self.eigs[i]) - 1.0));
        v + &self.u * scaled
    }
}

pub fn empirical_condition_number(p: &NystromPreconditioner) -> f64 {
    p.empirical_condition_number()
}

pub fn apply_inverse(p: &NystromPreconditioner, v: &Vector) -> Vector {
    p.apply_inverse(v)
}

impl Preconditioner for NystromPreconditioner {
    fn dim(&self) -> usize {
        self.u.nrows()
    }

    fn apply_inverse(&self, v: &Vector) -> Vector {
        // (λ̂ₛ+ρ)U(Λ̂+ρ)⁻¹Uᵀv + v − UUᵀv, folded into one rank-s update.
        self.apply_scaled(v, |lam| (self.lam_s + self.rho) / (lam + self.rho))
    }
}
