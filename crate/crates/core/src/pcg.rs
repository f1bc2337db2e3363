//! Preconditioned conjugate gradients for `(H + ρI) x = r`.

use crate::error::{check_dim, Error, Result};
use crate::linops::{SymmetricOperator, Vector};
use crate::precond::{IdentityPreconditioner, Preconditioner};

/// A true residual this many times above `tol` overrides a converged flag.
const DRIFT_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PcgConfig {
    /// Threshold on the residual 2-norm.
    pub tol: f64,
    pub max_iters: usize,
    /// Iteration budget from the ADMM driver; the effective cap is
    /// `min(max_iters, theory_cap)`.
    pub theory_cap: Option<usize>,
}

impl Default for PcgConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iters: 500,
            theory_cap: None,
        }
    }
}

impl PcgConfig {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }

    pub fn iteration_cap(&self) -> usize {
        match self.theory_cap {
            Some(cap) => cap.min(self.max_iters),
            None => self.max_iters,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PcgReport {
    pub solution: Vector,
    pub iterations: usize,
    pub final_residual_norm: f64,
    pub converged: bool,
    /// Stopped because the iteration cap was reached.
    pub hit_cap: bool,
}

pub fn nystrom_pcg<P: Preconditioner + ?Sized>(
    h: &dyn SymmetricOperator,
    rho: f64,
    r: &Vector,
    x0: &Vector,
    precond: &P,
    cfg: &PcgConfig,
) -> Result<PcgReport> {
    nystrom_pcg_observed(h, rho, r, x0, precond, cfg, &mut |_, _| {})
}

/// Plain conjugate gradients on the same system.
pub fn conjugate_gradient(
    h: &dyn SymmetricOperator,
    rho: f64,
    r: &Vector,
    x0: &Vector,
    cfg: &PcgConfig,
) -> Result<PcgReport> {
    nystrom_pcg(h, rho, r, x0, &IdentityPreconditioner(h.dim()), cfg)
}

/// Same as [`nystrom_pcg`], calling `observer(t, x_t)` for the start point
/// and after every iteration.
pub fn nystrom_pcg_observed<P: Preconditioner + ?Sized>(
    h: &dyn SymmetricOperator,
    rho: f64,
    r: &Vector,
    x0: &Vector,
    precond: &P,
    cfg: &PcgConfig,
    observer: &mut dyn FnMut(usize, &Vector),
) -> Result<PcgReport> {
    let d = h.dim();
    check_dim("pcg right-hand side", d, r.len())?;
    check_dim("pcg initial guess", d, x0.len())?;
    check_dim("preconditioner", d, precond.dim())?;
    if !(rho > 0.0) {
        return Err(Error::InvalidArgument(format!("rho must be positive, got {rho}")));
    }
    if !(cfg.tol > 0.0) || cfg.max_iters == 0 {
        return Err(Error::InvalidArgument(
            "pcg needs tol > 0 and max_iters ≥ 1".into(),
        ));
    }
    let shifted = |v: &Vector| h.apply(v) + v * rho;
    let breakdown = |iteration| Error::NumericalBreakdown {
        iteration,
        admm_iteration: None,
    };

    let cap = cfg.iteration_cap();
    let mut x = x0.clone();
    let mut w = r - shifted(&x);
    let mut y = precond.apply_inverse(&w);
    let mut p = y.clone();
    let mut wy = w.dot(&y);
    let mut res_norm = w.norm();
    if !res_norm.is_finite() {
        return Err(breakdown(0));
    }
    observer(0, &x);

    let mut t = 0;
    while res_norm > cfg.tol && t < cap {
        let v = shifted(&p);
        let alpha = wy / p.dot(&v);
        x.axpy(alpha, &p, 1.0);
        w.axpy(-alpha, &v, 1.0);
        y = precond.apply_inverse(&w);
        let wy_next = w.dot(&y);
        let beta = wy_next / wy;
        p.axpy(1.0, &y, beta);
        wy = wy_next;
        res_norm = w.norm();
        t += 1;
        if !alpha.is_finite() || !res_norm.is_finite() || x.iter().any(|v| !v.is_finite()) {
            return Err(breakdown(t));
        }
        observer(t, &x);
    }

    let mut converged = res_norm <= cfg.tol;
    let mut final_residual_norm = res_norm;
    let true_residual = (r - shifted(&x)).norm();
    if true_residual > DRIFT_FACTOR * cfg.tol {
        converged = false;
        final_residual_norm = final_residual_norm.max(true_residual);
    }
    Ok(PcgReport {
        solution: x,
        iterations: t,
        final_residual_norm,
        converged,
        hit_cap: !converged && t >= cap,
    })
}
