//! Randomized Nyström approximation of a symmetric psd operator.
//!
//! The factorization follows the shifted, Cholesky-stabilized construction:
//! sketch `Y = HΩ` with an orthonormal Gaussian `Ω`, add a tiny shift `νΩ`,
//! factor the core `Ωᵀ(Y + νΩ)`, and read the eigenpairs off a thin SVD.
//! The adaptive variant grows the sketch by doubling and reuses every
//! matvec it has already paid for.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linops::SymmetricOperator;
use crate::rng::{self, SolverRng};

const POWER_STEPS: usize = 10;
const CHOLESKY_RETRY_FACTOR: f64 = 100.0;

/// `H ≈ U diag(eigs) Uᵀ` with orthonormal `U` and nonincreasing `eigs ≥ 0`.
#[derive(Debug, Clone)]
pub struct NystromApproximation {
    pub u: DMatrix<f64>,
    pub eigs: DVector<f64>,
    pub shift_used: f64,
    /// Set by the adaptive builder when it stopped at its rank cap without
    /// meeting the requested tolerance.
    pub capped: bool,
}

impl NystromApproximation {
    pub fn rank(&self) -> usize {
        self.eigs.len()
    }

    pub fn dim(&self) -> usize {
        self.u.nrows()
    }

    /// Smallest retained eigenvalue, `λ̂ₛ`.
    pub fn last_eig(&self) -> f64 {
        self.eigs.as_slice().last().copied().unwrap_or(0.0)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        &self.u * DMatrix::from_diagonal(&self.eigs) * self.u.transpose()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SketchConfig {
    pub sketch_size: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveConfig {
    pub initial_rank: usize,
    /// Defaults to `min(d, 10 * initial_rank)` when unset.
    pub max_rank: Option<usize>,
    pub rho: f64,
    /// Accept once `(λ̂ₛ + ρ)/ρ ≤ tol`.
    pub tol: f64,
    pub seed: u64,
}

impl AdaptiveConfig {
    pub fn resolved_max_rank(&self, dim: usize) -> usize {
        self.max_rank
            .unwrap_or_else(|| dim.min(10 * self.initial_rank))
    }

    fn validate(&self, dim: usize) -> Result<usize> {
        let max_rank = self.resolved_max_rank(dim);
        if self.initial_rank == 0 || self.initial_rank > max_rank || max_rank > dim {
            return Err(Error::InvalidArgument(format!(
                "adaptive ranks need 1 ≤ s0 ≤ s_max ≤ d, got s0={}, s_max={max_rank}, d={dim}",
                self.initial_rank
            )));
        }
        if !(self.rho > 0.0) {
            return Err(Error::InvalidArgument(format!("rho must be positive, got {}", self.rho)));
        }
        if !(self.tol > 1.0) {
            return Err(Error::InvalidArgument(format!(
                "adaptive tolerance must exceed 1, got {}",
                self.tol
            )));
        }
        Ok(max_rank)
    }
}

/// Distance from `x` to the next larger float, the usual `eps(x)`.
pub(crate) fn ulp(x: f64) -> f64 {
    let x = x.abs();
    f64::from_bits(x.to_bits() + 1) - x
}

/// Power-iteration estimate of `‖Y‖₂` from the small Gram matrix `YᵀY`.
fn spectral_norm_estimate(y: &DMatrix<f64>, rng: &mut SolverRng) -> f64 {
    if y.ncols() == 0 {
        return 0.0;
    }
    let gram = y.transpose() * y;
    let mut v = rng::gaussian_vector(rng, y.ncols());
    v /= v.norm();
    let mut lambda = 0.0;
    for _ in 0..POWER_STEPS {
        let w = &gram * &v;
        lambda = w.norm();
        if lambda == 0.0 {
            break;
        }
        v = w / lambda;
    }
    lambda.sqrt()
}

fn orthonormalize(m: DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let qr = m.qr();
    (qr.q(), qr.r())
}

fn sketch_columns(h: &dyn SymmetricOperator, omega: &DMatrix<f64>) -> DMatrix<f64> {
    let mut y = DMatrix::zeros(omega.nrows(), omega.ncols());
    for (j, col) in omega.column_iter().enumerate() {
        y.set_column(j, &h.apply(&col.into_owned()));
    }
    y
}

/// Eigenpairs from an orthonormal test matrix and its sketch, with shift `ν`.
fn factor_sketch(omega: &DMatrix<f64>, y: &DMatrix<f64>, nu: f64) -> Result<NystromApproximation> {
    let s = omega.ncols();
    if nu == 0.0 {
        // Y = 0 up to the norm estimate, so H vanishes on range(Ω).
        return Ok(NystromApproximation {
            u: omega.clone(),
            eigs: DVector::zeros(s),
            shift_used: 0.0,
            capped: false,
        });
    }
    let mut shift = nu;
    for attempt in 0..2 {
        let y_nu = y + omega * shift;
        let core = omega.transpose() * &y_nu;
        let core = (&core + core.transpose()) * 0.5;
        if let Some(chol) = core.cholesky() {
            // B = Y_ν L⁻ᵀ, i.e. Bᵀ = L⁻¹ Y_νᵀ.
            let bt = chol
                .l_dirty()
                .solve_lower_triangular(&y_nu.transpose())
                .ok_or(Error::Cholesky { shift })?;
            let b = bt.transpose();
            let svd = b.svd(true, false);
            let u_full = svd.u.ok_or(Error::Cholesky { shift })?;
            let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
            order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
            let u = DMatrix::from_fn(u_full.nrows(), s, |r, c| u_full[(r, order[c])]);
            let eigs = DVector::from_fn(s, |i, _| {
                let sigma = svd.singular_values[order[i]];
                (sigma * sigma - shift).max(0.0)
            });
            return Ok(NystromApproximation {
                u,
                eigs,
                shift_used: shift,
                capped: false,
            });
        }
        if attempt == 0 {
            shift *= CHOLESKY_RETRY_FACTOR;
        }
    }
    Err(Error::Cholesky { shift })
}

/// Fixed-rank Nyström approximation with `cfg.sketch_size` matvecs.
pub fn rand_nystrom_approx(
    h: &dyn SymmetricOperator,
    cfg: &SketchConfig,
) -> Result<NystromApproximation> {
    let d = h.dim();
    if cfg.sketch_size == 0 || cfg.sketch_size > d {
        return Err(Error::InvalidArgument(format!(
            "sketch size must satisfy 1 ≤ s ≤ d = {d}, got {}",
            cfg.sketch_size
        )));
    }
    let mut rng = rng::seeded(cfg.seed);
    let (omega, _) = orthonormalize(rng::gaussian_matrix(&mut rng, d, cfg.sketch_size));
    let y = sketch_columns(h, &omega);
    let nu = ulp(spectral_norm_estimate(&y, &mut rng));
    factor_sketch(&omega, &y, nu_or_zero(nu, &y))
}

fn nu_or_zero(nu: f64, y: &DMatrix<f64>) -> f64 {
    if y.iter().all(|&v| v == 0.0) {
        0.0
    } else {
        nu
    }
}

/// Doubles the sketch until `(λ̂ₛ + ρ)/ρ ≤ tol` or the rank cap is hit.
///
/// Earlier sketch columns are kept; each round only sketches the new block.
/// After appending, the combined test matrix is re-orthonormalized
/// (`Ω = QR`) and the sketch is mapped along with it (`HQ = Y R⁻¹`), which
/// costs no extra matvecs.
pub fn adaptive_nystrom_approx(
    h: &dyn SymmetricOperator,
    cfg: &AdaptiveConfig,
) -> Result<NystromApproximation> {
    let d = h.dim();
    let max_rank = cfg.validate(d)?;
    let mut rng = rng::seeded(cfg.seed);
    let shift_scale = (d as f64).sqrt();

    let mut omega = DMatrix::<f64>::zeros(d, 0);
    let mut y = DMatrix::<f64>::zeros(d, 0);
    let mut block = cfg.initial_rank;
    loop {
        let (fresh, _) = orthonormalize(rng::gaussian_matrix(&mut rng, d, block));
        let fresh_y = sketch_columns(h, &fresh);
        let total = omega.ncols() + block;
        omega = append_columns(&omega, &fresh);
        y = append_columns(&y, &fresh_y);

        let (q, r) = orthonormalize(omega);
        // Y R⁻¹: solve Rᵀ Xᵀ = Yᵀ.
        y = r
            .transpose()
            .solve_lower_triangular(&y.transpose())
            .ok_or_else(|| Error::InvalidArgument("appended sketch block is rank deficient".into()))?
            .transpose();
        omega = q;

        let nu = shift_scale * ulp(spectral_norm_estimate(&y, &mut rng));
        let mut approx = factor_sketch(&omega, &y, nu_or_zero(nu, &y))?;
        let ratio = (approx.last_eig() + cfg.rho) / cfg.rho;
        if ratio <= cfg.tol {
            return Ok(approx);
        }
        if total >= max_rank {
            approx.capped = true;
            return Ok(approx);
        }
        block = if 2 * total > max_rank {
            max_rank - total
        } else {
            total
        };
    }
}

fn append_columns(left: &DMatrix<f64>, right: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(left.nrows(), left.ncols() + right.ncols());
    out.columns_mut(0, left.ncols()).copy_from(left);
    out.columns_mut(left.ncols(), right.ncols()).copy_from(right);
    out
}

/// `Σ λᵢ / (λᵢ + ρ)`.
pub fn effective_dimension(eigenvalues: &[f64], rho: f64) -> f64 {
    debug_assert!(rho > 0.0);
    eigenvalues.iter().map(|&l| l / (l + rho)).sum()
}

/// Sketch size that guarantees a preconditioned condition number ≤ 8 with
/// probability `1 - delta`: `⌈8(√d_eff + √(8 ln(16/δ)))²⌉`.
pub fn theoretical_sketch_size(deff: f64, delta: f64) -> Result<usize> {
    if !(deff >= 0.0) || !deff.is_finite() {
        return Err(Error::InvalidArgument(format!("effective dimension must be ≥ 0, got {deff}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!("delta must lie in (0, 1), got {delta}")));
    }
    let root = deff.sqrt() + (8.0 * (16.0 / delta).ln()).sqrt();
    Ok((8.0 * root * root).ceil() as usize)
}
