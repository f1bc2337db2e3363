//! Inexact linearized ADMM with Nyström-preconditioned subproblem solves.
//!
//! Each iteration linearizes the smooth part of the objective around the
//! current `x̃ᵏ`, solves
//!
//! ```text
//! (AᵀHˡA + Hᵍ + ρI) x = rᵏ
//! ```
//!
//! with PCG to tolerance `εᵏ`, then applies the closed-form z-step and the
//! scaled dual update. The preconditioner is built once for constant-Hessian
//! problems and periodically rebuilt otherwise.

use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linops::{CountingOperator, SharedOperator, SymmetricOperator, Vector};
use crate::nystrom::{adaptive_nystrom_approx, rand_nystrom_approx, AdaptiveConfig, SketchConfig};
use crate::pcg::{nystrom_pcg, PcgConfig, PcgReport};
use crate::precond::{build_preconditioner, NystromPreconditioner};

const TOL_FLOOR: f64 = 1e-12;

/// The loss/regularizer triple seen through the pieces ADMM needs.
pub trait ProblemSpec: Send + Sync {
    fn dim(&self) -> usize;

    /// `AᵀHˡ(Ax̃)A + Hᵍ(x̃)` at the linearization point.
    fn operator(&self, x: &Vector) -> Result<SharedOperator>;

    /// `ρz − ρu + (AᵀHˡA + Hᵍ)x̃ − Aᵀ∇ℓ − ∇g`.
    fn rhs(&self, x: &Vector, z: &Vector, u: &Vector, rho: f64) -> Vector;

    /// `argmin_z h(z) + (ρ/2)‖v − z‖²`.
    fn z_step(&self, v: &Vector, rho: f64) -> Result<Vector>;

    fn objective(&self, x: &Vector) -> f64;

    fn kkt_metric(&self, _x: &Vector) -> Option<f64> {
        None
    }

    /// Rebuild period used when the config leaves it unset; 0 means never.
    fn default_refresh_interval(&self) -> usize {
        0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ToleranceSchedule {
    /// `εᵏ⁺¹ = √(r_pᵏ r_dᵏ)`.
    GeometricMean,
    /// `εᵏ = ‖rᵏ‖₂ / k^β`.
    PowerDecay { beta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StoppingRule {
    /// Primal and dual residual tests with `eps_abs` / `eps_rel`.
    Residuals,
    /// `max|Δz| / max|z| ≤ tol` between consecutive iterates.
    RelativeChange { tol: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmmConfig {
    pub rho: f64,
    pub eps_abs: f64,
    pub eps_rel: f64,
    pub max_admm_iters: usize,
    pub sketch_size: usize,
    pub adaptive: bool,
    /// Threshold on `(λ̂ₛ + ρ)/ρ` for the adaptive sketch.
    pub adaptive_tol: f64,
    pub seed: u64,
    /// `None` defers to the problem; `Some(0)` never rebuilds.
    pub hessian_refresh_interval: Option<usize>,
    pub tolerance_schedule: ToleranceSchedule,
    pub stopping: StoppingRule,
    pub pcg_max_iters: usize,
    /// Cap PCG at `4 + ⌈2 ln(R/(εᵏρ))⌉` iterations, `R` the running max of `‖rᵏ‖`.
    pub use_theory_cap: bool,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        Self {
            rho: 1.0,
            eps_abs: 1e-4,
            eps_rel: 1e-3,
            max_admm_iters: 500,
            sketch_size: 50,
            adaptive: false,
            adaptive_tol: 10.0,
            seed: 0,
            hessian_refresh_interval: None,
            tolerance_schedule: ToleranceSchedule::GeometricMean,
            stopping: StoppingRule::Residuals,
            pcg_max_iters: 500,
            use_theory_cap: false,
        }
    }
}

impl AdmmConfig {
    fn validate(&self) -> Result<()> {
        let positive = [
            ("rho", self.rho),
            ("eps_abs", self.eps_abs),
            ("eps_rel", self.eps_rel),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        if self.sketch_size == 0 || self.max_admm_iters == 0 || self.pcg_max_iters == 0 {
            return Err(Error::InvalidArgument(
                "sketch size and iteration limits must be ≥ 1".into(),
            ));
        }
        if self.adaptive && !(self.adaptive_tol > 1.0) {
            return Err(Error::InvalidArgument(format!(
                "adaptive tolerance must exceed 1, got {}",
                self.adaptive_tol
            )));
        }
        if let ToleranceSchedule::PowerDecay { beta } = self.tolerance_schedule {
            if !(beta > 0.0) {
                return Err(Error::InvalidArgument(format!("beta must be positive, got {beta}")));
            }
        }
        if let StoppingRule::RelativeChange { tol } = self.stopping {
            if !(tol > 0.0) {
                return Err(Error::InvalidArgument(format!("relative-change tolerance must be positive, got {tol}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmmState {
    pub x: Vector,
    pub z: Vector,
    pub u: Vector,
    pub k: usize,
    pub primal_residual_history: Vec<f64>,
    pub dual_residual_history: Vec<f64>,
    pub subproblem_tol_history: Vec<f64>,
    pub pcg_iteration_counts: Vec<usize>,
}

impl AdmmState {
    pub fn zeros(d: usize) -> Self {
        Self::from_iterates(Vector::zeros(d), Vector::zeros(d), Vector::zeros(d))
    }

    pub fn from_iterates(x: Vector, z: Vector, u: Vector) -> Self {
        Self {
            x,
            z,
            u,
            k: 0,
            primal_residual_history: Vec::new(),
            dual_residual_history: Vec::new(),
            subproblem_tol_history: Vec::new(),
            pcg_iteration_counts: Vec::new(),
        }
    }
}

/// `(‖x̃ − z̃‖, ‖ρ(z̃_prev − z̃)‖)` for the iterates held in `state`.
pub fn residuals(state: &AdmmState, z_prev: &Vector, rho: f64) -> (f64, f64) {
    let r_p = (&state.x - &state.z).norm();
    let r_d = rho * (z_prev - &state.z).norm();
    (r_p, r_d)
}

fn primal_threshold(state: &AdmmState, cfg: &AdmmConfig) -> f64 {
    cfg.eps_abs + cfg.eps_rel * state.x.norm().max(state.z.norm())
}

pub fn stopping_check(r_p: f64, r_d: f64, state: &AdmmState, cfg: &AdmmConfig) -> bool {
    let primal_tol = primal_threshold(state, cfg);
    let dual_tol = cfg.eps_abs + cfg.eps_rel * cfg.rho * state.u.norm();
    r_p <= primal_tol && r_d <= dual_tol
}

/// Subproblem tolerance for ADMM iteration `k ≥ 1`.
///
/// The geometric mean is floored at 1e-12 and capped at `initial_tol`. The
/// power schedule is returned as is.
pub fn next_subproblem_tol(
    r_p: f64,
    r_d: f64,
    schedule: ToleranceSchedule,
    k: usize,
    rhs_norm: f64,
    initial_tol: f64,
) -> f64 {
    match schedule {
        ToleranceSchedule::GeometricMean => (r_p * r_d).sqrt().max(TOL_FLOOR).min(initial_tol),
        ToleranceSchedule::PowerDecay { beta } => rhs_norm / (k.max(1) as f64).powf(beta),
    }
}

/// `4 + ⌈2 ln(R / (εᵏρ))⌉`, at least 1.
pub fn theory_pcg_cap(r_bound: f64, eps_k: f64, rho: f64) -> usize {
    let t = 4.0 + (2.0 * (r_bound / (eps_k * rho)).ln()).ceil();
    if t.is_finite() {
        t.max(1.0) as usize
    } else if t > 0.0 {
        usize::MAX
    } else {
        1
    }
}

/// One subproblem solve, handed to [`solve_observed`] callbacks.
pub struct IterationEvent<'a> {
    /// Zero-based ADMM iteration.
    pub k: usize,
    pub operator: &'a dyn SymmetricOperator,
    pub rho: f64,
    pub rhs: &'a Vector,
    pub x_prev: &'a Vector,
    pub x_new: &'a Vector,
    pub eps_k: f64,
    pub pcg: &'a PcgReport,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    /// The z-iterate, which satisfies the nonsmooth term's structure exactly.
    pub solution: Vector,
    pub state: AdmmState,
    pub iterations: usize,
    pub converged: bool,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub objective: f64,
    pub kkt: Option<f64>,
    pub total_matvecs: usize,
    pub sketch_matvecs: usize,
    pub preconditioner_builds: usize,
    pub sketch_size_used: usize,
    pub empirical_condition_number: f64,
    pub preconditioner_capped: bool,
    pub wall_time_ms: f64,
}

pub fn solve(problem: &dyn ProblemSpec, cfg: &AdmmConfig, initial: Option<AdmmState>) -> Result<SolveReport> {
    solve_observed(problem, cfg, initial, &mut |_| {})
}

struct Preconditioned {
    op: Arc<CountingOperator<SharedOperator>>,
    precond: NystromPreconditioner,
    sketch_matvecs: usize,
    capped: bool,
}

fn prepare(problem: &dyn ProblemSpec, x: &Vector, cfg: &AdmmConfig, sketch: usize) -> Result<Preconditioned> {
    let op = Arc::new(CountingOperator::new(problem.operator(x)?));
    check_dim("problem operator", problem.dim(), op.dim())?;
    let approx = if cfg.adaptive {
        let acfg = AdaptiveConfig {
            initial_rank: sketch,
            max_rank: None,
            rho: cfg.rho,
            tol: cfg.adaptive_tol,
            seed: cfg.seed,
        };
        adaptive_nystrom_approx(op.as_ref(), &acfg)?
    } else {
        rand_nystrom_approx(op.as_ref(), &SketchConfig { sketch_size: sketch, seed: cfg.seed })?
    };
    let sketch_matvecs = op.count();
    let capped = approx.capped;
    Ok(Preconditioned {
        op,
        precond: build_preconditioner(approx, cfg.rho)?,
        sketch_matvecs,
        capped,
    })
}

/// Runs ADMM, reporting every subproblem solve to `observer`.
pub fn solve_observed(
    problem: &dyn ProblemSpec,
    cfg: &AdmmConfig,
    initial: Option<AdmmState>,
    observer: &mut dyn FnMut(&IterationEvent<'_>),
) -> Result<SolveReport> {
    cfg.validate()?;
    let started = Instant::now();
    let d = problem.dim();
    let mut state = initial.unwrap_or_else(|| AdmmState::zeros(d));
    check_dim("initial x", d, state.x.len())?;
    check_dim("initial z", d, state.z.len())?;
    check_dim("initial u", d, state.u.len())?;

    let rho = cfg.rho;
    let sketch = cfg.sketch_size.min(d);
    let refresh = cfg
        .hessian_refresh_interval
        .unwrap_or_else(|| problem.default_refresh_interval());

    let mut current = prepare(problem, &state.x, cfg, sketch)?;
    let mut retired_matvecs = 0;
    let mut sketch_matvecs = current.sketch_matvecs;
    let mut builds = 1;

    let mut initial_tol = f64::NAN;
    let mut rhs_bound: f64 = 0.0;
    let mut last = (f64::INFINITY, f64::INFINITY);
    let mut converged = false;

    for k in 0..cfg.max_admm_iters {
        if refresh > 0 && k > 0 && k % refresh == 0 {
            retired_matvecs += current.op.count();
            current = prepare(problem, &state.x, cfg, sketch)?;
            sketch_matvecs += current.sketch_matvecs;
            builds += 1;
        }

        let rhs = problem.rhs(&state.x, &state.z, &state.u, rho);
        let rhs_norm = rhs.norm();
        if !rhs_norm.is_finite() {
            return Err(Error::NonFinite("subproblem right-hand side"));
        }
        rhs_bound = rhs_bound.max(rhs_norm);
        let eps_k = if k == 0 {
            initial_tol = 1e-2 * (1.0 + rhs_norm);
            initial_tol
        } else {
            next_subproblem_tol(last.0, last.1, cfg.tolerance_schedule, k, rhs_norm, initial_tol)
                .min(initial_tol)
        };

        // ‖x − x⋆‖ ≤ ‖residual‖ / λ_min(H + ρI) ≤ ‖residual‖ / ρ.
        let pcg_cfg = PcgConfig {
            tol: eps_k * rho,
            max_iters: cfg.pcg_max_iters,
            theory_cap: cfg
                .use_theory_cap
                .then(|| theory_pcg_cap(rhs_bound, eps_k, rho)),
        };
        let report = nystrom_pcg(current.op.as_ref(), rho, &rhs, &state.x, &current.precond, &pcg_cfg)
            .map_err(|e| match e {
                Error::NumericalBreakdown { iteration, .. } => Error::NumericalBreakdown {
                    iteration,
                    admm_iteration: Some(k),
                },
                other => other,
            })?;
        observer(&IterationEvent {
            k,
            operator: current.op.as_ref(),
            rho,
            rhs: &rhs,
            x_prev: &state.x,
            x_new: &report.solution,
            eps_k,
            pcg: &report,
        });

        let x_new = report.solution;
        let z_new = problem.z_step(&(&x_new + &state.u), rho)?;
        let u_new = &state.u + (&x_new - &z_new);
        let z_prev = std::mem::replace(&mut state.z, z_new);
        state.x = x_new;
        state.u = u_new;
        state.k += 1;

        let (r_p, r_d) = residuals(&state, &z_prev, rho);
        state.primal_residual_history.push(r_p);
        state.dual_residual_history.push(r_d);
        state.subproblem_tol_history.push(eps_k);
        state.pcg_iteration_counts.push(report.iterations);
        last = (r_p, r_d);

        // A loose subproblem solve can leave every iterate untouched and the
        // residuals at zero; only accept a stop the solve was accurate enough for.
        converged = match cfg.stopping {
            StoppingRule::Residuals => {
                stopping_check(r_p, r_d, &state, cfg) && eps_k <= primal_threshold(&state, cfg)
            }
            StoppingRule::RelativeChange { tol } => {
                relative_change(&z_prev, &state.z) <= tol && eps_k <= tol * state.z.norm().max(cfg.eps_abs)
            }
        };
        if converged {
            break;
        }
    }

    let solution = state.z.clone();
    Ok(SolveReport {
        objective: problem.objective(&solution),
        kkt: problem.kkt_metric(&solution),
        iterations: state.k,
        converged,
        primal_residual: last.0,
        dual_residual: last.1,
        total_matvecs: retired_matvecs + current.op.count(),
        sketch_matvecs,
        preconditioner_builds: builds,
        sketch_size_used: current.precond.rank(),
        empirical_condition_number: current.precond.empirical_condition_number(),
        preconditioner_capped: current.capped,
        wall_time_ms: started.elapsed().as_secs_f64() * 1e3,
        solution,
        state,
    })
}

/// `max|new − old| / max|new|`, zero when both vanish.
fn relative_change(old: &Vector, new: &Vector) -> f64 {
    let change = (new - old).amax();
    let scale = new.amax();
    if change == 0.0 {
        0.0
    } else if scale == 0.0 {
        f64::INFINITY
    } else {
        change / scale
    }
}
