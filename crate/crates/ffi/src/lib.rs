//! C ABI over the `nysadmm` solvers.
//!
//! Fallible functions return a [`NysadmmStatus`]. On failure a description is
//! available from [`nysadmm_last_error_message`] on the calling thread until
//! the next failure there. Handles are opaque; release each with its `_free`
//! function. Matrices are passed row-major.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use nalgebra::DMatrix;
use nysadmm::admm::{solve, AdmmConfig, ProblemSpec, SolveReport, StoppingRule, ToleranceSchedule};
use nysadmm::linops::DenseOperator;
use nysadmm::nystrom::{rand_nystrom_approx, SketchConfig};
use nysadmm::precond::{build_preconditioner, NystromPreconditioner};
use nysadmm::problems::{elastic_net_spec, logistic_spec, svm_spec, ElasticNetProblem, LogisticProblem, SvmProblem};
use nysadmm::{DenseMatrix, Error, Vector};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NysadmmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    Numerical = 4,
    Io = 5,
    Panic = 6,
}

/// Values for [`NysadmmConfig::schedule`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NysadmmSchedule {
    GeometricMean = 0,
    PowerDecay = 1,
}

/// Solver settings. Start from [`nysadmm_config_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NysadmmConfig {
    pub rho: f64,
    pub eps_abs: f64,
    pub eps_rel: f64,
    pub max_admm_iters: usize,
    pub sketch_size: usize,
    pub adaptive: bool,
    pub adaptive_tol: f64,
    pub seed: u64,
    /// A [`NysadmmSchedule`] value.
    pub schedule: u32,
    /// Exponent of the power-decay schedule.
    pub beta: f64,
    /// Rebuild the preconditioner every this many iterations; negative defers
    /// to the problem (logistic rebuilds every iteration, others never).
    pub refresh_interval: i64,
    pub pcg_max_iters: usize,
    /// When positive, stop on `max|Δz| / max|z|` below this instead of residuals.
    pub relative_change_tol: f64,
}

pub struct NysadmmProblem {
    spec: Box<dyn ProblemSpec>,
}

pub struct NysadmmResult {
    report: SolveReport,
}

pub struct NysadmmPreconditioner {
    inner: NystromPreconditioner,
}

struct Failure {
    status: NysadmmStatus,
    message: String,
}

impl Failure {
    fn new(status: NysadmmStatus, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::DimensionMismatch { .. } => NysadmmStatus::DimensionMismatch,
            Error::InvalidArgument(_) | Error::Parse { .. } => NysadmmStatus::InvalidArgument,
            Error::NonFinite(_) | Error::Cholesky { .. } | Error::NumericalBreakdown { .. } => {
                NysadmmStatus::Numerical
            }
            Error::Io(_) => NysadmmStatus::Io,
        };
        Failure::new(status, e.to_string())
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: &str) {
    let text = CString::new(message.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(text));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> NysadmmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => NysadmmStatus::Ok,
        Ok(Err(failure)) => {
            set_last_error(&failure.message);
            failure.status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(&format!("panic: {msg}"));
            NysadmmStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure::new(NysadmmStatus::NullPointer, format!("{what} is null"))
}

unsafe fn input<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    // SAFETY: caller guarantees `p` points to `len` readable doubles.
    Ok(unsafe { slice::from_raw_parts(p, len) })
}

unsafe fn output<'a>(p: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    // SAFETY: caller guarantees `p` points to `len` writable doubles.
    Ok(unsafe { slice::from_raw_parts_mut(p, len) })
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    // SAFETY: non-null handles were produced by this library and not yet freed.
    unsafe { p.as_ref() }.ok_or_else(|| null(what))
}

unsafe fn store<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output handle pointer"));
    }
    // SAFETY: `out` is a valid place for one pointer.
    unsafe { *out = Box::into_raw(Box::new(value)) };
    Ok(())
}

fn checked_len(rows: usize, cols: usize) -> Result<usize, Failure> {
    rows.checked_mul(cols)
        .ok_or_else(|| Failure::new(NysadmmStatus::InvalidArgument, "matrix size overflows"))
}

unsafe fn matrix(p: *const f64, rows: usize, cols: usize, what: &str) -> Result<DenseMatrix, Failure> {
    let data = unsafe { input(p, checked_len(rows, cols)?, what)? };
    Ok(DenseMatrix::from_row_major(rows, cols, data)?)
}

unsafe fn vector(p: *const f64, len: usize, what: &str) -> Result<Vector, Failure> {
    Ok(Vector::from_column_slice(unsafe { input(p, len, what)? }))
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn nysadmm_version() -> *const c_char {
    static VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(v) => v,
        Err(_) => panic!("version string"),
    };
    VERSION.as_ptr()
}

/// Message for the most recent failure on this thread, or null if none.
/// The pointer stays valid until the next failure on the same thread.
#[no_mangle]
pub extern "C" fn nysadmm_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

#[no_mangle]
pub extern "C" fn nysadmm_config_default() -> NysadmmConfig {
    let d = AdmmConfig::default();
    NysadmmConfig {
        rho: d.rho,
        eps_abs: d.eps_abs,
        eps_rel: d.eps_rel,
        max_admm_iters: d.max_admm_iters,
        sketch_size: d.sketch_size,
        adaptive: d.adaptive,
        adaptive_tol: d.adaptive_tol,
        seed: d.seed,
        schedule: NysadmmSchedule::GeometricMean as u32,
        beta: 2.0,
        refresh_interval: -1,
        pcg_max_iters: d.pcg_max_iters,
        relative_change_tol: 0.0,
    }
}

fn admm_config(c: &NysadmmConfig) -> Result<AdmmConfig, Failure> {
    let tolerance_schedule = match c.schedule {
        s if s == NysadmmSchedule::GeometricMean as u32 => ToleranceSchedule::GeometricMean,
        s if s == NysadmmSchedule::PowerDecay as u32 => ToleranceSchedule::PowerDecay { beta: c.beta },
        other => {
            return Err(Failure::new(
                NysadmmStatus::InvalidArgument,
                format!("unknown schedule {other}"),
            ))
        }
    };
    Ok(AdmmConfig {
        rho: c.rho,
        eps_abs: c.eps_abs,
        eps_rel: c.eps_rel,
        max_admm_iters: c.max_admm_iters,
        sketch_size: c.sketch_size,
        adaptive: c.adaptive,
        adaptive_tol: c.adaptive_tol,
        seed: c.seed,
        hessian_refresh_interval: usize::try_from(c.refresh_interval).ok(),
        tolerance_schedule,
        stopping: if c.relative_change_tol > 0.0 {
            StoppingRule::RelativeChange {
                tol: c.relative_change_tol,
            }
        } else {
            StoppingRule::Residuals
        },
        pcg_max_iters: c.pcg_max_iters,
        use_theory_cap: false,
    })
}

/// Elastic net `½‖Ax−b‖² + ½·ridge‖x‖² + l1‖x‖₁`; `ridge = 0` gives the lasso.
///
/// # Safety
/// `a` must hold `rows*cols` doubles, `b` must hold `rows`, and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nysadmm_problem_elastic_net(
    a: *const f64,
    rows: usize,
    cols: usize,
    b: *const f64,
    l1: f64,
    ridge: f64,
    out: *mut *mut NysadmmProblem,
) -> NysadmmStatus {
    guard(|| unsafe {
        let p = ElasticNetProblem::new(matrix(a, rows, cols, "a")?, vector(b, rows, "b")?, l1, ridge)?;
        store(out, NysadmmProblem {
            spec: Box::new(elastic_net_spec(p)?),
        })
    })
}

/// ℓ1-regularized logistic regression with labels in {0, 1}.
///
/// # Safety
/// `a` must hold `rows*cols` doubles, `b` must hold `rows`, and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nysadmm_problem_logistic(
    a: *const f64,
    rows: usize,
    cols: usize,
    b: *const f64,
    gamma: f64,
    out: *mut *mut NysadmmProblem,
) -> NysadmmStatus {
    guard(|| unsafe {
        let p = LogisticProblem::new(matrix(a, rows, cols, "a")?, vector(b, rows, "b")?, gamma)?;
        store(out, NysadmmProblem {
            spec: Box::new(logistic_spec(p)),
        })
    })
}

/// Dual SVM over an `n×n` psd kernel matrix with labels in {-1, +1}.
///
/// # Safety
/// `kernel` must hold `n*n` doubles, `labels` must hold `n`, and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nysadmm_problem_svm(
    kernel: *const f64,
    n: usize,
    labels: *const f64,
    c: f64,
    out: *mut *mut NysadmmProblem,
) -> NysadmmStatus {
    guard(|| unsafe {
        let p = SvmProblem::new(matrix(kernel, n, n, "kernel")?, vector(labels, n, "labels")?, c)?;
        store(out, NysadmmProblem {
            spec: Box::new(svm_spec(p)?),
        })
    })
}

/// Number of unknowns, or 0 for a null handle.
///
/// # Safety
/// `problem` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn nysadmm_problem_dim(problem: *const NysadmmProblem) -> usize {
    unsafe { problem.as_ref() }.map_or(0, |p| p.spec.dim())
}

/// # Safety
/// `problem` must be null or a live handle; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn nysadmm_problem_free(problem: *mut NysadmmProblem) {
    if !problem.is_null() {
        drop(unsafe { Box::from_raw(problem) });
    }
}

/// Runs the solver. Reaching the iteration limit is not an error; check
/// [`nysadmm_result_converged`].
///
/// # Safety
/// `problem` must be a live handle, `config` readable (or null for defaults),
/// and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn nysadmm_solve(
    problem: *const NysadmmProblem,
    config: *const NysadmmConfig,
    out: *mut *mut NysadmmResult,
) -> NysadmmStatus {
    guard(|| unsafe {
        let p = handle(problem, "problem")?;
        let cfg = match config.as_ref() {
            Some(c) => admm_config(c)?,
            None => admm_config(&nysadmm_config_default())?,
        };
        let report = solve(p.spec.as_ref(), &cfg, None)?;
        store(out, NysadmmResult { report })
    })
}

/// Length of the solution vector, or 0 for a null handle.
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn nysadmm_result_dim(result: *const NysadmmResult) -> usize {
    unsafe { result.as_ref() }.map_or(0, |r| r.report.solution.len())
}

/// Copies the solution into `out`, which must have exactly `len` entries.
///
/// # Safety
/// `result` must be a live handle and `out` must hold `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn nysadmm_result_solution(
    result: *const NysadmmResult,
    out: *mut f64,
    len: usize,
) -> NysadmmStatus {
    guard(|| unsafe {
        let r = handle(result, "result")?;
        let sol = &r.report.solution;
        if len != sol.len() {
            return Err(Failure::new(
                NysadmmStatus::DimensionMismatch,
                format!("solution has {} entries, buffer has {len}", sol.len()),
            ));
        }
        output(out, len, "out")?.copy_from_slice(sol.as_slice());
        Ok(())
    })
}

/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn nysadmm_result_iterations(result: *const NysadmmResult) -> usize {
    unsafe { result.as_ref() }.map_or(0, |r| r.report.iterations)
}

/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn nysadmm_result_converged(result: *const NysadmmResult) -> bool {
    unsafe { result.as_ref() }.is_some_and(|r| r.report.converged)
}

/// Objective at the solution; NaN for a null handle.
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn nysadmm_result_objective(result: *const NysadmmResult) -> f64 {
    unsafe { result.as_ref() }.map_or(f64::NAN, |r| r.report.objective)
}

/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn nysadmm_result_primal_residual(result: *const NysadmmResult) -> f64 {
    unsafe { result.as_ref() }.map_or(f64::NAN, |r| r.report.primal_residual)
}

/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn nysadmm_result_dual_residual(result: *const NysadmmResult) -> f64 {
    unsafe { result.as_ref() }.map_or(f64::NAN, |r| r.report.dual_residual)
}

/// # Safety
/// `result` must be null or a live handle; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn nysadmm_result_free(result: *mut NysadmmResult) {
    if !result.is_null() {
        drop(unsafe { Box::from_raw(result) });
    }
}

/// Builds a rank-`sketch_size` Nyström preconditioner for `H + ρI` from a
/// symmetric psd `d×d` matrix.
///
/// # Safety
/// `h` must hold `d*d` doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nysadmm_preconditioner_build(
    h: *const f64,
    d: usize,
    sketch_size: usize,
    rho: f64,
    seed: u64,
    out: *mut *mut NysadmmPreconditioner,
) -> NysadmmStatus {
    guard(|| unsafe {
        let data = input(h, checked_len(d, d)?, "h")?;
        let op = DenseOperator::new(DMatrix::from_row_slice(d, d, data))?;
        let approx = rand_nystrom_approx(&op, &SketchConfig { sketch_size, seed })?;
        store(out, NysadmmPreconditioner {
            inner: build_preconditioner(approx, rho)?,
        })
    })
}

/// Writes `P⁻¹v` into `out`; both buffers have `len` entries and may not overlap.
///
/// # Safety
/// `precond` must be a live handle, `v` readable and `out` writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn nysadmm_preconditioner_apply_inverse(
    precond: *const NysadmmPreconditioner,
    v: *const f64,
    out: *mut f64,
    len: usize,
) -> NysadmmStatus {
    guard(|| unsafe {
        let p = handle(precond, "preconditioner")?;
        let d = p.inner.basis().nrows();
        if len != d {
            return Err(Failure::new(
                NysadmmStatus::DimensionMismatch,
                format!("preconditioner dimension is {d}, buffers have {len}"),
            ));
        }
        let result = nysadmm::precond::apply_inverse(&p.inner, &vector(v, len, "v")?);
        output(out, len, "out")?.copy_from_slice(result.as_slice());
        Ok(())
    })
}

/// `(λ̂ₛ + ρ)/ρ`; NaN for a null handle.
///
/// # Safety
/// `precond` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn nysadmm_preconditioner_condition_number(precond: *const NysadmmPreconditioner) -> f64 {
    unsafe { precond.as_ref() }.map_or(f64::NAN, |p| p.inner.empirical_condition_number())
}

/// # Safety
/// `precond` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn nysadmm_preconditioner_rank(precond: *const NysadmmPreconditioner) -> usize {
    unsafe { precond.as_ref() }.map_or(0, |p| p.inner.rank())
}

/// # Safety
/// `precond` must be null or a live handle; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn nysadmm_preconditioner_free(precond: *mut NysadmmPreconditioner) {
    if !precond.is_null() {
        drop(unsafe { Box::from_raw(precond) });
    }
}
