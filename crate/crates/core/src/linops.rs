//! Symmetric psd operators and the dense feature transforms that feed them.
//!
//! Every operator owns its data and only exposes a matvec. Matvecs are
//! parallelized with rayon, but each output entry is always accumulated in
//! the same order, so results do not depend on the thread count.

use std::f64::consts::PI;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::RngExt;
use rayon::prelude::*;

use crate::error::{check_dim, Error, Result};
use crate::rng;

pub type Vector = DVector<f64>;

const ROW_CHUNK: usize = 256;
const MIN_COLS_PER_TASK: usize = 32;

/// Dense matrix with column-major storage and finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix(DMatrix<f64>);

impl DenseMatrix {
    pub fn from_matrix(m: DMatrix<f64>) -> Result<Self> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("matrix entries"));
        }
        Ok(Self(m))
    }

    pub fn from_column_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        check_dim("matrix entry count", rows * cols, data.len())?;
        Self::from_matrix(DMatrix::from_vec(rows, cols, data))
    }

    pub fn from_row_major(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        check_dim("matrix entry count", rows * cols, data.len())?;
        Self::from_matrix(DMatrix::from_row_slice(rows, cols, data))
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn column_major(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.0.row(i).iter().copied().collect()
    }
}

/// `A v` with a fixed per-entry summation order.
pub fn mat_vec(a: &DMatrix<f64>, v: &Vector) -> Vector {
    assert_eq!(a.ncols(), v.len(), "mat_vec dimension mismatch");
    let rows = a.nrows();
    let data = a.as_slice();
    let mut out = Vector::zeros(rows);
    out.as_mut_slice()
        .par_chunks_mut(ROW_CHUNK)
        .enumerate()
        .for_each(|(chunk, out)| {
            let r0 = chunk * ROW_CHUNK;
            for (j, &vj) in v.iter().enumerate() {
                if vj == 0.0 {
                    continue;
                }
                let col = &data[j * rows + r0..j * rows + r0 + out.len()];
                for (o, &c) in out.iter_mut().zip(col) {
                    *o += vj * c;
                }
            }
        });
    out
}

/// `Aᵀ t`, one sequential dot product per output entry.
pub fn mat_t_vec(a: &DMatrix<f64>, t: &Vector) -> Vector {
    assert_eq!(a.nrows(), t.len(), "mat_t_vec dimension mismatch");
    let rows = a.nrows();
    let data = a.as_slice();
    let t = t.as_slice();
    let out: Vec<f64> = (0..a.ncols())
        .into_par_iter()
        .with_min_len(MIN_COLS_PER_TASK)
        .map(|j| {
            data[j * rows..(j + 1) * rows]
                .iter()
                .zip(t)
                .map(|(a, b)| a * b)
                .sum()
        })
        .collect();
    Vector::from_vec(out)
}

/// A symmetric positive semidefinite linear map on `R^dim`.
pub trait SymmetricOperator: Send + Sync {
    fn dim(&self) -> usize;

    /// Panics if `v.len() != self.dim()`.
    fn apply(&self, v: &Vector) -> Vector;

    /// Materialize by applying to the identity columns. Test and diagnostic use only.
    fn to_dense(&self) -> DMatrix<f64> {
        let d = self.dim();
        let mut m = DMatrix::zeros(d, d);
        for j in 0..d {
            let mut e = Vector::zeros(d);
            e[j] = 1.0;
            m.set_column(j, &self.apply(&e));
        }
        m
    }
}

pub type SharedOperator = Arc<dyn SymmetricOperator>;

impl<T: SymmetricOperator + ?Sized> SymmetricOperator for Arc<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn apply(&self, v: &Vector) -> Vector {
        (**self).apply(v)
    }
}

/// `v ↦ Aᵀ(w ⊙ (A v)) + h ⊙ v`, never forming `AᵀA`.
#[derive(Debug, Clone)]
pub struct GramOperator {
    a: DMatrix<f64>,
    weights: Option<Vector>,
    hg_diag: Option<Vector>,
}

impl SymmetricOperator for GramOperator {
    fn dim(&self) -> usize {
        self.a.ncols()
    }

    fn apply(&self, v: &Vector) -> Vector {
        let mut t = mat_vec(&self.a, v);
        if let Some(w) = &self.weights {
            t.component_mul_assign(w);
        }
        let mut out = mat_t_vec(&self.a, &t);
        if let Some(h) = &self.hg_diag {
            out += h.component_mul(v);
        }
        out
    }
}

pub fn gram_operator(
    a: &DenseMatrix,
    weights: Option<&Vector>,
    hg_diag: Option<&Vector>,
) -> Result<GramOperator> {
    if let Some(w) = weights {
        check_dim("gram weights (rows of A)", a.rows(), w.len())?;
        if w.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
            return Err(Error::InvalidArgument(
                "gram weights must be finite and nonnegative".into(),
            ));
        }
    }
    if let Some(h) = hg_diag {
        check_dim("gram diagonal (columns of A)", a.cols(), h.len())?;
        if h.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
            return Err(Error::InvalidArgument(
                "gram diagonal must be finite and nonnegative".into(),
            ));
        }
    }
    Ok(GramOperator {
        a: a.as_matrix().clone(),
        weights: weights.cloned(),
        hg_diag: hg_diag.cloned(),
    })
}

/// An explicit symmetric matrix used as an operator.
#[derive(Debug, Clone)]
pub struct DenseOperator {
    m: DMatrix<f64>,
}

impl DenseOperator {
    /// Rejects non-square or visibly asymmetric input (relative tolerance 1e-10).
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        check_dim("operator columns", m.nrows(), m.ncols())?;
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("operator entries"));
        }
        let scale = m.amax().max(f64::MIN_POSITIVE);
        if (&m - m.transpose()).amax() > 1e-10 * scale {
            return Err(Error::InvalidArgument("operator matrix is not symmetric".into()));
        }
        Ok(Self { m })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }
}

impl SymmetricOperator for DenseOperator {
    fn dim(&self) -> usize {
        self.m.nrows()
    }
    fn apply(&self, v: &Vector) -> Vector {
        mat_vec(&self.m, v)
    }
}

/// `v ↦ b ⊙ (K (b ⊙ v))`.
#[derive(Debug, Clone)]
pub struct SvmOperator {
    k: DMatrix<f64>,
    labels: Vector,
}

impl SymmetricOperator for SvmOperator {
    fn dim(&self) -> usize {
        self.k.nrows()
    }
    fn apply(&self, v: &Vector) -> Vector {
        let bv = v.component_mul(&self.labels);
        mat_vec(&self.k, &bv).component_mul(&self.labels)
    }
}

pub(crate) fn check_pm_one_labels(b: &Vector) -> Result<()> {
    if let Some((i, v)) = b.iter().enumerate().find(|(_, &v)| v != 1.0 && v != -1.0) {
        return Err(Error::InvalidArgument(format!(
            "label {v} at index {i} is not in {{-1, +1}}"
        )));
    }
    Ok(())
}

pub fn svm_operator(k: &DenseMatrix, b: &Vector) -> Result<SvmOperator> {
    check_dim("kernel matrix columns", k.rows(), k.cols())?;
    check_dim("svm labels", k.rows(), b.len())?;
    check_pm_one_labels(b)?;
    Ok(SvmOperator {
        k: k.as_matrix().clone(),
        labels: b.clone(),
    })
}

/// Counts matvecs. Used to verify sketch reuse.
pub struct CountingOperator<O> {
    inner: O,
    count: AtomicUsize,
}

impl<O: SymmetricOperator> CountingOperator<O> {
    pub fn new(inner: O) -> Self {
        Self {
            inner,
            count: AtomicUsize::new(0),
        }
    }

    pub fn count(&self) -> usize {
        self.count.load(Ordering::Relaxed)
    }

    pub fn reset(&self) {
        self.count.store(0, Ordering::Relaxed);
    }
}

impl<O: SymmetricOperator> SymmetricOperator for CountingOperator<O> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn apply(&self, v: &Vector) -> Vector {
        self.count.fetch_add(1, Ordering::Relaxed);
        self.inner.apply(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Rbf,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct KernelConfig {
    pub kind: KernelKind,
    pub bandwidth: f64,
}

impl KernelConfig {
    pub fn rbf(bandwidth: f64) -> Result<Self> {
        let cfg = Self {
            kind: KernelKind::Rbf,
            bandwidth,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth > 0.0 && self.bandwidth.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "kernel bandwidth must be positive, got {}",
                self.bandwidth
            )));
        }
        Ok(())
    }
}

/// RBF kernel matrix over the rows of `a`: `exp(-‖aᵢ-aⱼ‖² / (2 h²))`.
pub fn kernel_matrix(a: &DenseMatrix, cfg: &KernelConfig) -> Result<DenseMatrix> {
    cfg.validate()?;
    let m = a.as_matrix();
    let n = m.nrows();
    let scale = 1.0 / (2.0 * cfg.bandwidth * cfg.bandwidth);
    let mut k = DMatrix::from_element(n, n, 1.0);
    for i in 0..n {
        for j in 0..i {
            let dist2: f64 = m
                .row(i)
                .iter()
                .zip(m.row(j).iter())
                .map(|(x, y)| (x - y) * (x - y))
                .sum();
            let v = (-dist2 * scale).exp();
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    DenseMatrix::from_matrix(k)
}

/// Random Fourier features for the RBF kernel:
/// `Φᵢⱼ = √(2/D) cos(⟨ωⱼ, aᵢ⟩ + βⱼ)` with `ω ~ N(0, I/h²)` and `β ~ U[0, 2π)`.
pub fn random_features(
    a: &DenseMatrix,
    target_dim: usize,
    cfg: &KernelConfig,
    seed: u64,
) -> Result<DenseMatrix> {
    cfg.validate()?;
    if target_dim == 0 {
        return Err(Error::InvalidArgument("random feature dimension must be ≥ 1".into()));
    }
    let mut rng = rng::seeded(seed);
    let omega = rng::gaussian_matrix(&mut rng, a.cols(), target_dim) / cfg.bandwidth;
    let phase: Vec<f64> = (0..target_dim)
        .map(|_| rng.random_range(0.0..2.0 * PI))
        .collect();
    let amp = (2.0 / target_dim as f64).sqrt();
    let mut proj = a.as_matrix() * omega;
    for (j, mut col) in proj.column_iter_mut().enumerate() {
        col.apply(|x| *x = amp * (*x + phase[j]).cos());
    }
    DenseMatrix::from_matrix(proj)
}

/// Worst-case symmetry and psd violations over random probes.
#[derive(Debug, Clone, Copy)]
pub struct ProbeReport {
    /// max |⟨u,Hv⟩ − ⟨Hu,v⟩| / (‖u‖‖Hv‖ + ‖Hu‖‖v‖)
    pub max_asymmetry: f64,
    /// min ⟨v,Hv⟩ / ‖v‖²
    pub min_quadratic: f64,
}

impl ProbeReport {
    pub fn passes(&self) -> bool {
        self.max_asymmetry <= 1e-8 && self.min_quadratic >= -1e-10
    }
}

pub fn probe_symmetric_psd(op: &dyn SymmetricOperator, probes: usize, seed: u64) -> ProbeReport {
    let mut rng = rng::seeded(seed);
    let d = op.dim();
    let mut report = ProbeReport {
        max_asymmetry: 0.0,
        min_quadratic: f64::INFINITY,
    };
    for _ in 0..probes {
        let u = rng::gaussian_vector(&mut rng, d);
        let v = rng::gaussian_vector(&mut rng, d);
        let hu = op.apply(&u);
        let hv = op.apply(&v);
        let denom = u.norm() * hv.norm() + hu.norm() * v.norm();
        if denom > 0.0 {
            let asym = (u.dot(&hv) - hu.dot(&v)).abs() / denom;
            report.max_asymmetry = report.max_asymmetry.max(asym);
        }
        report.min_quadratic = report.min_quadratic.min(v.dot(&hv) / v.norm_squared());
    }
    report
}
