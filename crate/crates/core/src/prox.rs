//! Closed-form z-step maps.

use crate::error::{check_dim, Error, Result};
use crate::linops::{check_pm_one_labels, Vector};

/// `sign(vᵢ) · max(|vᵢ| − τ, 0)`, the minimizer of `τ‖z‖₁ + ½‖v − z‖²`.
pub fn soft_threshold(v: &Vector, tau: f64) -> Vector {
    debug_assert!(tau >= 0.0);
    v.map(|x| x.signum() * (x.abs() - tau).max(0.0))
}

/// `{z : zᵀb = 0, 0 ≤ z ≤ C}` for labels `b ∈ {−1, +1}ⁿ`.
#[derive(Debug, Clone)]
pub struct BoxHyperplaneSet {
    labels: Vector,
    c: f64,
}

impl BoxHyperplaneSet {
    pub fn new(labels: Vector, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidArgument(format!("box bound C must be positive, got {c}")));
        }
        check_pm_one_labels(&labels)?;
        Ok(Self { labels, c })
    }

    pub fn labels(&self) -> &Vector {
        &self.labels
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    fn clipped(&self, v: &Vector, mu: f64) -> Vector {
        Vector::from_fn(v.len(), |i, _| (v[i] - mu * self.labels[i]).clamp(0.0, self.c))
    }

    /// `bᵀ clip(v − μb, 0, C)`, nonincreasing in `μ`.
    fn balance(&self, v: &Vector, mu: f64) -> f64 {
        v.iter()
            .zip(self.labels.iter())
            .map(|(&vi, &bi)| bi * (vi - mu * bi).clamp(0.0, self.c))
            .sum()
    }
}

/// Euclidean projection onto the box-hyperplane set.
///
/// The projection is `clip(v − μb, 0, C)` for the multiplier `μ` solving
/// `bᵀ clip(v − μb, 0, C) = 0`. That balance is piecewise linear with kinks at
/// `μ = bᵢvᵢ` and `μ = bᵢ(vᵢ − C)`; a binary search over the sorted kinks finds
/// the segment holding the root, and linear interpolation finishes it.
pub fn project_box_hyperplane(v: &Vector, set: &BoxHyperplaneSet) -> Result<Vector> {
    check_dim("projection input", set.labels.len(), v.len())?;
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("projection input"));
    }
    if v.is_empty() {
        return Ok(Vector::zeros(0));
    }
    let mut kinks: Vec<f64> = v
        .iter()
        .zip(set.labels.iter())
        .flat_map(|(&vi, &bi)| [bi * vi, bi * (vi - set.c)])
        .collect();
    kinks.sort_by(f64::total_cmp);
    kinks.dedup();

    // Largest kink index with a strictly positive balance.
    let positive = kinks.partition_point(|&mu| set.balance(v, mu) > 0.0);
    let mu = if positive == 0 {
        kinks[0]
    } else if positive == kinks.len() {
        // Unreachable in exact arithmetic: the balance is −C·n₋ ≤ 0 past the last kink.
        kinks[kinks.len() - 1]
    } else {
        let (lo, hi) = (kinks[positive - 1], kinks[positive]);
        let (f_lo, f_hi) = (set.balance(v, lo), set.balance(v, hi));
        lo + f_lo * (hi - lo) / (f_lo - f_hi)
    };
    Ok(set.clipped(v, mu))
}
