//! Composite convex optimization with NysADMM: inexact linearized ADMM whose
//! linear subproblems are solved by conjugate gradients preconditioned with a
//! randomized Nyström approximation.
//!
//! The pieces, bottom up:
//!
//! * [`linops`]: symmetric psd operators (weighted Gram, SVM kernel) and feature maps.
//! * [`nystrom`]: fixed-rank and adaptive randomized Nyström approximations.
//! * [`precond`]: the Nyström preconditioner and its inverse.
//! * [`pcg`]: preconditioned conjugate gradients for `(H + ρI)x = r`.
//! * [`prox`]: soft thresholding and the SVM dual projection.
//! * [`admm`]: the driver.
//! * [`problems`]: lasso / elastic net, logistic regression, kernel SVM.
//! * [`io`] and [`cli`]: dataset loading, JSON results, and the `nysadmm` binary.

// `!(x >= 0.0)` is used on purpose to reject NaN along with negatives.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod admm;
pub mod cli;
pub mod error;
pub mod io;
pub mod linops;
pub mod nystrom;
pub mod pcg;
pub mod precond;
pub mod problems;
pub mod prox;
pub mod rng;

pub use error::{Error, Result};
pub use linops::{DenseMatrix, Vector};
