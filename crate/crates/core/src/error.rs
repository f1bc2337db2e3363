use thiserror::Error;

/// Errors raised by the solver stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    /// The shifted sketch core was not positive definite even after the retry shift.
    #[error("cholesky factorization of the sketch core failed (shift {shift:e}); sketch is numerically rank deficient")]
    Cholesky { shift: f64 },

    #[error("numerical breakdown in PCG at iteration {iteration}{}", admm_suffix(*.admm_iteration))]
    NumericalBreakdown {
        iteration: usize,
        admm_iteration: Option<usize>,
    },

    #[error("parse error at line {line}{}: {message}", column_suffix(*.column))]
    Parse {
        line: usize,
        column: Option<usize>,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn admm_suffix(k: Option<usize>) -> String {
    k.map(|k| format!(" (ADMM iteration {k})")).unwrap_or_default()
}

fn column_suffix(c: Option<usize>) -> String {
    c.map(|c| format!(", column {c}")).unwrap_or_default()
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch {
            what,
            expected,
            found,
        });
    }
    Ok(())
}
