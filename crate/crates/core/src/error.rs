use alloc::string::String;

/// Errors raised by the solver stack.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A field or trajectory contained NaN or infinity, or had the wrong length.
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// A configuration value violates a type invariant. `key` names the offending entry.
    #[error("invalid configuration `{key}`: {reason}")]
    Config { key: String, reason: String },
    /// The unsmoothed m-Laplacian with `m < 2` was evaluated on a flat cell.
    #[error("singular gradient in cell {cell}: m < 2 needs delta > 0")]
    Singularity { cell: usize },
    /// An iterative solver stopped before reaching its tolerance.
    #[error("{context}: no convergence after {iterations} iterations (residual {residual:e})")]
    SolverFailure {
        context: String,
        iterations: usize,
        residual: f64,
    },
    /// Bisection could not establish a sign change.
    #[error("bracket failure: {0}")]
    Bracket(String),
    /// Array shapes do not agree with the meshes.
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    /// A factorization met a zero or negative pivot.
    #[error("singular linear system at pivot {0}")]
    Singular(usize),
}

pub type Result<T> = core::result::Result<T, Error>;

impl Error {
    pub fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }

    pub fn solver(context: impl Into<String>, iterations: usize, residual: f64) -> Self {
        Error::SolverFailure {
            context: context.into(),
            iterations,
            residual,
        }
    }
}

pub(crate) fn ensure_finite(values: &[f64], what: &str) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::InvalidInput(alloc::format!(
            "{what}: non-finite value at index {i}"
        ))),
        None => Ok(()),
    }
}
