use thiserror::Error;

/// Errors produced by problem construction, algorithms, and diagnostics.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("non-finite state at t = {t}")]
    NonFiniteState { t: f64 },

    #[error("problem `{problem}` has no {oracle} oracle")]
    MissingOracle { problem: String, oracle: &'static str },

    #[error("problem `{problem}` does not declare the {constant} constant")]
    MissingConstant { problem: String, constant: &'static str },

    #[error("problem `{0}` has no known optimum")]
    UnknownOptimum(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("matrix is not symmetric")]
    NotSymmetric,

    #[error("singular linear system")]
    Singular,

    #[error("resolvent iteration stopped after {iterations} steps with residual {residual:e}")]
    ResolventNotConverged { iterations: usize, residual: f64 },

    #[error("declared fixed point has residual {0:e}")]
    FixedPointResidual(f64),

    #[error("dynamics `{dynamics}` is singular at t = {t}; start at t >= {t_min}")]
    SingularTime { dynamics: String, t: f64, t_min: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("trace produced by `{found}` cannot be checked against the {lemma} lemma")]
    MismatchedLemma { lemma: &'static str, found: String },

    #[error("not enough data: {0}")]
    InsufficientData(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
