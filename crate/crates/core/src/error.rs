use thiserror::Error;

pub type Result<T> = std::result::Result<T, NmdError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NmdError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The adiabatic eigenvectors are undefined where the two surfaces touch.
    #[error("degenerate point at X = {x:?}: eigenvalue gap {gap:e} below threshold")]
    DegeneratePoint { x: Vec<f64>, gap: f64 },

    #[error("eigensolver failed after {iterations} iterations: {converged}/{wanted} pairs converged, worst residual {worst_residual:e}")]
    SolverFailure {
        iterations: usize,
        converged: usize,
        wanted: usize,
        worst_residual: f64,
    },

    #[error("electronic wave function norm {norm:e} underflowed at t = {t}")]
    NumericalUnderflow { norm: f64, t: f64 },

    #[error("no events were generated in (0, {horizon})")]
    EmptyEvents { horizon: f64 },

    #[error("insufficient data: need at least {needed}, got {got}")]
    InsufficientData { needed: usize, got: usize },
}

impl NmdError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        NmdError::InvalidArgument(msg.into())
    }
}
