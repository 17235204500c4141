use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("{solver} did not converge in {iterations} iterations (residual {residual:.3e})")]
    SolverFailure {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error(
        "step rejected at t = {t}: Picard residual {residual:.3e} after {iterations} iterations \
         with dt = {dt:e}; reduce dt"
    )]
    StepRejected {
        t: f64,
        dt: f64,
        iterations: usize,
        residual: f64,
    },

    #[error("run failed at t = {t}: {reason}")]
    RunFailure { t: f64, reason: String },

    #[error("malformed snapshot: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
