use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("Newton-Raphson did not converge in {iterations} iterations (residual {residual:e})")]
    NewtonNonConvergence { iterations: usize, residual: f64 },

    #[error("singular Jacobian in Newton-Raphson solve")]
    SingularJacobian,

    #[error("oracle does not provide Hessian-vector products")]
    MissingHessian,

    #[error("non-stationary iteration: spectral radius {rho} >= 1")]
    NonStationary { rho: f64 },

    #[error("grid too small: endpoint density ratio {ratio:e} exceeds 1e-12")]
    GridTooSmall { ratio: f64 },

    #[error("estimator failure: {0}")]
    Estimator(String),

    #[error("dataset row {row}: {msg}")]
    Dataset { row: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
