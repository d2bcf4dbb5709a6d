use thiserror::Error;

/// Errors raised by the estimators, samplers and loaders in this crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("singular matrix in {context}; remove collinear covariate columns")]
    Singular { context: &'static str },

    #[error(
        "calibration target is not attainable from the sample covariates \
         (outside their convex hull): stopped after {iterations} iterations \
         with residual {residual:.3e}"
    )]
    CalibrationInfeasible { iterations: usize, residual: f64 },

    #[error("second-phase size n = {n} violates pi <= 1; max feasible n is {max_feasible_n}")]
    InfeasibleSampleSize { n: usize, max_feasible_n: usize },

    #[error("joint inclusion probability is not positive for selected pair ({i}, {j})")]
    DesignSupport { i: usize, j: usize },

    #[error(
        "propensity model shows complete or quasi-complete separation \
         (|lambda| = {lambda_norm:.3e} after {iterations} iterations)"
    )]
    Separation { iterations: usize, lambda_norm: f64 },

    #[error("degenerate response: every membership indicator in the probability sample is {0}")]
    DegenerateResponse(u8),

    #[error("degenerate propensity weight: p(x'lambda) underflows to 0 for unit {id}")]
    DegenerateWeight { id: u64 },

    #[error("{solver} did not converge in {iterations} iterations (residual {residual:.3e})")]
    NoConvergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("study variable y is not available on the probability sample (estimation mode)")]
    MissingStudyVariable,

    #[error("{path}: row {row}: {message}")]
    Parse {
        path: String,
        row: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
