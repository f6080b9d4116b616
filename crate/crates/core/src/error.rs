use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("series length {n} is below the minimum of {min}")]
    InvalidLength { n: usize, min: usize },

    #[error("parameters are not stationary: gamma = {gamma:.6} (std error {std_error:.2e}); E ln|phi + b*eps| must be negative")]
    NonStationaryParams { gamma: f64, std_error: f64 },

    #[error("quadrature for the Lyapunov exponent is only available for the Gaussian error law")]
    UnsupportedQuadrature,

    #[error("representation needs {needed} innovations, got {got}")]
    InsufficientHistory { needed: usize, got: usize },

    #[error("non-positive conditional variance {0}")]
    NonPositiveVariance(f64),

    #[error("singular weighted design: {0}")]
    SingularDesign(String),

    #[error("sign estimator denominator is zero (all lagged values vanish)")]
    ZeroDenominator,

    #[error("Sigma-hat is singular: smallest eigenvalue {min_eigenvalue:e} against threshold {threshold:e}")]
    SingularSigma { min_eigenvalue: f64, threshold: f64 },

    #[error("estimate lies on the boundary b^2 = alpha_lo; use boundary intervals instead")]
    BoundaryCase,

    #[error("sigma_44 of the limit covariance must be positive, got {0}")]
    DegenerateSigma44(f64),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
