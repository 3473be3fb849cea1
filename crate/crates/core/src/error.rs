use thiserror::Error;

/// Errors raised by fitting, covariance estimation and the identity checks.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch { context: &'static str, expected: String, found: String },

    #[error("non-finite value at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    /// Raised by the Cholesky factorization; on a Gram matrix this means the
    /// regressors are (numerically) collinear.
    #[error("matrix is not positive definite: pivot {pivot} is {value:e} (threshold {threshold:e})")]
    NotPositiveDefinite { pivot: usize, value: f64, threshold: f64 },

    #[error("invalid design: {0}")]
    InvalidDesign(String),

    #[error("zero residual degrees of freedom (n_obs = {n_obs}, n_params = {n_params})")]
    ZeroDegreesOfFreedom { n_obs: usize, n_params: usize },

    #[error("leverage of observation {row} is {leverage} (saturated, HC2-HC4 undefined)")]
    SaturatedLeverage { row: usize, leverage: f64 },

    #[error("leverages are required for {0}")]
    MissingLeverages(&'static str),

    #[error("HAC bandwidth {bandwidth} must be smaller than the number of observations {n_obs}")]
    BandwidthTooLarge { bandwidth: usize, n_obs: usize },

    #[error("invalid HAC weights: {0}")]
    InvalidWeights(String),

    #[error("cluster-robust variance needs at least two clusters")]
    SingleCluster,

    #[error("Cramer's-rule system is singular (|det| = {det:e})")]
    SingularSystem { det: f64 },

    #[error("Cramer's-rule oracle supports at most 8 regressors, got {k}")]
    OracleSizeExceeded { k: usize },

    #[error("focus column is collinear with the controls (residual sum of squares {ssr:e})")]
    DegenerateResidual { ssr: f64 },

    #[error("dense projector check supports at most {max} observations, got {n}")]
    InstanceTooLarge { n: usize, max: usize },
}

impl Error {
    pub(crate) fn dims(context: &'static str, expected: impl std::fmt::Display, found: impl std::fmt::Display) -> Self {
        Error::DimensionMismatch { context, expected: expected.to_string(), found: found.to_string() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
