//! Partial (residualized) least squares with runtime proof of equivalence
//! to the full multiple regression.
//!
//! The focus coefficients `b1` of `y = W2 b2 + W1 b1 + u` equal the
//! coefficients of the regression of `M_W2 y` on `M_W2 W1`, and the two
//! regressions share the same residuals. This crate fits both paths,
//! computes classical, HC0-HC4, HAC and cluster-robust covariances on each,
//! and ships the oracles that check the identities on concrete data.

pub mod covariance;
pub mod error;
pub mod linalg;
pub mod regression;
pub mod verify;

pub use covariance::{
    cov_classical, cov_cluster, cov_full, cov_hac, cov_hc, cov_hc_with_rule, partial_cov, ClusterDof, ClusterMap,
    CovarianceEstimate, DofBasis, DofMode, EstimatorKind, EstimatorSpec, HacSpec, Hc4Rule, HcVariant, Scope,
};
pub use error::{Error, Result};
pub use linalg::{cholesky_solve, partitioned_gram_inverse, Cholesky, DenseMatrix, GramInverseBlocks};
pub use regression::{
    detrend_linear, full_fit, fwl_fit, leverages, ols_fit, residualize, InterceptPlacement, PartialFit,
    PartitionedDesign, RegressionFit,
};
pub use verify::EquivalenceReport;
