//! Executable identity checks: each one computes both sides of an equality
//! between the full and the partial regression and reports the discrepancy.

pub mod instance;
pub mod oracle;
pub mod suite;

use serde::Serialize;

use crate::covariance::{self, DofBasis, EstimatorSpec};
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::regression::{self, PartitionedDesign};

pub use instance::{generate, ErrorProcess, Instance, InstanceConfig};
pub use oracle::{cofactor_determinant, cramer_oracle_fit, dense_annihilate, dense_projector};
pub use suite::{run_suite, SuiteConfig, SuiteSummary};

/// How `tolerance_used` is derived from the compared quantities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Tolerance {
    /// `rtol * max(|reference|_max, |candidate|_max)`.
    Relative(f64),
    Absolute(f64),
}

/// Outcome of one identity check on one instance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalenceReport {
    pub identity_name: String,
    pub passed: bool,
    pub max_abs_err: f64,
    pub max_rel_err: f64,
    pub tolerance_used: f64,
    pub instance_descriptor: String,
}

impl EquivalenceReport {
    pub fn compare(
        identity_name: impl Into<String>,
        reference: &DenseMatrix,
        candidate: &DenseMatrix,
        tolerance: Tolerance,
    ) -> Result<Self> {
        let max_abs_err = reference.max_abs_diff(candidate)?;
        let scale = reference.max_abs().max(candidate.max_abs());
        let max_rel_err = if scale > 0.0 { max_abs_err / scale } else { 0.0 };
        let tolerance_used = match tolerance {
            Tolerance::Relative(rtol) => rtol * scale,
            Tolerance::Absolute(atol) => atol,
        };
        Ok(Self {
            identity_name: identity_name.into(),
            passed: max_abs_err <= tolerance_used,
            max_abs_err,
            max_rel_err,
            tolerance_used,
            instance_descriptor: String::new(),
        })
    }

    pub fn with_descriptor(mut self, descriptor: impl Into<String>) -> Self {
        let extra = descriptor.into();
        self.instance_descriptor =
            if self.instance_descriptor.is_empty() { extra } else { format!("{extra} {}", self.instance_descriptor) };
        self
    }

    fn note(mut self, note: String) -> Self {
        if !self.instance_descriptor.is_empty() {
            self.instance_descriptor.push(' ');
        }
        self.instance_descriptor.push_str(&note);
        self
    }

    /// One JSON object, no trailing newline.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("report fields serialize")
    }
}

/// The focus slice (last k1 rows) of full-regression coefficients.
fn focus_slice(coefficients: &DenseMatrix, k1: usize) -> DenseMatrix {
    let k = coefficients.rows();
    coefficients.block(k - k1..k, 0..1)
}

/// Yule's identity for a single focus column: the slope of residualized `y`
/// on residualized `x` equals the multiple-regression coefficient on `x`.
pub fn check_yule_identity(design: &PartitionedDesign, rtol: f64) -> Result<EquivalenceReport> {
    if design.k1() != 1 {
        return Err(Error::dims("check_yule_identity focus block", 1, design.k1()));
    }
    let x = design.focus();
    let resid = regression::residualize(&design.y().hstack(x)?, design.controls())?;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for i in 0..resid.rows() {
        sxy += resid.get(i, 0) * resid.get(i, 1);
        sxx += resid.get(i, 1) * resid.get(i, 1);
    }
    let raw_ss: f64 = x.as_slice().iter().map(|v| v * v).sum();
    if sxx <= 1e-14 * raw_ss {
        return Err(Error::DegenerateResidual { ssr: sxx });
    }
    let slope = DenseMatrix::column_vector(&[sxy / sxx])?;
    let full = regression::full_fit(design)?;
    EquivalenceReport::compare("yule_bivariate", &focus_slice(&full.coefficients, 1), &slope, Tolerance::Relative(rtol))
}

/// Coefficient identity `b1 = b1~` and residual identity `u = u~`.
pub fn check_lovell_identities(
    design: &PartitionedDesign,
    rtol: f64,
) -> Result<(EquivalenceReport, EquivalenceReport)> {
    let full = regression::full_fit(design)?;
    let partial = regression::fwl_fit(design)?;
    let coef = EquivalenceReport::compare(
        "fwl_coefficients",
        &focus_slice(&full.coefficients, design.k1()),
        &partial.b1_tilde,
        Tolerance::Relative(rtol),
    )?
    .note(format!("cond~{:.2e}", full.diagnostics.condition_estimate));
    let resid =
        EquivalenceReport::compare("fwl_residuals", &full.residuals, &partial.u_tilde, Tolerance::Relative(rtol))?;
    Ok((coef, resid))
}

/// `P_W = P_W2 + P_W1*`, `P_W2 P_W1* = 0`, and each projector symmetric and
/// idempotent, all with explicit N x N matrices.
pub fn check_projection_decomposition(design: &PartitionedDesign, atol: f64) -> Result<EquivalenceReport> {
    let n = design.n_obs();
    if n > oracle::DENSE_PROJECTOR_MAX_N {
        return Err(Error::InstanceTooLarge { n, max: oracle::DENSE_PROJECTOR_MAX_N });
    }
    let p_w = dense_projector(&design.full_design())?;
    let p_w2 = dense_projector(design.controls())?;
    let w1_star = dense_annihilate(design.focus(), design.controls())?;
    let p_w1s = dense_projector(&w1_star)?;

    let decomposition = p_w.max_abs_diff(&p_w2.add(&p_w1s)?)?;
    let orthogonality = p_w2.matmul(&p_w1s)?.max_abs();
    let mut idempotence = 0.0_f64;
    let mut symmetry = 0.0_f64;
    for p in [&p_w, &p_w2, &p_w1s] {
        idempotence = idempotence.max(p.matmul(p)?.max_abs_diff(p)?);
        symmetry = symmetry.max(p.asymmetry());
    }
    let worst = decomposition.max(orthogonality).max(idempotence).max(symmetry);
    Ok(EquivalenceReport {
        identity_name: "projection_decomposition".into(),
        passed: worst <= atol,
        max_abs_err: worst,
        max_rel_err: worst / p_w.max_abs().max(f64::MIN_POSITIVE),
        tolerance_used: atol,
        instance_descriptor: format!(
            "decomposition={decomposition:.2e} orthogonality={orthogonality:.2e} \
             idempotence={idempotence:.2e} symmetry={symmetry:.2e}"
        ),
    })
}

/// Focus rows of `(W'W)^-1 W'` (from the partitioned blocks) against
/// `(W1*'W1*)^-1 W1*'` from the partial regression.
pub fn check_block_relation(design: &PartitionedDesign, rtol: f64) -> Result<EquivalenceReport> {
    let blocks = design.gram_inverse_blocks()?;
    let k2 = design.k2();
    let k = design.k();
    let full_rows = blocks.assemble().matmul_t(&design.full_design())?.block(k2..k, 0..design.n_obs());
    let partial = regression::fwl_fit(design)?;
    let partial_rows = partial.gram22.matmul_t(&partial.w1_star)?;
    EquivalenceReport::compare("block_relation", &full_rows, &partial_rows, Tolerance::Relative(rtol))
}

/// Full-path focus block against the partial-path covariance, applying the
/// `(N - k1) / (N - k)` relation for the dof-corrected estimators.
pub fn check_cov_equivalence(design: &PartitionedDesign, spec: &EstimatorSpec, rtol: f64) -> Result<EquivalenceReport> {
    let full = regression::full_fit(design)?;
    let full_cov = covariance::cov_full(&full, spec)?.focus_block(design.k1());
    let partial = regression::fwl_fit(design)?;
    let blocks = design.gram_inverse_blocks()?;
    let partial_cov = covariance::partial_cov(&partial, design, Some(&blocks), spec, DofBasis::Partial)?.matrix;
    let name = format!("cov_equivalence[{}]", spec.label());
    if spec.is_dof_scaled() {
        let n = design.n_obs() as f64;
        let lhs = full_cov.scale(n - design.k() as f64);
        let rhs = partial_cov.scale(n - design.k1() as f64);
        Ok(EquivalenceReport::compare(name, &lhs, &rhs, Tolerance::Relative(rtol))?.note("mode=dof_scaled".into()))
    } else {
        Ok(EquivalenceReport::compare(name, &full_cov, &partial_cov, Tolerance::Relative(rtol))?
            .note("mode=exact".into()))
    }
}

/// Leverages from the partitioned blocks against the diagonal of the dense
/// hat matrix, plus the trace identity `sum h_ii = k` (checked at
/// `trace_atol`).
pub fn check_leverages(
    design: &PartitionedDesign,
    atol: f64,
    trace_atol: f64,
) -> Result<(EquivalenceReport, EquivalenceReport)> {
    let blocks = design.gram_inverse_blocks()?;
    let h = regression::leverages(design, &blocks)?;
    let dense = dense_projector(&design.full_design())?.diagonal();
    let diag = EquivalenceReport::compare(
        "leverage_blocks",
        &DenseMatrix::column_vector(&dense)?,
        &DenseMatrix::column_vector(&h)?,
        Tolerance::Absolute(atol),
    )?;
    let trace = EquivalenceReport::compare(
        "leverage_trace",
        &DenseMatrix::column_vector(&[design.k() as f64])?,
        &DenseMatrix::column_vector(&[h.iter().sum()])?,
        Tolerance::Absolute(trace_atol),
    )?;
    Ok((diag, trace))
}

/// Cramer's-rule coefficients against the Cholesky path on the full design.
pub fn check_cramer_agreement(design: &PartitionedDesign, rtol: f64) -> Result<EquivalenceReport> {
    let x = design.full_design();
    let oracle = cramer_oracle_fit(&x, design.y())?;
    let fit = regression::ols_fit(&x, design.y())?;
    Ok(EquivalenceReport::compare("cramer_vs_cholesky", &oracle, &fit.coefficients, Tolerance::Relative(rtol))?
        .note(format!("cond~{:.2e}", fit.diagnostics.condition_estimate)))
}

/// Largest HC4 exponent `N h_ii / k` on a design; above 4 the `max` rule
/// departs from the constant exponent.
pub fn max_hc4_ratio(design: &PartitionedDesign) -> Result<f64> {
    let h = regression::leverages(design, &design.gram_inverse_blocks()?)?;
    let scale = design.n_obs() as f64 / design.k() as f64;
    Ok(h.iter().fold(0.0_f64, |m, v| m.max(v * scale)))
}

/// Copy of `design` whose focus block is only column `j`; the remaining
/// focus columns join the controls.
pub fn single_focus(design: &PartitionedDesign, j: usize) -> Result<PartitionedDesign> {
    let n = design.n_obs();
    let k1 = design.k1();
    if j >= k1 {
        return Err(Error::dims("single_focus column", format!("< {k1}"), j));
    }
    let focus = design.focus().block(0..n, j..j + 1);
    let mut controls = design.controls().clone();
    for c in (0..k1).filter(|&c| c != j) {
        controls = controls.hstack(&design.focus().block(0..n, c..c + 1))?;
    }
    let intercept = match design.intercept() {
        regression::InterceptPlacement::InFocus if j != 0 => regression::InterceptPlacement::InControls,
        other => other,
    };
    PartitionedDesign::new(design.y().clone(), focus, controls, intercept)
}
