//! Least squares, annihilator residualization and the partial
//! (Frisch-Waugh-Lovell) regression path.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Cholesky, DenseMatrix, GramInverseBlocks};

/// Designs whose estimated `cond(W)` exceeds this are flagged in
/// [`FitDiagnostics`].
pub const CONDITION_WARNING: f64 = 1e8;

/// Which block holds the column of ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterceptPlacement {
    #[default]
    InControls,
    InFocus,
    Absent,
}

/// Outcome `y` with the regressors split into a focus block `W1` and a
/// control block `W2`. The full design is ordered `W = [W2 : W1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionedDesign {
    y: DenseMatrix,
    focus: DenseMatrix,
    controls: DenseMatrix,
    intercept: InterceptPlacement,
}

fn is_ones_column(m: &DenseMatrix, j: usize) -> bool {
    (0..m.rows()).all(|i| m.get(i, j) == 1.0)
}

fn count_ones_columns(m: &DenseMatrix) -> usize {
    (0..m.cols()).filter(|&j| is_ones_column(m, j)).count()
}

impl PartitionedDesign {
    /// Validates pre-assembled blocks. When `intercept` is not `Absent`, the
    /// named block must hold exactly one column of ones and the other none.
    pub fn new(
        y: DenseMatrix,
        focus: DenseMatrix,
        controls: DenseMatrix,
        intercept: InterceptPlacement,
    ) -> Result<Self> {
        let n = y.rows();
        if y.cols() != 1 {
            return Err(Error::dims("PartitionedDesign y", "1 column", y.cols()));
        }
        if focus.rows() != n || controls.rows() != n {
            return Err(Error::dims(
                "PartitionedDesign rows",
                n,
                format!("focus {}, controls {}", focus.rows(), controls.rows()),
            ));
        }
        if focus.cols() == 0 {
            return Err(Error::dims("PartitionedDesign focus block", "at least 1 column", 0));
        }
        if controls.cols() == 0 {
            return Err(Error::dims("PartitionedDesign control block", "at least 1 column", 0));
        }
        let k = focus.cols() + controls.cols();
        if n <= k {
            return Err(Error::InvalidDesign(format!("need more observations than regressors (N = {n}, k = {k})")));
        }
        let (in_focus, in_controls) = (count_ones_columns(&focus), count_ones_columns(&controls));
        let expected = match intercept {
            InterceptPlacement::InControls => (0, 1),
            InterceptPlacement::InFocus => (1, 0),
            InterceptPlacement::Absent => (in_focus, in_controls),
        };
        if intercept != InterceptPlacement::Absent && (in_focus, in_controls) != expected {
            return Err(Error::InvalidDesign(format!(
                "intercept {intercept:?} requires exactly one column of ones in that block \
                 (found {in_focus} in focus, {in_controls} in controls)"
            )));
        }
        Ok(Self { y, focus, controls, intercept })
    }

    /// Builds a design from raw regressors, prepending a column of ones to
    /// the block named by `intercept`.
    pub fn with_intercept(
        y: DenseMatrix,
        focus: DenseMatrix,
        controls: DenseMatrix,
        intercept: InterceptPlacement,
    ) -> Result<Self> {
        let n = y.rows();
        let ones = DenseMatrix::filled(n, 1, 1.0);
        let (focus, controls) = match intercept {
            InterceptPlacement::InControls => (focus, ones.hstack(&controls)?),
            InterceptPlacement::InFocus => (ones.hstack(&focus)?, controls),
            InterceptPlacement::Absent => (focus, controls),
        };
        Self::new(y, focus, controls, intercept)
    }

    pub fn y(&self) -> &DenseMatrix {
        &self.y
    }

    /// Focus block `W1` (N x k1).
    pub fn focus(&self) -> &DenseMatrix {
        &self.focus
    }

    /// Control block `W2` (N x k2).
    pub fn controls(&self) -> &DenseMatrix {
        &self.controls
    }

    pub fn intercept(&self) -> InterceptPlacement {
        self.intercept
    }

    pub fn n_obs(&self) -> usize {
        self.y.rows()
    }

    pub fn k1(&self) -> usize {
        self.focus.cols()
    }

    pub fn k2(&self) -> usize {
        self.controls.cols()
    }

    pub fn k(&self) -> usize {
        self.k1() + self.k2()
    }

    /// `W = [W2 : W1]`.
    pub fn full_design(&self) -> DenseMatrix {
        self.controls.hstack(&self.focus).expect("row counts validated")
    }

    /// Blocks of `(W'W)^-1`.
    pub fn gram_inverse_blocks(&self) -> Result<GramInverseBlocks> {
        GramInverseBlocks::from_blocks(&self.controls, &self.focus)
    }
}

/// Numerical health of a fit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitDiagnostics {
    /// Estimated `cond(X)` from the Cholesky pivots of `X'X`.
    pub condition_estimate: f64,
    pub warning: Option<String>,
}

impl FitDiagnostics {
    fn from_factor(chol: &Cholesky) -> Self {
        let condition_estimate = chol.condition_estimate().sqrt();
        let warning = (condition_estimate > CONDITION_WARNING).then(|| {
            format!("design is ill-conditioned (cond ~ {condition_estimate:.3e}); results may lose precision")
        });
        Self { condition_estimate, warning }
    }
}

/// Result of one least-squares fit of `y` on `X`.
#[derive(Debug, Clone)]
pub struct RegressionFit {
    pub coefficients: DenseMatrix,
    pub residuals: DenseMatrix,
    pub fitted: DenseMatrix,
    /// `(X'X)^-1`.
    pub gram_inverse: DenseMatrix,
    /// The regressor matrix `X` itself; covariance sandwiches need it.
    pub design: DenseMatrix,
    pub n_obs: usize,
    pub n_params: usize,
    pub diagnostics: FitDiagnostics,
}

/// Ordinary least squares through the normal equations `X'X b = X'y`.
pub fn ols_fit(x: &DenseMatrix, y: &DenseMatrix) -> Result<RegressionFit> {
    let (n, k) = x.shape();
    if y.shape() != (n, 1) {
        return Err(Error::dims("ols_fit y", format!("{n}x1"), format!("{}x{}", y.rows(), y.cols())));
    }
    if k == 0 {
        return Err(Error::dims("ols_fit X", "at least 1 column", 0));
    }
    if n <= k {
        return Err(Error::InvalidDesign(format!("need more observations than regressors (N = {n}, k = {k})")));
    }
    let chol = Cholesky::factor(&x.gram())?;
    let coefficients = chol.solve(&x.t_matmul(y)?)?;
    let fitted = x.matmul(&coefficients)?;
    let residuals = y.sub(&fitted)?;
    Ok(RegressionFit {
        coefficients,
        residuals,
        fitted,
        gram_inverse: chol.inverse(),
        design: x.clone(),
        n_obs: n,
        n_params: k,
        diagnostics: FitDiagnostics::from_factor(&chol),
    })
}

/// Applies the annihilator `I - Z (Z'Z)^-1 Z'` to every column of `targets`
/// without forming the N x N matrix.
pub fn residualize(targets: &DenseMatrix, z: &DenseMatrix) -> Result<DenseMatrix> {
    if targets.rows() != z.rows() {
        return Err(Error::dims("residualize", z.rows(), targets.rows()));
    }
    if z.cols() == 0 || z.rows() <= z.cols() {
        return Err(Error::InvalidDesign(format!("annihilator needs N > p >= 1 (N = {}, p = {})", z.rows(), z.cols())));
    }
    let coef = Cholesky::factor(&z.gram())?.solve(&z.t_matmul(targets)?)?;
    targets.sub(&z.matmul(&coef)?)
}

/// Residuals of each column on an intercept and the linear trend `1..N`.
pub fn detrend_linear(series: &DenseMatrix) -> Result<DenseMatrix> {
    let n = series.rows();
    if n < 3 {
        return Err(Error::InvalidDesign(format!("detrending needs at least 3 observations, got {n}")));
    }
    let trend: Vec<f64> = (1..=n).map(|t| t as f64).collect();
    let z = DenseMatrix::filled(n, 1, 1.0).hstack(&DenseMatrix::column_vector(&trend)?)?;
    residualize(series, &z)
}

/// Partial regression of `Y*` on `W1*`, both residualized on the controls.
#[derive(Debug, Clone)]
pub struct PartialFit {
    pub b1_tilde: DenseMatrix,
    pub u_tilde: DenseMatrix,
    pub y_star: DenseMatrix,
    pub w1_star: DenseMatrix,
    /// `(W1*' W1*)^-1`.
    pub gram22: DenseMatrix,
    /// Number of controls partialled out (k2).
    pub n_controls: usize,
    pub diagnostics: FitDiagnostics,
}

impl PartialFit {
    pub fn n_obs(&self) -> usize {
        self.y_star.rows()
    }

    pub fn k1(&self) -> usize {
        self.w1_star.cols()
    }

    /// Regressors of the full model, `k1 + k2`.
    pub fn k_full(&self) -> usize {
        self.k1() + self.n_controls
    }
}

pub fn fwl_fit(design: &PartitionedDesign) -> Result<PartialFit> {
    // residualize [y : W1] with a single factorization of W2'W2
    let stacked = residualize(&design.y().hstack(design.focus())?, design.controls())?;
    let n = design.n_obs();
    let k1 = design.k1();
    let y_star = stacked.block(0..n, 0..1);
    let w1_star = stacked.block(0..n, 1..1 + k1);
    let partial = ols_fit(&w1_star, &y_star)?;
    Ok(PartialFit {
        b1_tilde: partial.coefficients,
        u_tilde: partial.residuals,
        y_star,
        w1_star,
        gram22: partial.gram_inverse,
        n_controls: design.k2(),
        diagnostics: partial.diagnostics,
    })
}

/// Fits the full regression of `y` on `[W2 : W1]`.
pub fn full_fit(design: &PartitionedDesign) -> Result<RegressionFit> {
    ols_fit(&design.full_design(), design.y())
}

/// Leverages `h_ii = W_i' (W'W)^-1 W_i` computed from the partitioned
/// blocks, so no k x k inverse is needed.
pub fn leverages(design: &PartitionedDesign, blocks: &GramInverseBlocks) -> Result<Vec<f64>> {
    let (w2, w1) = (design.controls(), design.focus());
    if blocks.k2() != w2.cols() || blocks.k1() != w1.cols() {
        return Err(Error::dims(
            "leverages",
            format!("blocks for k2 = {}, k1 = {}", w2.cols(), w1.cols()),
            format!("k2 = {}, k1 = {}", blocks.k2(), blocks.k1()),
        ));
    }
    // rows of [W2 : W1] (W'W)^-1, split by block
    let left = w2.matmul(&blocks.w11)?.add(&w1.matmul_t(&blocks.w12)?)?;
    let right = w2.matmul(&blocks.w12)?.add(&w1.matmul(&blocks.w22)?)?;
    Ok((0..design.n_obs())
        .map(|i| {
            let a: f64 = left.row(i).iter().zip(w2.row(i)).map(|(p, q)| p * q).sum();
            let b: f64 = right.row(i).iter().zip(w1.row(i)).map(|(p, q)| p * q).sum();
            a + b
        })
        .collect())
}

/// Leverages of an arbitrary regressor matrix, through `(X'X)^-1`.
pub fn leverages_dense(x: &DenseMatrix, gram_inverse: &DenseMatrix) -> Result<Vec<f64>> {
    let xg = x.matmul(gram_inverse)?;
    Ok((0..x.rows()).map(|i| xg.row(i).iter().zip(x.row(i)).map(|(p, q)| p * q).sum()).collect())
}

/// Observations whose leverage is numerically 1.
pub fn saturated_rows(h: &[f64]) -> Vec<usize> {
    h.iter().enumerate().filter(|(_, &v)| v >= 1.0 - 1e-12).map(|(i, _)| i).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(v: &[f64]) -> DenseMatrix {
        DenseMatrix::column_vector(v).unwrap()
    }

    #[test]
    fn intercept_only_fit_is_the_mean() {
        let fit = ols_fit(&DenseMatrix::filled(3, 1, 1.0), &col(&[1.0, 2.0, 3.0])).unwrap();
        assert!((fit.coefficients.get(0, 0) - 2.0).abs() < 1e-15);
        for (r, e) in fit.residuals.column(0).iter().zip([-1.0, 0.0, 1.0]) {
            assert!((r - e).abs() < 1e-15);
        }
    }

    #[test]
    fn exact_line_has_zero_residuals() {
        let x = DenseMatrix::from_rows(&[[1.0, 0.0], [1.0, 1.0], [1.0, 2.0], [1.0, 3.0]]).unwrap();
        let fit = ols_fit(&x, &col(&[1.0, 3.0, 5.0, 7.0])).unwrap();
        assert!((fit.coefficients.get(0, 0) - 1.0).abs() < 1e-14);
        assert!((fit.coefficients.get(1, 0) - 2.0).abs() < 1e-14);
        assert!(fit.residuals.max_abs() < 1e-14);
        assert!(fit.diagnostics.warning.is_none());
    }

    #[test]
    fn fitted_plus_residuals_is_y() {
        let x = DenseMatrix::from_rows(&[[1.0, 0.3], [1.0, -1.0], [1.0, 2.5], [1.0, 0.1], [1.0, 1.7]]).unwrap();
        let y = col(&[0.2, 1.9, -0.7, 3.3, 0.0]);
        let fit = ols_fit(&x, &y).unwrap();
        assert!(fit.fitted.add(&fit.residuals).unwrap().max_abs_diff(&y).unwrap() < 1e-15);
        let normal = x.t_matmul(&fit.residuals).unwrap();
        assert!(normal.max_abs() < 1e-12);
    }

    #[test]
    fn ols_rejects_bad_shapes_and_collinearity() {
        let x = DenseMatrix::filled(3, 1, 1.0);
        assert!(matches!(ols_fit(&x, &col(&[1.0, 2.0])), Err(Error::DimensionMismatch { .. })));
        let collinear = DenseMatrix::from_rows(&[[1.0, 2.0], [1.0, 2.0], [1.0, 2.0]]).unwrap();
        assert!(matches!(ols_fit(&collinear, &col(&[1.0, 2.0, 3.0])), Err(Error::NotPositiveDefinite { .. })));
    }

    #[test]
    fn residualize_on_ones_demeans() {
        let t = DenseMatrix::from_rows(&[[1.0, 10.0], [2.0, 20.0], [6.0, 0.0]]).unwrap();
        let r = residualize(&t, &DenseMatrix::filled(3, 1, 1.0)).unwrap();
        let expected = DenseMatrix::from_rows(&[[-2.0, 0.0], [-1.0, 10.0], [3.0, -10.0]]).unwrap();
        assert!(r.max_abs_diff(&expected).unwrap() < 1e-14);
    }

    #[test]
    fn residualize_kills_its_own_span() {
        let z = DenseMatrix::from_rows(&[[1.0, 0.5], [1.0, -2.0], [1.0, 3.0], [1.0, 0.0]]).unwrap();
        let targets = z.matmul(&DenseMatrix::from_rows(&[[2.0, -1.0], [0.5, 4.0]]).unwrap()).unwrap();
        let r = residualize(&targets, &z).unwrap();
        assert!(r.max_abs() <= 1e-12 * targets.max_abs());
    }

    #[test]
    fn detrend_annihilates_constants_and_lines() {
        let line: Vec<f64> = (1..=7).map(|t| 3.0 - 0.25 * t as f64).collect();
        let series = DenseMatrix::from_columns(&[line, vec![4.0; 7]]).unwrap();
        let r = detrend_linear(&series).unwrap();
        assert!(r.max_abs() <= 1e-12 * series.max_abs());
        assert!(detrend_linear(&DenseMatrix::zeros(2, 1)).is_err());
    }

    #[test]
    fn detrend_quadratic_matches_direct_fit() {
        let t2: Vec<f64> = (1..=5).map(|t| (t * t) as f64).collect();
        // residuals of t^2 on [1, t] for t = 1..5: fitted line is 6t - 7
        let expected = [2.0, -1.0, -2.0, -1.0, 2.0];
        let r = detrend_linear(&col(&t2)).unwrap();
        for (a, b) in r.column(0).iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn demeaned_slope_example() {
        let design = PartitionedDesign::with_intercept(
            col(&[2.0, 1.0, 4.0, 3.0, 6.0]),
            col(&[1.0, 2.0, 3.0, 4.0, 5.0]),
            DenseMatrix::zeros(5, 0),
            InterceptPlacement::InControls,
        )
        .unwrap();
        let p = fwl_fit(&design).unwrap();
        assert!((p.b1_tilde.get(0, 0) - 1.0).abs() < 1e-14);
        // intercept in controls => residualized data is demeaned
        let mean: f64 = p.y_star.column(0).iter().sum::<f64>() / 5.0;
        assert!(mean.abs() < 1e-10);
        assert!(p.w1_star.t_matmul(&p.u_tilde).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn design_validation() {
        let y = col(&[1.0, 2.0, 3.0, 4.0]);
        let x = col(&[0.0, 1.0, 0.0, 1.0]);
        let empty = DenseMatrix::zeros(4, 0);
        assert!(matches!(
            PartitionedDesign::new(y.clone(), empty.clone(), x.clone(), InterceptPlacement::Absent),
            Err(Error::DimensionMismatch { .. })
        ));
        // focus given as an explicit ones column without declaring it
        let ones = DenseMatrix::filled(4, 1, 1.0);
        assert!(PartitionedDesign::new(y.clone(), x.clone(), ones.clone(), InterceptPlacement::InFocus).is_err());
        assert!(PartitionedDesign::new(y.clone(), x.clone(), ones.clone(), InterceptPlacement::InControls).is_ok());
        let d = PartitionedDesign::with_intercept(y.clone(), x.clone(), empty, InterceptPlacement::InControls).unwrap();
        assert_eq!((d.k1(), d.k2(), d.k()), (1, 1, 2));
        // N must exceed k
        let short = DenseMatrix::filled(2, 1, 1.0);
        assert!(
            PartitionedDesign::new(col(&[1.0, 2.0]), col(&[0.0, 1.0]), short, InterceptPlacement::InControls).is_err()
        );
    }

    #[test]
    fn balanced_and_saturated_leverages() {
        let x = DenseMatrix::filled(4, 1, 1.0);
        let fit = ols_fit(&x, &col(&[1.0, 0.0, 2.0, 5.0])).unwrap();
        let h = leverages_dense(&x, &fit.gram_inverse).unwrap();
        assert!(h.iter().all(|v| (v - 0.25).abs() < 1e-15));
        assert!(saturated_rows(&h).is_empty());

        let eye = DenseMatrix::identity(2);
        let h = leverages_dense(&eye, &DenseMatrix::identity(2)).unwrap();
        assert_eq!(h, vec![1.0, 1.0]);
        assert_eq!(saturated_rows(&h), vec![0, 1]);
    }

    #[test]
    fn block_leverages_reject_foreign_blocks() {
        let design = PartitionedDesign::with_intercept(
            col(&[1.0, 2.0, 0.0, 4.0, 3.0]),
            col(&[0.5, 1.0, 2.0, -1.0, 0.0]),
            DenseMatrix::zeros(5, 0),
            InterceptPlacement::InControls,
        )
        .unwrap();
        let ones = DenseMatrix::filled(5, 1, 1.0);
        let other =
            GramInverseBlocks::from_blocks(&ones, &design.focus().hstack(&col(&[1.0, 0.0, 0.0, 1.0, 2.0])).unwrap())
                .unwrap();
        assert!(matches!(leverages(&design, &other), Err(Error::DimensionMismatch { .. })));
    }
}
