//! Sandwich covariance estimators on the full and the partial regression.
//!
//! Every estimator here has the form `B' M B` with bread
//! `B = X (X'X)^-1` and a meat built from residuals:
//!
//! | estimator | meat                                                    |
//! |-----------|---------------------------------------------------------|
//! | Classical | `s^2 X'X`, `s^2 = u'u / (N - k)`                         |
//! | HC0       | `X' diag(u_i^2) X`                                      |
//! | HC1       | `N / (N - k)` times HC0                                 |
//! | HC2       | `X' diag(u_i^2 / (1 - h_ii)) X`                         |
//! | HC3       | `X' diag(u_i^2 / (1 - h_ii)^2) X`                       |
//! | HC4       | `X' diag(u_i^2 / (1 - h_ii)^d_i) X`                     |
//! | HAC       | `sum_{|i-j| <= L} w_|i-j| u_i u_j x_i x_j'`             |
//! | Cluster   | `sum_g (X_g' u_g)(X_g' u_g)'` times a dof factor        |
//!
//! On the partial path `X = W1*`, `u = u~`, and the leverages come from the
//! full design through the partitioned Gram inverse, which makes HC2-HC4
//! agree with the focus block of the full-regression estimate.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, GramInverseBlocks};
use crate::regression::{self, PartialFit, PartitionedDesign, RegressionFit};

/// Leverages at or above `1 - SATURATION_MARGIN` are treated as 1.
pub const SATURATION_MARGIN: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EstimatorKind {
    Classical,
    HC0,
    HC1,
    HC2,
    HC3,
    HC4,
    HAC,
    Cluster,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HcVariant {
    HC0,
    HC1,
    HC2,
    HC3,
    HC4,
}

impl HcVariant {
    pub fn kind(self) -> EstimatorKind {
        match self {
            HcVariant::HC0 => EstimatorKind::HC0,
            HcVariant::HC1 => EstimatorKind::HC1,
            HcVariant::HC2 => EstimatorKind::HC2,
            HcVariant::HC3 => EstimatorKind::HC3,
            HcVariant::HC4 => EstimatorKind::HC4,
        }
    }

    pub fn needs_leverage(self) -> bool {
        matches!(self, HcVariant::HC2 | HcVariant::HC3 | HcVariant::HC4)
    }
}

/// Exponent rule for HC4's `(1 - h_ii)^d_i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Hc4Rule {
    /// `d_i = max(4, N h_ii / k)`.
    #[default]
    Max,
    /// `d_i = min(4, N h_ii / k)`, i.e. `min(4, h_ii / mean(h))`.
    Min,
}

impl Hc4Rule {
    pub fn exponent(self, h: f64, n_obs: usize, k: usize) -> f64 {
        let ratio = n_obs as f64 * h / k as f64;
        match self {
            Hc4Rule::Max => ratio.max(4.0),
            Hc4Rule::Min => ratio.min(4.0),
        }
    }
}

/// Degree-of-freedom correction applied to an estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DofMode {
    None,
    NMinusK,
    ClusterG,
    ClusterGN,
}

/// Correction used by the cluster-robust estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ClusterDof {
    #[default]
    None,
    /// `G / (G - 1)`.
    G,
    /// `G (N - 1) / ((G - 1)(N - k))`.
    GN,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scope {
    FullRegression,
    PartialRegression,
}

/// Which parameter count enters `N - k` on the partial path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum DofBasis {
    /// `k1`, what a naive partial regression would report.
    #[default]
    Partial,
    /// `k1 + k2`, reproducing the full-regression focus block exactly.
    Full,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceEstimate {
    pub matrix: DenseMatrix,
    pub estimator: EstimatorKind,
    pub dof_mode: DofMode,
    pub scope: Scope,
    /// The `k` used in any `N - k` factor.
    pub dof_params: usize,
}

impl CovarianceEstimate {
    pub fn standard_errors(&self) -> Vec<f64> {
        self.matrix.diagonal().into_iter().map(|v| v.max(0.0).sqrt()).collect()
    }

    /// The trailing `k1 x k1` block, i.e. the focus coefficients of a full
    /// regression ordered `[W2 : W1]`.
    pub fn focus_block(&self, k1: usize) -> DenseMatrix {
        let k = self.matrix.rows();
        assert!(k1 <= k);
        self.matrix.block(k - k1..k, k - k1..k)
    }
}

/// Kernel weights for the HAC estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HacSpec {
    weights: Vec<f64>,
}

impl HacSpec {
    /// Bartlett kernel `w_l = 1 - l / (L + 1)`.
    pub fn bartlett(bandwidth: usize) -> Self {
        let denom = (bandwidth + 1) as f64;
        Self { weights: (0..=bandwidth).map(|l| (bandwidth + 1 - l) as f64 / denom).collect() }
    }

    /// Explicit `w_0..w_L`: `w_0 = 1`, values in `[0, 1]`, non-increasing.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        if weights.first() != Some(&1.0) {
            return Err(Error::InvalidWeights("first weight must be exactly 1".into()));
        }
        if weights.iter().any(|w| !(0.0..=1.0).contains(w)) {
            return Err(Error::InvalidWeights("weights must lie in [0, 1]".into()));
        }
        if weights.windows(2).any(|p| p[1] > p[0]) {
            return Err(Error::InvalidWeights("weights must be non-increasing".into()));
        }
        Ok(Self { weights })
    }

    /// `floor(4 (N / 100)^(2/9))`.
    pub fn default_bandwidth(n_obs: usize) -> usize {
        (4.0 * (n_obs as f64 / 100.0).powf(2.0 / 9.0)).floor() as usize
    }

    pub fn bandwidth(&self) -> usize {
        self.weights.len() - 1
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Cluster membership of each observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterMap {
    assignment: Vec<usize>,
    n_clusters: usize,
}

impl ClusterMap {
    /// Clusters from arbitrary labels, numbered in order of first appearance.
    pub fn from_labels<S: AsRef<str>>(labels: &[S]) -> Result<Self> {
        let mut ids: HashMap<&str, usize> = HashMap::new();
        let assignment = labels
            .iter()
            .map(|l| {
                let next = ids.len();
                *ids.entry(l.as_ref()).or_insert(next)
            })
            .collect();
        Self::from_ids(assignment)
    }

    /// Clusters from integer ids. Ids are renumbered densely so that every
    /// cluster is non-empty.
    pub fn from_ids(ids: Vec<usize>) -> Result<Self> {
        let mut dense: HashMap<usize, usize> = HashMap::new();
        let assignment: Vec<usize> = ids
            .iter()
            .map(|id| {
                let next = dense.len();
                *dense.entry(*id).or_insert(next)
            })
            .collect();
        let n_clusters = dense.len();
        if n_clusters < 2 {
            return Err(Error::SingleCluster);
        }
        Ok(Self { assignment, n_clusters })
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn n_clusters(&self) -> usize {
        self.n_clusters
    }

    pub fn n_obs(&self) -> usize {
        self.assignment.len()
    }
}

/// A fully parameterized estimator choice.
#[derive(Debug, Clone, PartialEq)]
pub enum EstimatorSpec {
    Classical,
    Hc { variant: HcVariant, hc4_rule: Hc4Rule },
    Hac(HacSpec),
    Cluster { clusters: ClusterMap, dof: ClusterDof },
}

impl EstimatorSpec {
    pub fn hc(variant: HcVariant) -> Self {
        EstimatorSpec::Hc { variant, hc4_rule: Hc4Rule::default() }
    }

    pub fn kind(&self) -> EstimatorKind {
        match self {
            EstimatorSpec::Classical => EstimatorKind::Classical,
            EstimatorSpec::Hc { variant, .. } => variant.kind(),
            EstimatorSpec::Hac(_) => EstimatorKind::HAC,
            EstimatorSpec::Cluster { .. } => EstimatorKind::Cluster,
        }
    }

    pub fn needs_leverage(&self) -> bool {
        matches!(self, EstimatorSpec::Hc { variant, .. } if variant.needs_leverage())
    }

    /// Whether the full and partial paths differ by `(N - k1) / (N - k)`.
    pub fn is_dof_scaled(&self) -> bool {
        matches!(
            self,
            EstimatorSpec::Classical
                | EstimatorSpec::Hc { variant: HcVariant::HC1, .. }
                | EstimatorSpec::Cluster { dof: ClusterDof::GN, .. }
        )
    }

    /// Short label used in reports, e.g. `hc3` or `cluster(g)`.
    pub fn label(&self) -> String {
        match self {
            EstimatorSpec::Classical => "classical".into(),
            EstimatorSpec::Hc { variant, hc4_rule } => match (variant, hc4_rule) {
                (HcVariant::HC4, Hc4Rule::Min) => "hc4(min)".into(),
                _ => format!("{variant:?}").to_lowercase(),
            },
            EstimatorSpec::Hac(spec) => format!("hac(L={})", spec.bandwidth()),
            EstimatorSpec::Cluster { dof, .. } => match dof {
                ClusterDof::None => "cluster(none)".into(),
                ClusterDof::G => "cluster(g)".into(),
                ClusterDof::GN => "cluster(gn)".into(),
            },
        }
    }
}

/// The pieces every sandwich needs.
struct Sandwich<'a> {
    x: &'a DenseMatrix,
    gram_inverse: &'a DenseMatrix,
    residuals: &'a [f64],
}

impl Sandwich<'_> {
    fn n(&self) -> usize {
        self.x.rows()
    }

    fn wrap(&self, meat: &DenseMatrix) -> DenseMatrix {
        let g = self.gram_inverse;
        g.matmul(meat).and_then(|m| m.matmul(g)).expect("sandwich dimensions agree").symmetrize()
    }

    fn diagonal(&self, weights: &[f64]) -> DenseMatrix {
        let scaled = self.x.scale_rows(weights).expect("one weight per row");
        self.wrap(&scaled.t_matmul(self.x).expect("same rows").symmetrize())
    }

    fn scores(&self) -> DenseMatrix {
        self.x.scale_rows(self.residuals).expect("one residual per row")
    }

    fn hac(&self, spec: &HacSpec) -> Result<DenseMatrix> {
        let n = self.n();
        if spec.bandwidth() >= n {
            return Err(Error::BandwidthTooLarge { bandwidth: spec.bandwidth(), n_obs: n });
        }
        let scores = self.scores();
        let mut meat = scores.gram().scale(spec.weights()[0]);
        for (lag, &w) in spec.weights().iter().enumerate().skip(1) {
            if w == 0.0 {
                continue;
            }
            let lead = scores.row_range(lag..n);
            let lagged = scores.row_range(0..n - lag);
            let cross = lead.t_matmul(&lagged)?;
            let both = cross.add(&cross.transpose())?;
            meat = meat.add(&both.scale(w))?;
        }
        Ok(self.wrap(&meat))
    }

    fn cluster(&self, clusters: &ClusterMap) -> Result<DenseMatrix> {
        if clusters.n_obs() != self.n() {
            return Err(Error::dims("cluster assignment", self.n(), clusters.n_obs()));
        }
        let k = self.x.cols();
        let mut sums = vec![0.0; clusters.n_clusters() * k];
        for (i, &g) in clusters.assignment().iter().enumerate() {
            let u = self.residuals[i];
            for (s, x) in sums[g * k..(g + 1) * k].iter_mut().zip(self.x.row(i)) {
                *s += u * x;
            }
        }
        let sums = DenseMatrix::from_raw(clusters.n_clusters(), k, sums);
        Ok(self.wrap(&sums.gram()))
    }
}

fn residual_dof(n_obs: usize, n_params: usize) -> Result<f64> {
    if n_obs <= n_params {
        return Err(Error::ZeroDegreesOfFreedom { n_obs, n_params });
    }
    Ok((n_obs - n_params) as f64)
}

/// Diagonal meat weights for an HC variant.
fn hc_weights(
    residuals: &[f64],
    variant: HcVariant,
    leverages: Option<&[f64]>,
    hc4_rule: Hc4Rule,
    dof_params: usize,
    k_total: usize,
) -> Result<Vec<f64>> {
    let n = residuals.len();
    let sq = residuals.iter().map(|u| u * u);
    if !variant.needs_leverage() {
        let factor = match variant {
            HcVariant::HC1 => n as f64 / residual_dof(n, dof_params)?,
            _ => 1.0,
        };
        return Ok(sq.map(|v| v * factor).collect());
    }
    let h = leverages.ok_or(match variant {
        HcVariant::HC2 => Error::MissingLeverages("HC2"),
        HcVariant::HC3 => Error::MissingLeverages("HC3"),
        _ => Error::MissingLeverages("HC4"),
    })?;
    if h.len() != n {
        return Err(Error::dims("leverages", n, h.len()));
    }
    if let Some(row) = regression::saturated_rows(h).first() {
        return Err(Error::SaturatedLeverage { row: *row, leverage: h[*row] });
    }
    Ok(sq
        .zip(h)
        .map(|(u2, &hi)| {
            let exponent = match variant {
                HcVariant::HC2 => 1.0,
                HcVariant::HC3 => 2.0,
                _ => hc4_rule.exponent(hi, n, k_total),
            };
            u2 / (1.0 - hi).powf(exponent)
        })
        .collect())
}

fn estimate(
    sw: &Sandwich<'_>,
    spec: &EstimatorSpec,
    leverages: Option<&[f64]>,
    dof_params: usize,
    k_total: usize,
    scope: Scope,
) -> Result<CovarianceEstimate> {
    let n = sw.n();
    let (matrix, dof_mode) = match spec {
        EstimatorSpec::Classical => {
            let ssr: f64 = sw.residuals.iter().map(|u| u * u).sum();
            let sigma2 = ssr / residual_dof(n, dof_params)?;
            (sw.gram_inverse.scale(sigma2), DofMode::NMinusK)
        }
        EstimatorSpec::Hc { variant, hc4_rule } => {
            let w = hc_weights(sw.residuals, *variant, leverages, *hc4_rule, dof_params, k_total)?;
            let mode = if *variant == HcVariant::HC1 { DofMode::NMinusK } else { DofMode::None };
            (sw.diagonal(&w), mode)
        }
        EstimatorSpec::Hac(hac) => (sw.hac(hac)?, DofMode::None),
        EstimatorSpec::Cluster { clusters, dof } => {
            let g = clusters.n_clusters() as f64;
            let (factor, mode) = match dof {
                ClusterDof::None => (1.0, DofMode::None),
                ClusterDof::G => (g / (g - 1.0), DofMode::ClusterG),
                ClusterDof::GN => {
                    (g * (n as f64 - 1.0) / ((g - 1.0) * residual_dof(n, dof_params)?), DofMode::ClusterGN)
                }
            };
            (sw.cluster(clusters)?.scale(factor), mode)
        }
    };
    Ok(CovarianceEstimate { matrix, estimator: spec.kind(), dof_mode, scope, dof_params })
}

fn full_sandwich(fit: &RegressionFit) -> Sandwich<'_> {
    Sandwich { x: &fit.design, gram_inverse: &fit.gram_inverse, residuals: fit.residuals.as_slice() }
}

/// `s^2 (X'X)^-1` with `s^2 = u'u / (N - k)`.
pub fn cov_classical(fit: &RegressionFit) -> Result<CovarianceEstimate> {
    estimate(&full_sandwich(fit), &EstimatorSpec::Classical, None, fit.n_params, fit.n_params, Scope::FullRegression)
}

/// HC0-HC4 on a full regression. `leverages` is required for HC2-HC4.
pub fn cov_hc(fit: &RegressionFit, variant: HcVariant, leverages: Option<&[f64]>) -> Result<CovarianceEstimate> {
    cov_hc_with_rule(fit, variant, leverages, Hc4Rule::default())
}

pub fn cov_hc_with_rule(
    fit: &RegressionFit,
    variant: HcVariant,
    leverages: Option<&[f64]>,
    hc4_rule: Hc4Rule,
) -> Result<CovarianceEstimate> {
    estimate(
        &full_sandwich(fit),
        &EstimatorSpec::Hc { variant, hc4_rule },
        leverages,
        fit.n_params,
        fit.n_params,
        Scope::FullRegression,
    )
}

/// Newey-West style HAC; rows are taken to be in time order.
pub fn cov_hac(fit: &RegressionFit, spec: &HacSpec) -> Result<CovarianceEstimate> {
    estimate(
        &full_sandwich(fit),
        &EstimatorSpec::Hac(spec.clone()),
        None,
        fit.n_params,
        fit.n_params,
        Scope::FullRegression,
    )
}

pub fn cov_cluster(fit: &RegressionFit, clusters: &ClusterMap, dof: ClusterDof) -> Result<CovarianceEstimate> {
    estimate(
        &full_sandwich(fit),
        &EstimatorSpec::Cluster { clusters: clusters.clone(), dof },
        None,
        fit.n_params,
        fit.n_params,
        Scope::FullRegression,
    )
}

/// Any estimator on a full regression; leverages are computed from the fit
/// when the estimator needs them.
pub fn cov_full(fit: &RegressionFit, spec: &EstimatorSpec) -> Result<CovarianceEstimate> {
    let h =
        if spec.needs_leverage() { Some(regression::leverages_dense(&fit.design, &fit.gram_inverse)?) } else { None };
    estimate(&full_sandwich(fit), spec, h.as_deref(), fit.n_params, fit.n_params, Scope::FullRegression)
}

/// Covariance of the focus coefficients from partial-regression quantities
/// only: `W1*`, `u~`, `(W1*'W1*)^-1`, plus full-design leverages obtained
/// from the partitioned Gram inverse when the estimator needs them.
///
/// `dof` picks the `k` in `N - k` factors (Classical, HC1, cluster GN). HC4's
/// exponent always uses the full regressor count. `blocks` are computed on
/// demand when the estimator needs leverages and none are supplied.
pub fn partial_cov(
    partial: &PartialFit,
    design: &PartitionedDesign,
    blocks: Option<&GramInverseBlocks>,
    spec: &EstimatorSpec,
    dof: DofBasis,
) -> Result<CovarianceEstimate> {
    if partial.n_obs() != design.n_obs() || partial.k1() != design.k1() || partial.n_controls != design.k2() {
        return Err(Error::dims(
            "partial_cov",
            format!("fit for N = {}, k1 = {}, k2 = {}", design.n_obs(), design.k1(), design.k2()),
            format!("N = {}, k1 = {}, k2 = {}", partial.n_obs(), partial.k1(), partial.n_controls),
        ));
    }
    let h = if spec.needs_leverage() {
        let owned;
        let blocks = match blocks {
            Some(b) => b,
            None => {
                owned = design.gram_inverse_blocks()?;
                &owned
            }
        };
        Some(regression::leverages(design, blocks)?)
    } else {
        None
    };
    let sw = Sandwich { x: &partial.w1_star, gram_inverse: &partial.gram22, residuals: partial.u_tilde.as_slice() };
    let dof_params = match dof {
        DofBasis::Partial => partial.k1(),
        DofBasis::Full => partial.k_full(),
    };
    estimate(&sw, spec, h.as_deref(), dof_params, partial.k_full(), Scope::PartialRegression)
}
