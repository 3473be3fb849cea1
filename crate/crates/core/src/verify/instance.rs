//! Seeded random partitioned designs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::covariance::ClusterMap;
use crate::error::Result;
use crate::linalg::DenseMatrix;
use crate::regression::{InterceptPlacement, PartitionedDesign};

/// Error process used to generate `y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorProcess {
    Iid,
    /// Standard deviation `sqrt(1 + x^2)` in the first non-constant regressor.
    Heteroskedastic,
    /// AR(1) with coefficient 0.5.
    Ar1,
    /// Shared normal effect within each cluster plus idiosyncratic noise.
    ClusterEffects,
}

impl ErrorProcess {
    pub const ALL: [ErrorProcess; 4] =
        [ErrorProcess::Iid, ErrorProcess::Heteroskedastic, ErrorProcess::Ar1, ErrorProcess::ClusterEffects];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceConfig {
    pub n: usize,
    /// Focus columns, including the ones column when the intercept is in focus.
    pub k1: usize,
    /// Control columns, including the ones column when the intercept is in the controls.
    pub k2: usize,
    /// Correlation between each focus column and one control column.
    pub rho: f64,
    pub errors: ErrorProcess,
    pub intercept: InterceptPlacement,
    pub n_clusters: usize,
    /// Blow up the regressors of observation 0 to create a high-leverage row.
    pub high_leverage: bool,
    pub seed: u64,
}

impl InstanceConfig {
    pub fn new(n: usize, k1: usize, k2: usize, seed: u64) -> Self {
        Self {
            n,
            k1,
            k2,
            rho: 0.0,
            errors: ErrorProcess::Iid,
            intercept: InterceptPlacement::InControls,
            n_clusters: (n / 5).clamp(2, 20),
            high_leverage: false,
            seed,
        }
    }
}

/// A generated design with its cluster structure and a description that
/// pins down how to regenerate it.
#[derive(Debug, Clone)]
pub struct Instance {
    pub design: PartitionedDesign,
    pub clusters: ClusterMap,
    pub descriptor: String,
}

fn normals(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

pub fn generate(cfg: &InstanceConfig) -> Result<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.n;
    let rho = cfg.rho.clamp(0.0, 0.999);
    let ones_in_controls = cfg.intercept == InterceptPlacement::InControls;
    let ones_in_focus = cfg.intercept == InterceptPlacement::InFocus;

    let control_free = cfg.k2.saturating_sub(ones_in_controls as usize);
    let focus_free = cfg.k1.saturating_sub(ones_in_focus as usize);

    let mut controls: Vec<Vec<f64>> = (0..control_free).map(|_| normals(&mut rng, n)).collect();
    let mut focus: Vec<Vec<f64>> = (0..focus_free)
        .map(|j| {
            let noise = normals(&mut rng, n);
            if controls.is_empty() {
                return noise;
            }
            let base = &controls[j % controls.len()];
            base.iter().zip(&noise).map(|(c, e)| rho * c + (1.0 - rho * rho).sqrt() * e).collect()
        })
        .collect();
    if cfg.high_leverage {
        for c in controls.iter_mut().chain(focus.iter_mut()) {
            c[0] = 3.0 * c[0] + 3.0 * c[0].signum();
        }
    }

    let assignment: Vec<usize> = (0..n).map(|i| i * cfg.n_clusters / n).collect();
    let clusters = ClusterMap::from_ids(assignment.clone())?;

    let driver = focus.first().or(controls.first()).cloned().unwrap_or_else(|| vec![0.0; n]);
    let raw = normals(&mut rng, n);
    let errors: Vec<f64> = match cfg.errors {
        ErrorProcess::Iid => raw,
        ErrorProcess::Heteroskedastic => raw.iter().zip(&driver).map(|(e, x)| e * (1.0 + x * x).sqrt()).collect(),
        ErrorProcess::Ar1 => {
            let mut out = Vec::with_capacity(n);
            let mut prev = 0.0;
            for e in raw {
                prev = 0.5 * prev + e;
                out.push(prev);
            }
            out
        }
        ErrorProcess::ClusterEffects => {
            let effects = normals(&mut rng, cfg.n_clusters);
            raw.iter().zip(&assignment).map(|(e, g)| e + effects[*g]).collect()
        }
    };

    let ones = vec![1.0; n];
    if ones_in_controls {
        controls.insert(0, ones);
    } else if ones_in_focus {
        focus.insert(0, ones);
    }
    let beta_controls = normals(&mut rng, controls.len());
    let beta_focus = normals(&mut rng, focus.len());
    let y: Vec<f64> = (0..n)
        .map(|i| {
            let c: f64 = controls.iter().zip(&beta_controls).map(|(col, b)| col[i] * b).sum();
            let f: f64 = focus.iter().zip(&beta_focus).map(|(col, b)| col[i] * b).sum();
            c + f + errors[i]
        })
        .collect();

    let design = PartitionedDesign::new(
        DenseMatrix::column_vector(&y)?,
        DenseMatrix::from_columns(&focus)?,
        DenseMatrix::from_columns(&controls)?,
        cfg.intercept,
    )?;
    let descriptor = format!(
        "seed={} N={} k1={} k2={} rho={:.3} errors={:?} intercept={:?} G={}{}",
        cfg.seed,
        n,
        cfg.k1,
        cfg.k2,
        rho,
        cfg.errors,
        cfg.intercept,
        cfg.n_clusters,
        if cfg.high_leverage { " high_leverage" } else { "" }
    );
    Ok(Instance { design, clusters, descriptor })
}
