//! `bench`: full k x k path against the partitioned path on one generated
//! instance.

use std::time::Instant;

use serde_json::json;
use yfwl_core::verify::{generate, InstanceConfig};
use yfwl_core::{cov_full, fwl_fit, ols_fit, partial_cov, DenseMatrix, DofBasis, EstimatorSpec, PartitionedDesign};

use crate::commands::estimator_spec;
use crate::error::CliError;
use crate::output::num;
use crate::{BenchArgs, ClusterDofArg, Format, Hc4RuleArg};

#[derive(Debug, Clone)]
pub struct BenchResult {
    pub n: usize,
    pub k1: usize,
    pub k2: usize,
    pub estimator: String,
    pub seed: u64,
    pub repeats: usize,
    pub full_seconds: f64,
    pub partial_seconds: f64,
    pub max_coef_discrepancy: f64,
    pub max_cov_discrepancy: f64,
}

impl BenchResult {
    pub fn ratio(&self) -> f64 {
        self.partial_seconds / self.full_seconds
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "n": self.n,
            "k1": self.k1,
            "k2": self.k2,
            "estimator": self.estimator,
            "seed": self.seed,
            "repeats": self.repeats,
            "full_seconds": num(self.full_seconds),
            "partial_seconds": num(self.partial_seconds),
            "ratio": num(self.ratio()),
            "max_coef_discrepancy": num(self.max_coef_discrepancy),
            "max_cov_discrepancy": num(self.max_cov_discrepancy),
        })
    }
}

/// Rough peak working set of both paths, in f64s.
fn working_set(n: usize, k: usize) -> usize {
    n.saturating_mul(k)
        .saturating_mul(6)
        .saturating_add(k.saturating_mul(k).saturating_mul(4))
        .saturating_add(n.saturating_mul(4))
}

fn reserve(n: usize, k: usize) -> Result<(), CliError> {
    let words = working_set(n, k);
    let mut probe: Vec<f64> = Vec::new();
    probe
        .try_reserve_exact(words)
        .map_err(|_| CliError::OutOfMemory(format!("N = {n}, k = {k} needs about {} MiB", words / (1 << 17))))
}

fn full_path(design: &PartitionedDesign, spec: &EstimatorSpec) -> Result<(DenseMatrix, DenseMatrix), CliError> {
    let fit = ols_fit(&design.full_design(), design.y())?;
    let k = design.k();
    let b1 = fit.coefficients.block(k - design.k1()..k, 0..1);
    let cov = cov_full(&fit, spec)?.focus_block(design.k1());
    Ok((b1, cov))
}

fn partial_path(design: &PartitionedDesign, spec: &EstimatorSpec) -> Result<(DenseMatrix, DenseMatrix), CliError> {
    let partial = fwl_fit(design)?;
    let cov = partial_cov(&partial, design, None, spec, DofBasis::Full)?.matrix;
    Ok((partial.b1_tilde, cov))
}

pub fn run_bench(args: &BenchArgs) -> Result<BenchResult, CliError> {
    if args.k1 == 0 || args.k2 == 0 {
        return Err(CliError::Input("--k1 and --k2 must be at least 1".into()));
    }
    if args.n <= args.k1 + args.k2 {
        return Err(CliError::Input(format!("--n must exceed k1 + k2 = {}", args.k1 + args.k2)));
    }
    if args.repeats == 0 {
        return Err(CliError::Input("--repeats must be at least 1".into()));
    }
    reserve(args.n, args.k1 + args.k2)?;
    let inst = generate(&InstanceConfig::new(args.n, args.k1, args.k2, args.seed))?;
    let spec = estimator_spec(
        args.estimator,
        args.n,
        None,
        Some(inst.clusters.clone()),
        ClusterDofArg::None,
        Hc4RuleArg::Max,
    )?;
    let design = &inst.design;

    let mut full_seconds = f64::INFINITY;
    let mut partial_seconds = f64::INFINITY;
    let mut full = None;
    let mut partial = None;
    for _ in 0..args.repeats {
        let t = Instant::now();
        full = Some(full_path(design, &spec)?);
        full_seconds = full_seconds.min(t.elapsed().as_secs_f64());
        let t = Instant::now();
        partial = Some(partial_path(design, &spec)?);
        partial_seconds = partial_seconds.min(t.elapsed().as_secs_f64());
    }
    let (b_full, v_full) = full.expect("at least one repeat");
    let (b_part, v_part) = partial.expect("at least one repeat");
    let cov_scale = v_full.max_abs().max(v_part.max_abs());
    let cov_abs = v_full.max_abs_diff(&v_part)?;
    Ok(BenchResult {
        n: args.n,
        k1: args.k1,
        k2: args.k2,
        estimator: spec.label(),
        seed: args.seed,
        repeats: args.repeats,
        full_seconds,
        partial_seconds,
        max_coef_discrepancy: b_full.max_abs_diff(&b_part)?,
        max_cov_discrepancy: if cov_scale > 0.0 { cov_abs / cov_scale } else { 0.0 },
    })
}

pub fn run(args: &BenchArgs) -> Result<(), CliError> {
    let r = run_bench(args)?;
    match args.format {
        Format::Json => println!("{}", serde_json::to_string_pretty(&r.to_json()).expect("json serializes")),
        Format::Table => println!(
            "N = {}  k1 = {}  k2 = {}  estimator = {}\nfull    {:.4} s\npartial {:.4} s\nratio   {:.3}\nmax |b1 - b1~| = {:.3e}\nmax relative covariance discrepancy = {:.3e}",
            r.n, r.k1, r.k2, r.estimator, r.full_seconds, r.partial_seconds, r.ratio(), r.max_coef_discrepancy, r.max_cov_discrepancy
        ),
    }
    Ok(())
}
