//! `fit` and `verify`.

use std::io::Write;

use serde_json::{json, Map, Value};
use yfwl_core::verify::{check_cov_equivalence, check_lovell_identities, run_suite, SuiteConfig, Tolerance};
use yfwl_core::{
    cov_full, full_fit, fwl_fit, partial_cov, ClusterDof, ClusterMap, DenseMatrix, DofBasis, EquivalenceReport, Error,
    EstimatorSpec, HacSpec, Hc4Rule, HcVariant, InterceptPlacement, PartitionedDesign,
};

use crate::data::Table;
use crate::error::CliError;
use crate::output::{num, nums};
use crate::{ClusterDofArg, EstimatorArg, FitArgs, Format, Hc4RuleArg, InterceptArg, VerifyArgs};

/// Relative tolerance of the `--check` comparisons.
pub const CHECK_RTOL: f64 = 1e-9;

pub const INTERCEPT_NAME: &str = "(intercept)";

/// Builds the estimator from parsed flags. `clusters` must be present for
/// the cluster estimator.
pub fn estimator_spec(
    estimator: EstimatorArg,
    n_obs: usize,
    hac_bandwidth: Option<usize>,
    clusters: Option<ClusterMap>,
    cluster_dof: ClusterDofArg,
    hc4_rule: Hc4RuleArg,
) -> Result<EstimatorSpec, CliError> {
    let hc = |variant| EstimatorSpec::Hc {
        variant,
        hc4_rule: match hc4_rule {
            Hc4RuleArg::Max => Hc4Rule::Max,
            Hc4RuleArg::Min => Hc4Rule::Min,
        },
    };
    Ok(match estimator {
        EstimatorArg::Classical => EstimatorSpec::Classical,
        EstimatorArg::Hc0 => hc(HcVariant::HC0),
        EstimatorArg::Hc1 => hc(HcVariant::HC1),
        EstimatorArg::Hc2 => hc(HcVariant::HC2),
        EstimatorArg::Hc3 => hc(HcVariant::HC3),
        EstimatorArg::Hc4 => hc(HcVariant::HC4),
        EstimatorArg::Hac => {
            let bandwidth = hac_bandwidth.unwrap_or_else(|| HacSpec::default_bandwidth(n_obs));
            if bandwidth >= n_obs {
                return Err(CliError::Input(format!("--hac-bandwidth {bandwidth} must be below N = {n_obs}")));
            }
            EstimatorSpec::Hac(HacSpec::bartlett(bandwidth))
        }
        EstimatorArg::Cluster => EstimatorSpec::Cluster {
            clusters: clusters.ok_or_else(|| CliError::Input("--estimator cluster needs --cluster-col".into()))?,
            dof: match cluster_dof {
                ClusterDofArg::None => ClusterDof::None,
                ClusterDofArg::G => ClusterDof::G,
                ClusterDofArg::Gn => ClusterDof::GN,
            },
        },
    })
}

fn validate_flags(args: &FitArgs) -> Result<(), CliError> {
    let is = |e| args.estimator == e;
    if args.hac_bandwidth.is_some() && !is(EstimatorArg::Hac) {
        return Err(CliError::Input("--hac-bandwidth only applies to --estimator hac".into()));
    }
    if args.cluster_col.is_some() != is(EstimatorArg::Cluster) {
        return Err(CliError::Input("--cluster-col is required by, and only valid with, --estimator cluster".into()));
    }
    if args.cluster_dof.is_some() && !is(EstimatorArg::Cluster) {
        return Err(CliError::Input("--cluster-dof only applies to --estimator cluster".into()));
    }
    if args.hc4_rule.is_some() && !is(EstimatorArg::Hc4) {
        return Err(CliError::Input("--hc4-rule only applies to --estimator hc4".into()));
    }
    let mut seen = std::collections::HashSet::new();
    for name in std::iter::once(&args.outcome).chain(&args.focus).chain(&args.controls) {
        if name.is_empty() {
            return Err(CliError::Input("empty column name in --focus or --controls".into()));
        }
        if !seen.insert(name) {
            return Err(CliError::Input(format!("column `{name}` is used more than once")));
        }
    }
    Ok(())
}

fn columns(table: &Table, names: &[String]) -> Result<DenseMatrix, CliError> {
    let cols = names.iter().map(|n| table.numeric(n)).collect::<Result<Vec<_>, _>>()?;
    if cols.is_empty() {
        return Ok(DenseMatrix::zeros(table.n_rows(), 0));
    }
    Ok(DenseMatrix::from_columns(&cols)?)
}

/// Shape problems in the user's design are input errors; rank problems are
/// numeric ones.
fn design_error(e: Error) -> CliError {
    match e {
        Error::DimensionMismatch { .. } | Error::InvalidDesign(_) => CliError::Input(e.to_string()),
        other => CliError::Numeric(other),
    }
}

/// Everything `fit` prints, before formatting.
pub struct FitOutput {
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub standard_errors: Vec<f64>,
    pub covariance: DenseMatrix,
    pub estimator: String,
    pub n_obs: usize,
    pub k1: usize,
    pub k2: usize,
    pub warnings: Vec<String>,
    pub check: Option<Vec<EquivalenceReport>>,
}

impl FitOutput {
    pub fn check_passed(&self) -> bool {
        self.check.as_ref().is_none_or(|r| r.iter().all(|r| r.passed))
    }

    pub fn to_json(&self) -> Value {
        let named = |values: &[f64]| {
            let mut m = Map::new();
            for (name, v) in self.names.iter().zip(values) {
                m.insert(name.clone(), num(*v));
            }
            Value::Object(m)
        };
        let covariance: Vec<Value> = (0..self.covariance.rows()).map(|i| nums(self.covariance.row(i))).collect();
        let check = match &self.check {
            None => Value::Null,
            Some(reports) => {
                let reports: Vec<Value> = reports
                    .iter()
                    .map(|r| {
                        json!({
                            "identity_name": r.identity_name,
                            "passed": r.passed,
                            "max_abs_err": num(r.max_abs_err),
                            "max_rel_err": num(r.max_rel_err),
                            "tolerance_used": num(r.tolerance_used),
                        })
                    })
                    .collect();
                json!({ "passed": self.check_passed(), "reports": reports })
            }
        };
        json!({
            "coefficients": named(&self.coefficients),
            "standard_errors": named(&self.standard_errors),
            "covariance": covariance,
            "estimator": self.estimator,
            "n_obs": self.n_obs,
            "k1": self.k1,
            "k2": self.k2,
            "check": check,
        })
    }

    pub fn to_table(&self) -> String {
        let mut out =
            format!("estimator: {}   N = {}   k1 = {}   k2 = {}\n", self.estimator, self.n_obs, self.k1, self.k2);
        let width = self.names.iter().map(|n| n.len()).max().unwrap_or(0).max(4);
        out.push_str(&format!("{:<width$}  {:>20}  {:>20}\n", "name", "coefficient", "std. error"));
        for ((name, b), se) in self.names.iter().zip(&self.coefficients).zip(&self.standard_errors) {
            out.push_str(&format!("{name:<width$}  {b:>20.12e}  {se:>20.12e}\n"));
        }
        if let Some(reports) = &self.check {
            for r in reports {
                out.push_str(&format!(
                    "check {:<32} {}  max_abs_err = {:.3e}  tolerance = {:.3e}\n",
                    r.identity_name,
                    if r.passed { "PASS" } else { "FAIL" },
                    r.max_abs_err,
                    r.tolerance_used
                ));
            }
        }
        out
    }
}

pub fn run_fit(args: &FitArgs) -> Result<FitOutput, CliError> {
    validate_flags(args)?;
    let table = Table::read(&args.input)?;
    let y = DenseMatrix::column_vector(&table.numeric(&args.outcome)?)?;
    let focus = columns(&table, &args.focus)?;
    let controls = columns(&table, &args.controls)?;
    let placement = match args.intercept {
        InterceptArg::Controls => InterceptPlacement::InControls,
        InterceptArg::Focus => InterceptPlacement::InFocus,
        InterceptArg::None => InterceptPlacement::Absent,
    };
    let design = PartitionedDesign::with_intercept(y, focus, controls, placement).map_err(design_error)?;

    let clusters = match &args.cluster_col {
        Some(col) => Some(ClusterMap::from_labels(&table.labels(col)?).map_err(|e| CliError::Input(e.to_string()))?),
        None => None,
    };
    let spec = estimator_spec(
        args.estimator,
        design.n_obs(),
        args.hac_bandwidth,
        clusters,
        args.cluster_dof.unwrap_or_default(),
        args.hc4_rule.unwrap_or_default(),
    )?;

    let partial = fwl_fit(&design)?;
    let cov = partial_cov(&partial, &design, None, &spec, DofBasis::Full)?;

    let mut names = Vec::with_capacity(design.k1());
    if placement == InterceptPlacement::InFocus {
        names.push(INTERCEPT_NAME.to_string());
    }
    names.extend(args.focus.iter().cloned());

    let mut warnings: Vec<String> = partial.diagnostics.warning.iter().cloned().collect();
    let check = if args.check {
        let full = full_fit(&design)?;
        warnings.extend(full.diagnostics.warning.iter().cloned());
        let (coef, resid) = check_lovell_identities(&design, CHECK_RTOL)?;
        let full_block = cov_full(&full, &spec)?.focus_block(design.k1());
        let reported = EquivalenceReport::compare(
            format!("reported_covariance[{}]", spec.label()),
            &full_block,
            &cov.matrix,
            Tolerance::Relative(CHECK_RTOL),
        )?;
        let relation = check_cov_equivalence(&design, &spec, CHECK_RTOL)?;
        Some(vec![coef, resid, reported, relation])
    } else {
        None
    };

    Ok(FitOutput {
        names,
        coefficients: partial.b1_tilde.as_slice().to_vec(),
        standard_errors: cov.standard_errors(),
        covariance: cov.matrix.clone(),
        estimator: spec.label(),
        n_obs: design.n_obs(),
        k1: design.k1(),
        k2: design.k2(),
        warnings,
        check,
    })
}

pub fn fit(args: &FitArgs) -> Result<(), CliError> {
    let out = run_fit(args)?;
    for w in &out.warnings {
        eprintln!("warning: {w}");
    }
    match args.format {
        Format::Json => println!("{}", serde_json::to_string_pretty(&out.to_json()).expect("json serializes")),
        Format::Table => print!("{}", out.to_table()),
    }
    if !out.check_passed() {
        let failed: Vec<_> =
            out.check.iter().flatten().filter(|r| !r.passed).map(|r| r.identity_name.as_str()).collect();
        return Err(CliError::CheckFailed(failed.join(", ")));
    }
    Ok(())
}

pub fn verify(args: &VerifyArgs) -> Result<(), CliError> {
    if args.instances == 0 {
        return Err(CliError::Input("--instances must be at least 1".into()));
    }
    if !(0.0..1.0).contains(&args.rho) {
        return Err(CliError::Input(format!("--rho must lie in [0, 1), got {}", args.rho)));
    }
    if let Some(t) = args.tolerance {
        if !(t.is_finite() && t > 0.0) {
            return Err(CliError::Input(format!("--tolerance must be positive, got {t}")));
        }
    }
    let cfg = SuiteConfig {
        seed: args.seed,
        instances: args.instances,
        n: args.n,
        rho_max: args.rho,
        tolerance: args.tolerance,
        ..SuiteConfig::default()
    };
    if cfg.n <= cfg.max_k1 + cfg.max_k2 {
        return Err(CliError::Input(format!("--n must exceed {} (largest generated design)", cfg.max_k1 + cfg.max_k2)));
    }
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    let mut io_err = None;
    let summary = run_suite(&cfg, |r| {
        let line = match args.format {
            Format::Json => r.to_json_line(),
            Format::Table => format!(
                "{} {:<28} max_rel_err = {:.3e}  {}",
                if r.passed { "PASS" } else { "FAIL" },
                r.identity_name,
                r.max_rel_err,
                r.instance_descriptor
            ),
        };
        if let Err(e) = writeln!(lock, "{line}") {
            io_err.get_or_insert(e);
        }
    })?;
    drop(lock);
    if let Some(e) = io_err {
        return Err(CliError::Input(format!("writing reports: {e}")));
    }
    for (name, (total, failed)) in &summary.by_identity {
        eprintln!("{name:<32} {:>5} checked {:>5} failed", total, failed);
    }
    eprintln!("total {} checked, {} failed", summary.total, summary.failed);
    if !summary.all_passed() {
        return Err(CliError::CheckFailed(format!("{} of {} checks failed", summary.failed, summary.total)));
    }
    Ok(())
}
