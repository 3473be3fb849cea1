//! End-to-end acceptance run: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the lines always reach the terminal;
//! exits non-zero when any criterion fails.

use std::path::PathBuf;
use std::process::{Command, ExitCode};
use std::time::Instant;

use yfwl_core::verify::suite::{gram_condition, suite_instance, CRAMER_MAX_CONDITION};
use yfwl_core::verify::{
    check_block_relation, check_cov_equivalence, check_cramer_agreement, check_leverages, check_lovell_identities,
    check_projection_decomposition, check_yule_identity, max_hc4_ratio, single_focus, SuiteConfig,
};
use yfwl_core::{ClusterDof, EquivalenceReport, Error, EstimatorSpec, HacSpec, HcVariant};

type Outcome = Result<String, String>;

/// Aggregates reports into a one-line outcome.
#[derive(Default)]
struct Tally {
    checked: usize,
    worst_rel: f64,
    worst_abs: f64,
    failures: Vec<String>,
}

impl Tally {
    fn add(&mut self, r: EquivalenceReport) {
        self.checked += 1;
        self.worst_rel = self.worst_rel.max(r.max_rel_err);
        self.worst_abs = self.worst_abs.max(r.max_abs_err);
        if !r.passed {
            self.failures.push(format!("{} [{}]", r.identity_name, r.instance_descriptor));
        }
    }

    fn outcome(&self, what: &str) -> Outcome {
        let msg = format!(
            "{what}: {} checks, worst rel {:.2e}, worst abs {:.2e}",
            self.checked, self.worst_rel, self.worst_abs
        );
        if self.failures.is_empty() && self.checked > 0 {
            Ok(msg)
        } else {
            Err(format!(
                "{msg}; {} failed, first: {}",
                self.failures.len(),
                self.failures.first().map_or("none", |s| s)
            ))
        }
    }
}

fn base() -> SuiteConfig {
    SuiteConfig::default()
}

fn criterion_1_2_3() -> (Outcome, Outcome, Outcome) {
    let cfg = base();
    let (mut coef, mut resid, mut yule) = (Tally::default(), Tally::default(), Tally::default());
    let mut native_k1 = 0;
    let start = Instant::now();
    for i in 0..cfg.instances {
        let inst = suite_instance(&cfg, i, cfg.n).expect("instance");
        let (c, r) = check_lovell_identities(&inst.design, 1e-9).expect("lovell");
        coef.add(c.with_descriptor(&inst.descriptor));
        resid.add(r.with_descriptor(&inst.descriptor));
        // k1 = 1 instances directly; the rest reduced to one focus column
        let d = if inst.design.k1() == 1 {
            native_k1 += 1;
            inst.design.clone()
        } else {
            single_focus(&inst.design, inst.design.k1() - 1).expect("single focus")
        };
        yule.add(check_yule_identity(&d, 1e-9).expect("yule").with_descriptor(&inst.descriptor));
    }
    let secs = start.elapsed().as_secs_f64();
    let mut c1 = coef.outcome("coefficient identity, N=200, rho<=0.9");
    c1 = match c1 {
        Ok(m) if secs < 5.0 => Ok(format!("{m}, {secs:.2} s")),
        Ok(m) => Err(format!("{m}, runtime {secs:.2} s exceeds 5 s")),
        Err(m) => Err(m),
    };
    let c3 = yule.outcome(&format!("Yule slope ({native_k1} native k1=1 instances, rest reduced)"));
    (c1, resid.outcome("residual identity"), c3)
}

fn criterion_4() -> Outcome {
    let cfg = base();
    let mut t = Tally::default();
    for i in 0..20 {
        let inst = suite_instance(&cfg, i, 50).expect("instance");
        t.add(
            check_projection_decomposition(&inst.design, 1e-10).expect("projection").with_descriptor(&inst.descriptor),
        );
    }
    t.outcome("projection decomposition, 20 instances, N=50, atol 1e-10")
}

fn criterion_5() -> Outcome {
    let cfg = base();
    let mut t = Tally::default();
    for i in 0..50 {
        let inst = suite_instance(&cfg, i, cfg.n).expect("instance");
        let mut specs =
            vec![EstimatorSpec::Classical, EstimatorSpec::hc(HcVariant::HC0), EstimatorSpec::hc(HcVariant::HC1)];
        specs.extend([0, 1, 3].map(|l| EstimatorSpec::Hac(HacSpec::bartlett(l))));
        specs.extend(
            [ClusterDof::None, ClusterDof::G, ClusterDof::GN]
                .map(|dof| EstimatorSpec::Cluster { clusters: inst.clusters.clone(), dof }),
        );
        for spec in &specs {
            t.add(check_cov_equivalence(&inst.design, spec, 1e-9).expect("cov").with_descriptor(&inst.descriptor));
        }
        t.add(check_block_relation(&inst.design, 1e-9).expect("block").with_descriptor(&inst.descriptor));
    }
    t.outcome("classical/HC0/HC1/HAC(0,1,3)/cluster(none,g,gn), 50 instances, rtol 1e-9")
}

fn criterion_6() -> Outcome {
    let cfg = base();
    let mut t = Tally::default();
    let mut max_delta: f64 = 0.0;
    for i in 0..50 {
        let inst = suite_instance(&cfg, i, cfg.n).expect("instance");
        for v in [HcVariant::HC2, HcVariant::HC3, HcVariant::HC4] {
            t.add(
                check_cov_equivalence(&inst.design, &EstimatorSpec::hc(v), 1e-10)
                    .expect("cov")
                    .with_descriptor(&inst.descriptor),
            );
        }
        if inst.descriptor.contains("high_leverage") {
            max_delta = max_delta.max(max_hc4_ratio(&inst.design).expect("ratio"));
        }
    }
    match t.outcome("HC2/HC3/HC4, 50 instances, rtol 1e-10") {
        Ok(m) if max_delta > 4.0 => Ok(format!("{m}, max N h/k = {max_delta:.2} on high-leverage rows")),
        Ok(m) => Err(format!("{m}, but max N h/k = {max_delta:.2} never exceeds 4")),
        Err(m) => Err(m),
    }
}

fn criterion_7() -> Outcome {
    let cfg = SuiteConfig { max_k1: 3, max_k2: 3, ..base() };
    let mut t = Tally::default();
    let (mut skipped_cond, mut skipped_singular) = (0, 0);
    let mut i = 0;
    while t.checked < 50 && i < 1000 {
        let inst = suite_instance(&cfg, i, cfg.n).expect("instance");
        i += 1;
        if gram_condition(&inst.design).expect("cond") >= CRAMER_MAX_CONDITION {
            skipped_cond += 1;
            continue;
        }
        match check_cramer_agreement(&inst.design, 1e-8) {
            Ok(r) => t.add(r.with_descriptor(&inst.descriptor)),
            Err(Error::SingularSystem { .. }) => skipped_singular += 1,
            Err(e) => panic!("cramer: {e}"),
        }
    }
    let what = format!(
        "Cramer vs Cholesky, k<=6, cond<1e6 ({skipped_cond} skipped on condition, {skipped_singular} singular)"
    );
    if t.checked < 50 {
        return Err(format!("only {} eligible instances", t.checked));
    }
    t.outcome(&what)
}

fn criterion_8() -> Outcome {
    let cfg = base();
    let (mut diag, mut trace) = (Tally::default(), Tally::default());
    for i in 0..50 {
        let inst = suite_instance(&cfg, i, 100).expect("instance");
        let (d, tr) = check_leverages(&inst.design, 1e-10, 1e-8).expect("leverage");
        diag.add(d.with_descriptor(&inst.descriptor));
        trace.add(tr.with_descriptor(&inst.descriptor));
    }
    let a = diag.outcome("leverage blocks vs dense hat diagonal, N=100, atol 1e-10");
    let b = trace.outcome("trace = k, atol 1e-8");
    match (a, b) {
        (Ok(a), Ok(b)) => Ok(format!("{a}; {b}")),
        (a, b) => Err(format!("{}; {}", a.unwrap_or_else(|e| e), b.unwrap_or_else(|e| e))),
    }
}

fn yfwl() -> Command {
    Command::new(env!("CARGO_BIN_EXE_yfwl"))
}

fn criterion_9() -> Outcome {
    let out = yfwl()
        .args(["bench", "--n", "2000", "--k1", "500", "--k2", "500", "--seed", "42", "--repeats", "3"])
        .output()
        .expect("run bench");
    if !out.status.success() {
        return Err(format!("bench exited {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr)));
    }
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).expect("bench json");
    let ratio = v["ratio"].as_f64().unwrap_or(f64::NAN);
    let disc = v["max_coef_discrepancy"].as_f64().unwrap_or(f64::NAN);
    let msg = format!(
        "N=2000 k1=k2=500: full {:.3} s, partial {:.3} s, ratio {ratio:.3}{}, coefficient discrepancy {disc:.2e}",
        v["full_seconds"].as_f64().unwrap_or(f64::NAN),
        v["partial_seconds"].as_f64().unwrap_or(f64::NAN),
        if ratio <= 0.8 { "" } else { " (above 0.8, informational)" },
    );
    if disc <= 1e-8 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

/// Estimator flag sets exercised against the fixture, with the name of the
/// expected-output file.
fn fixture_cases() -> Vec<(&'static str, Vec<&'static str>)> {
    vec![
        ("classical", vec!["--estimator", "classical"]),
        ("hc0", vec!["--estimator", "hc0"]),
        ("hc1", vec!["--estimator", "hc1"]),
        ("hc2", vec!["--estimator", "hc2"]),
        ("hc3", vec!["--estimator", "hc3"]),
        ("hc4", vec!["--estimator", "hc4"]),
        ("hac2", vec!["--estimator", "hac", "--hac-bandwidth", "2"]),
        ("cluster_none", vec!["--estimator", "cluster", "--cluster-col", "firm", "--cluster-dof", "none"]),
        ("cluster_g", vec!["--estimator", "cluster", "--cluster-col", "firm", "--cluster-dof", "g"]),
        ("cluster_gn", vec!["--estimator", "cluster", "--cluster-col", "firm", "--cluster-dof", "gn"]),
    ]
}

fn fit_fixture(extra: &[&str], check: bool) -> std::process::Output {
    let input = fixture_dir().join("panel.csv");
    let mut cmd = yfwl();
    cmd.args(["fit", "--input"]).arg(&input).args(["--focus", "x1,x2", "--controls", "c1,c2"]).args(extra);
    if check {
        cmd.arg("--check");
    }
    cmd.output().expect("run fit")
}

fn criterion_10() -> Outcome {
    let bless = std::env::var_os("YFWL_BLESS").is_some();
    let mut problems = Vec::new();
    let cases = fixture_cases();
    for (name, extra) in &cases {
        let checked = fit_fixture(extra, true);
        if checked.status.code() != Some(0) {
            problems.push(format!("{name}: --check exited {:?}", checked.status.code()));
            continue;
        }
        let plain = fit_fixture(extra, false);
        let again = fit_fixture(extra, false);
        if plain.stdout != again.stdout {
            problems.push(format!("{name}: output differs between runs"));
        }
        let expected_path = fixture_dir().join("expected").join(format!("{name}.json"));
        if bless {
            std::fs::create_dir_all(expected_path.parent().unwrap()).unwrap();
            std::fs::write(&expected_path, &plain.stdout).unwrap();
        }
        match std::fs::read(&expected_path) {
            Ok(expected) if expected == plain.stdout => {}
            Ok(_) => problems.push(format!("{name}: output differs from {}", expected_path.display())),
            Err(e) => problems.push(format!("{name}: {e}")),
        }
    }
    let msg = format!("fixture fit for {} estimator settings, --check exit 0, byte-identical JSON", cases.len());
    if problems.is_empty() {
        Ok(msg)
    } else {
        Err(format!("{msg}: {}", problems.join("; ")))
    }
}

fn main() -> ExitCode {
    let (c1, c2, c3) = criterion_1_2_3();
    let results = vec![
        c1,
        c2,
        c3,
        criterion_4(),
        criterion_5(),
        criterion_6(),
        criterion_7(),
        criterion_8(),
        criterion_9(),
        criterion_10(),
    ];
    let mut failed = 0;
    for (i, r) in results.iter().enumerate() {
        match r {
            Ok(m) => println!("criterion {:>2}: PASS  {m}", i + 1),
            Err(m) => {
                failed += 1;
                println!("criterion {:>2}: FAIL  {m}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
