//! JSON command-line front end.
//!
//! Reads a model document from a file or stdin, writes one JSON document to
//! stdout and machine-readable errors to stderr. Exit code 0 on success, 1 for
//! invalid input or out-of-domain requests, 2 for numerical failures and failed
//! `verify` runs.

use std::io::Read;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::classify::{classify, is_mp_density, Tolerances};
use crate::error::{Error, Result};
use crate::graph::{check_pi2, extremal_graph, factorization_graph};
use crate::hr::{self, GhrParams, PrecisionMatrix, VariogramMatrix};
use crate::linalg::{certify_s1_plus, pseudo_determinant, SymMatrix};
use crate::oracle;
use crate::probe::{homogeneity_scan, residual_grid, PairwiseFamilySpec, Statistic};

pub const PROBE_POINTS: usize = 100;
pub const PROBE_SCALES: [f64; 3] = [1.5, 2.0, 10.0];

#[derive(Debug, Parser)]
#[command(name = "hrpareto", version, about = "Hüsler–Reiss multivariate Pareto toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Relative tolerance for rank and symmetry decisions.
    #[arg(long, global = true, default_value_t = 1e-9)]
    pub tol: f64,

    /// ∞-norm tolerance when matching μ against the Hüsler–Reiss value.
    #[arg(long, global = true, default_value_t = 1e-8)]
    pub mu_tol: f64,

    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Monte Carlo samples per estimator.
    #[arg(long, global = true, default_value_t = 100_000)]
    pub samples: usize,

    /// Model document path; stdin when absent.
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Certify Θ and/or Γ.
    Validate,
    /// Convert between precision and variogram matrices.
    Convert {
        #[arg(long, value_enum)]
        to: Target,
    },
    /// Hüsler–Reiss marginal parameter with diagnostics.
    Mu,
    /// Density / integrable / non-integrable classification.
    Classify,
    /// Unnormalized density at a point.
    Density {
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        point: Vec<f64>,
    },
    /// Closed-form marginal masses and exceedance ratios.
    Marginals,
    /// Monte Carlo total mass and exceedance probabilities.
    Mass,
    /// Extremal graph and connectivity / odd-cycle flags.
    Graph,
    /// Homogeneity residual scan for a pairwise family.
    Probe {
        #[arg(long, default_value = "log")]
        stats: Statistic,
    },
    /// Run the full invariant suite.
    Verify,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Target {
    Gamma,
    Theta,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub d: usize,
    #[serde(default)]
    pub theta: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub gamma: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub mu: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, Serialize)]
struct Settings {
    tol: f64,
    mu_tol: f64,
    seed: u64,
    samples: usize,
}

/// Result of one invocation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub stdout: String,
    pub stderr: String,
    pub code: i32,
}

/// Parses `args` (including the program name) and runs the command,
/// reading the model from `stdin` unless `--input` is given.
pub fn run<I, T>(args: I, stdin: &mut dyn Read) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    Outcome { stdout: e.to_string(), stderr: String::new(), code: 0 }
                }
                _ => error_outcome("UsageError", &e.to_string(), 1),
            };
        }
    };
    let doc = match read_document(&cli, stdin) {
        Ok(doc) => doc,
        Err(e) => return from_error(&e),
    };
    let settings = Settings { tol: cli.tol, mu_tol: cli.mu_tol, seed: cli.seed, samples: cli.samples };
    match execute(&cli.command, &doc, &settings) {
        Ok((mut body, code)) => {
            body.insert("settings".into(), serde_json::to_value(settings).expect("settings serialize"));
            let stdout = format!("{}\n", Value::Object(body));
            let stderr = if code == 0 {
                String::new()
            } else {
                error_json("CheckFailed", "one or more checks failed")
            };
            Outcome { stdout, stderr, code }
        }
        Err(e) => from_error(&e),
    }
}

fn error_json(code: &str, message: &str) -> String {
    format!("{}\n", json!({ "error": { "code": code, "message": message } }))
}

fn error_outcome(code: &str, message: &str, exit: i32) -> Outcome {
    Outcome { stdout: String::new(), stderr: error_json(code, message.trim_end()), code: exit }
}

fn from_error(e: &Error) -> Outcome {
    error_outcome(e.code(), &e.to_string(), if e.is_numerical() { 2 } else { 1 })
}

fn read_document(cli: &Cli, stdin: &mut dyn Read) -> Result<ModelDocument> {
    let text = match &cli.input {
        Some(path) => std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))?,
        None => {
            let mut s = String::new();
            stdin.read_to_string(&mut s).map_err(|e| Error::InvalidInput(format!("cannot read stdin: {e}")))?;
            s
        }
    };
    let doc: ModelDocument =
        serde_json::from_str(&text).map_err(|e| Error::InvalidInput(format!("malformed model document: {e}")))?;
    if doc.theta.is_none() && doc.gamma.is_none() {
        return Err(Error::InvalidInput("model document needs theta or gamma".into()));
    }
    if let Some(mu) = &doc.mu {
        if mu.len() != doc.d {
            return Err(Error::DimensionMismatch { expected: doc.d, got: mu.len() });
        }
    }
    Ok(doc)
}

fn matrix(rows: &[Vec<f64>], d: usize) -> Result<SymMatrix> {
    if rows.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: rows.len() });
    }
    if let Some(r) = rows.iter().find(|r| r.len() != d) {
        return Err(Error::DimensionMismatch { expected: d, got: r.len() });
    }
    SymMatrix::from_rows(rows)
}

/// Θ from the document, converting from Γ when only the variogram is given.
/// When both are present they must describe the same model.
fn precision(doc: &ModelDocument, tol: f64) -> Result<PrecisionMatrix> {
    match (&doc.theta, &doc.gamma) {
        (Some(t), g) => {
            let theta = PrecisionMatrix::with_tol(matrix(t, doc.d)?, tol)?;
            if let Some(g) = g {
                let gamma = VariogramMatrix::new(matrix(g, doc.d)?, tol)?;
                let implied = hr::theta_to_gamma(&theta)?;
                let scale = gamma.matrix().max_abs().max(1.0);
                if implied.matrix().max_abs_diff(gamma.matrix()) > 1e-6 * scale {
                    return Err(Error::InvalidInput("theta and gamma describe different models".into()));
                }
            }
            Ok(theta)
        }
        (None, Some(g)) => hr::gamma_to_theta(&VariogramMatrix::new(matrix(g, doc.d)?, tol)?, tol),
        (None, None) => Err(Error::InvalidInput("model document needs theta or gamma".into())),
    }
}

/// Parameters from the document; μ defaults to the Hüsler–Reiss value.
fn params(doc: &ModelDocument, tol: f64) -> Result<(GhrParams, &'static str)> {
    let theta = precision(doc, tol)?;
    let (mu, source) = match &doc.mu {
        Some(mu) => (mu.clone(), "input"),
        None => (hr::mu_hr(&theta)?, "mu_hr"),
    };
    Ok((GhrParams::new(mu, theta)?, source))
}

fn object(v: impl Serialize) -> Map<String, Value> {
    match serde_json::to_value(v).expect("serializable") {
        Value::Object(m) => m,
        other => {
            let mut m = Map::new();
            m.insert("value".into(), other);
            m
        }
    }
}

fn execute(cmd: &Command, doc: &ModelDocument, s: &Settings) -> Result<(Map<String, Value>, i32)> {
    let tol = s.tol;
    let body = match cmd {
        Command::Validate => return validate(doc, tol),
        Command::Convert { to } => {
            let theta = precision(doc, tol)?;
            match to {
                Target::Gamma => object(json!({ "gamma": hr::theta_to_gamma(&theta)?.matrix().to_rows() })),
                Target::Theta => object(json!({ "theta": theta.matrix().to_rows() })),
            }
        }
        Command::Mu => object(hr::mu_diagnostics(&precision(doc, tol)?)?),
        Command::Classify => {
            let (p, source) = params(doc, tol)?;
            let tols = Tolerances { rank: tol, mu_match: s.mu_tol };
            let mut m = object(classify(&p, &tols)?);
            m.insert("is_mp_density".into(), json!(is_mp_density(&p, &tols)?));
            m.insert("mu_source".into(), json!(source));
            m
        }
        Command::Density { point } => {
            let (p, source) = params(doc, tol)?;
            let log_density = hr::log_density_unnormalized(&p, point)?;
            object(json!({
                "point": point,
                "log_density": log_density,
                "density": log_density.exp(),
                "mu_source": source,
            }))
        }
        Command::Marginals => {
            let (p, source) = params(doc, tol)?;
            let d = p.dim();
            let log_integrals = (0..d).map(|k| hr::log_marginal_integral_k(&p, k)).collect::<Result<Vec<_>>>()?;
            let integrals: Vec<f64> = log_integrals.iter().map(|l| l.exp()).collect();
            let ratios = (0..d)
                .map(|k| (0..d).map(|l| hr::exceedance_ratio(&p, k, l)).collect::<Result<Vec<_>>>())
                .collect::<Result<Vec<_>>>()?;
            let dets = (0..d).map(|k| hr::det_theta_k(p.theta(), k)).collect::<Result<Vec<_>>>()?;
            let pdet = pseudo_determinant(p.theta().matrix(), tol)?;
            object(json!({
                "integrals": integrals,
                "log_integrals": log_integrals,
                "exceedance_ratios": ratios,
                "det_theta_k": dets,
                "pseudo_determinant": pdet,
                "pseudo_determinant_over_det_theta_k": pdet / dets[0],
                "mu_source": source,
            }))
        }
        Command::Mass => {
            let (p, source) = params(doc, tol)?;
            let est = oracle::estimate_total_mass(&p, s.samples, s.seed)?;
            let closed = (0..p.dim()).map(|k| hr::marginal_integral_k(&p, k)).collect::<Result<Vec<_>>>()?;
            let mut m = object(est);
            m.insert("closed_form_integrals".into(), json!(closed));
            m.insert("mu_source".into(), json!(source));
            m
        }
        Command::Graph => {
            let theta = precision(doc, tol)?;
            let g = extremal_graph(&theta, tol);
            let d = theta.dim();
            // The cross difference does not depend on μ.
            let p = GhrParams::new(vec![0.0; d], theta)?;
            let f = factorization_graph(&p, tol)?;
            object(json!({
                "d": d,
                "edges": g.edges_one_based(),
                "pi2": check_pi2(&g),
                "factorization_edges": f.edges_one_based(),
            }))
        }
        Command::Probe { stats } => {
            let (p, source) = params(doc, tol)?;
            let family = PairwiseFamilySpec::uniform(*stats, p.mu().to_vec(), p.theta().matrix().clone())?;
            let grid = residual_grid(p.dim(), PROBE_POINTS, s.seed);
            let scan = homogeneity_scan(&family, &grid, &PROBE_SCALES)?;
            let mut m = object(&scan);
            m.insert("statistic".into(), json!(stats.to_string()));
            m.insert("scales".into(), json!(PROBE_SCALES));
            m.insert("mu_source".into(), json!(source));
            m
        }
        Command::Verify => return verify(doc, s),
    };
    Ok((body, 0))
}

fn validate(doc: &ModelDocument, tol: f64) -> Result<(Map<String, Value>, i32)> {
    let mut out = Map::new();
    let mut reasons: Vec<&str> = Vec::new();
    if let Some(t) = &doc.theta {
        let cert = certify_s1_plus(&matrix(t, doc.d)?, tol)?;
        if !cert.in_s1 {
            reasons.push("NotS1");
        }
        if !cert.in_s1_plus {
            reasons.push("NotS1Plus");
        }
        out.insert("theta".into(), serde_json::to_value(&cert).expect("serializable"));
    }
    if let Some(g) = &doc.gamma {
        let check = VariogramMatrix::check(&matrix(g, doc.d)?, tol)?;
        if !check.zero_diagonal {
            reasons.push("NonZeroDiagonal");
        }
        if !check.positive_off_diagonal {
            reasons.push("NonPositiveOffDiagonal");
        }
        if !check.strictly_cnd {
            reasons.push("NotStrictlyCND");
        }
        out.insert("gamma".into(), serde_json::to_value(check).expect("serializable"));
    }
    let valid = reasons.is_empty();
    out.insert("valid".into(), json!(valid));
    out.insert("reasons".into(), json!(reasons));
    Ok((out, if valid { 0 } else { 1 }))
}

#[derive(Debug, Clone, Serialize)]
struct Check {
    name: &'static str,
    passed: bool,
    value: f64,
    threshold: f64,
}

fn check(name: &'static str, value: f64, threshold: f64) -> Check {
    Check { name, passed: value <= threshold, value, threshold }
}

fn spread(values: &[f64]) -> f64 {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (hi - lo) / hi.abs().max(lo.abs())
}

fn verify(doc: &ModelDocument, s: &Settings) -> Result<(Map<String, Value>, i32)> {
    let theta = precision(doc, s.tol)?;
    let d = theta.dim();
    let mut checks = Vec::new();
    let mut report = Map::new();
    checks.push(check("theta_in_s1_plus", if theta.is_certified_plus() { 0.0 } else { 1.0 }, 0.0));
    if theta.is_certified_plus() {
        let gamma = hr::theta_to_gamma(&theta)?;
        let back = hr::gamma_to_theta(&gamma, s.tol)?;
        checks.push(check("round_trip_max_error", back.matrix().max_abs_diff(theta.matrix()), 1e-8));

        let diag = hr::mu_diagnostics(&theta)?;
        checks.push(check("mu_hr_proportionality", diag.proportionality_residual, 1e-8));
        checks.push(check("mu_hr_shift_sum", (diag.mu_sum - d as f64 - 1.0).abs(), 1e-12 * d as f64));

        let hr_params = GhrParams::new(diag.mu.clone(), theta.clone())?;
        let logs = (0..d).map(|k| hr::log_marginal_integral_k(&hr_params, k)).collect::<Result<Vec<_>>>()?;
        let integrals: Vec<f64> = logs.iter().map(|l| l.exp()).collect();
        checks.push(check("mu_hr_marginal_spread", spread(&integrals), 1e-9));

        let dets = (0..d).map(|k| hr::det_theta_k(&theta, k)).collect::<Result<Vec<_>>>()?;
        checks.push(check("det_theta_k_spread", spread(&dets), 1e-9));
        let pdet = pseudo_determinant(theta.matrix(), s.tol)?;
        report.insert("pseudo_determinant_over_det_theta_k".into(), json!(pdet / dets[0]));

        let family = PairwiseFamilySpec::uniform(Statistic::Log, diag.mu.clone(), theta.matrix().clone())?;
        let scan = homogeneity_scan(&family, &residual_grid(d, PROBE_POINTS, s.seed), &PROBE_SCALES)?;
        checks.push(check("homogeneity_residual", scan.max_residual, 1e-10));

        let tols = Tolerances { rank: s.tol, mu_match: s.mu_tol };
        let agree = (classify(&hr_params, &tols)?.tag == crate::classify::ClassTag::HrDensity)
            == is_mp_density(&hr_params, &tols)?;
        checks.push(check("classify_matches_mp_axioms", if agree { 0.0 } else { 1.0 }, 0.0));

        let g = extremal_graph(&theta, s.tol);
        let f = factorization_graph(&hr_params, s.tol)?;
        checks.push(check("factorization_matches_graph", if g == f { 0.0 } else { 1.0 }, 0.0));

        // Oracle agreement on the input μ when integrable, else on the HR value.
        let oracle_params = match &doc.mu {
            Some(mu) => {
                let p = GhrParams::new(mu.clone(), theta.clone())?;
                if hr::log_marginal_integral_k(&p, 0).is_ok() {
                    p
                } else {
                    hr_params.clone()
                }
            }
            None => hr_params.clone(),
        };
        for k in 0..d {
            let est = oracle::estimate_marginal_mass(&oracle_params, k, s.samples, s.seed)?;
            let closed = hr::marginal_integral_k(&oracle_params, k)?;
            checks.push(check("oracle_marginal_z_score", (est.value - closed).abs() / est.std_error, 4.0));
        }
    }
    let passed = checks.iter().all(|c| c.passed);
    report.insert("passed".into(), json!(passed));
    report.insert("checks".into(), serde_json::to_value(&checks).expect("serializable"));
    Ok((report, if passed { 0 } else { 2 }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str], input: &str) -> Outcome {
        let mut argv = vec!["hrpareto"];
        argv.extend_from_slice(args);
        run(argv, &mut input.as_bytes())
    }

    fn stdout_json(o: &Outcome) -> Value {
        serde_json::from_str(&o.stdout).unwrap()
    }

    const PATH: &str = r#"{"d":3,"theta":[[1,-1,0],[-1,2,-1],[0,-1,1]]}"#;
    const PROJ_LOW: &str =
        r#"{"d":3,"mu":[0.6666666666666666,0.6666666666666666,0.6666666666666666],"theta":[[0.6666666666666667,-0.3333333333333333,-0.3333333333333333],[-0.3333333333333333,0.6666666666666667,-0.3333333333333333],[-0.3333333333333333,-0.3333333333333333,0.6666666666666667]]}"#;

    #[test]
    fn classify_threshold_case() {
        let o = call(&["classify"], PROJ_LOW);
        assert_eq!(o.code, 0, "{}", o.stderr);
        let v = stdout_json(&o);
        assert_eq!(v["tag"], "NonIntegrable");
        assert_eq!(v["reasons"], json!(["LinearMassCondition"]));
        assert!((v["homogeneity_degree"].as_f64().unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(v["settings"]["tol"], json!(1e-9));
        assert_eq!(v["settings"]["samples"], json!(100000));
    }

    #[test]
    fn convert_path_to_gamma() {
        let v = stdout_json(&call(&["convert", "--to", "gamma"], PATH));
        let g = v["gamma"].as_array().unwrap();
        let expect = [[0.0, 1.0, 2.0], [1.0, 0.0, 1.0], [2.0, 1.0, 0.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((g[i][j].as_f64().unwrap() - expect[i][j]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn mu_reports_both_formulas() {
        let v = stdout_json(&call(&["mu"], PATH));
        let mu: Vec<f64> = serde_json::from_value(v["mu"].clone()).unwrap();
        for (a, b) in mu.iter().zip([1.5, 1.0, 1.5]) {
            assert!((a - b).abs() < 1e-10);
        }
        assert!(v["mu_printed_formula"].is_array());
        assert!(v["formulas_agree"].is_boolean());
    }

    #[test]
    fn errors_are_machine_readable() {
        let o = call(&["classify"], "not json");
        assert_eq!(o.code, 1);
        let e: Value = serde_json::from_str(&o.stderr).unwrap();
        assert_eq!(e["error"]["code"], "InvalidInput");

        let o = call(&["density", "--point", "0.5,0.5,0.5"], PATH);
        assert_eq!(o.code, 1);
        let e: Value = serde_json::from_str(&o.stderr).unwrap();
        assert_eq!(e["error"]["code"], "OutsideSupport");

        let o = call(&["frobnicate"], PATH);
        assert_eq!(o.code, 1);
        let e: Value = serde_json::from_str(&o.stderr).unwrap();
        assert_eq!(e["error"]["code"], "UsageError");
    }

    #[test]
    fn graph_output() {
        let v = stdout_json(&call(&["graph"], PATH));
        assert_eq!(v["edges"], json!([[1, 2], [2, 3]]));
        assert_eq!(v["factorization_edges"], json!([[1, 2], [2, 3]]));
        assert_eq!(v["pi2"], json!({ "connected": true, "every_edge_on_odd_cycle": false }));
    }

    #[test]
    fn validate_flags_bad_theta() {
        let o = call(&["validate"], r#"{"d":2,"theta":[[1,0],[0,1]]}"#);
        assert_eq!(o.code, 1);
        let v = stdout_json(&o);
        assert_eq!(v["valid"], false);
        assert_eq!(v["reasons"], json!(["NotS1", "NotS1Plus"]));
        let o = call(&["validate"], r#"{"d":3,"gamma":[[0,1,2],[1,0,1],[2,1,0]]}"#);
        assert_eq!(o.code, 0);
    }

    #[test]
    fn output_is_byte_identical_across_runs() {
        let args = ["mass", "--samples", "5000", "--seed", "3"];
        assert_eq!(call(&args, PATH), call(&args, PATH));
    }
}
