//! Experiment dispatch and report emission.
//!
//! Runs the experiments of a parsed program, writing one JSON record per
//! experiment (plus CSV convergence traces for the averaging commands) and
//! returning a human-readable summary. Output is deterministic for a fixed
//! seed: floats are rounded to 12 significant digits before serialization
//! and files are written atomically.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde_json::{json, Value};

use crate::averaging::{self, FolnerSchedule, PrimeSieve};
use crate::dsl::{print_expr, Command, DslProgram};
use crate::glf_ast::GlfExpr;
use crate::joint::{self, CheckOptions, Decision};
use crate::number_field::DEFAULT_REFINEMENT_BUDGET;
use crate::spectral;
use crate::systems::{CharacterSum, GlSeq, SystemSpec};
use crate::torus;

#[derive(Debug)]
pub enum RunError {
    Io(std::io::Error),
    Exec(String),
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Io(e) => write!(f, "io error: {e}"),
            RunError::Exec(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e)
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub seed: u64,
    pub n_override: Option<u64>,
    pub folner: FolnerSchedule,
    pub freq_cutoff: Option<i64>,
    pub out_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            n_override: None,
            folner: FolnerSchedule::Forward,
            freq_cutoff: None,
            out_dir: None,
        }
    }
}

pub struct RunOutcome {
    pub summary: String,
    pub exit_code: i32,
    /// (file name, contents) pairs, also written to `out_dir` when set
    pub artifacts: Vec<(String, String)>,
}

/// Rounds to 12 significant digits for byte-stable serialization.
pub fn round_sig(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

fn complex_json(v: Complex64) -> Value {
    json!({ "re": round_sig(v.re), "im": round_sig(v.im) })
}

fn trace_csv(rows: &[(u64, Complex64, f64)]) -> String {
    let mut out = String::from("N,estimate_re,estimate_im,error_proxy\n");
    for (n, v, e) in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            n,
            round_sig(v.re),
            round_sig(v.im),
            round_sig(*e)
        ));
    }
    out
}

fn checkpoints(n: u64) -> Vec<u64> {
    [n / 8, n / 4, n / 2, n]
        .into_iter()
        .filter(|&x| x > 0)
        .collect()
}

pub fn run(program: &DslProgram, cfg: &RunConfig) -> Result<RunOutcome, RunError> {
    let mut summary = String::new();
    let mut artifacts: Vec<(String, String)> = Vec::new();
    let mut exit_code = 0i32;
    let mut report_records: Vec<Value> = Vec::new();

    for exp in &program.experiments {
        let n_default = cfg.n_override.or(exp.n).unwrap_or(100_000);
        let mut opts = CheckOptions::default();
        if let Some(c) = cfg.freq_cutoff.or(exp.cutoff) {
            opts.freq_cutoff = c;
        }
        let record = match &exp.command {
            Command::Decompose(e) => run_decompose(&exp.name, e)?,
            Command::Rep(e) => run_rep(&exp.name, e)?,
            Command::Limit { beta, of } => {
                let (rec, trace) = run_limit(&exp.name, beta, of, n_default)?;
                artifacts.push((format!("{}_trace.csv", exp.name), trace));
                rec
            }
            Command::Density { of, lo, hi } => {
                let (rec, trace) = run_density(&exp.name, of, lo, hi, &cfg.folner, n_default)?;
                artifacts.push((format!("{}_trace.csv", exp.name), trace));
                rec
            }
            Command::CheckJoint { system, seqs } => {
                let sys = program
                    .system(system)
                    .ok_or_else(|| RunError::Exec(format!("unknown system {system}")))?;
                let (rec, code) = run_check_joint(
                    &exp.name,
                    sys,
                    seqs,
                    exp.chars.as_deref(),
                    &cfg.folner,
                    n_default,
                    &opts,
                )?;
                exit_code = exit_code.max(code);
                rec
            }
            Command::PrimeAvg { system, seqs } => {
                let sys = program
                    .system(system)
                    .ok_or_else(|| RunError::Exec(format!("unknown system {system}")))?;
                let (rec, trace) =
                    run_prime_avg(&exp.name, sys, seqs, exp.chars.as_deref(), n_default, &opts)?;
                artifacts.push((format!("{}_trace.csv", exp.name), trace));
                rec
            }
            Command::Gowers { k, n, of } => run_gowers(&exp.name, *k, *n, of)?,
            Command::Report => {
                let rec = json!({
                    "experiment": exp.name,
                    "command": "report",
                    "records": report_records.clone(),
                });
                summary.push_str(&format!(
                    "[{}] report with {} records\n",
                    exp.name,
                    report_records.len()
                ));
                artifacts.push((
                    "report.json".to_string(),
                    serde_json::to_string_pretty(&rec).unwrap(),
                ));
                continue;
            }
        };
        summary.push_str(&format!(
            "[{}] {}\n",
            exp.name,
            record
                .get("summary")
                .and_then(Value::as_str)
                .unwrap_or("done")
        ));
        artifacts.push((
            format!("{}.json", exp.name),
            serde_json::to_string_pretty(&record).unwrap(),
        ));
        report_records.push(record);
    }

    if let Some(dir) = &cfg.out_dir {
        fs::create_dir_all(dir)?;
        for (name, contents) in &artifacts {
            write_atomic(&dir.join(name), contents)?;
        }
    }
    Ok(RunOutcome {
        summary,
        exit_code,
        artifacts,
    })
}

fn write_atomic(path: &Path, contents: &str) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents)?;
    fs::rename(tmp, path)
}

fn run_decompose(name: &str, e: &GlfExpr) -> Result<Value, RunError> {
    let a = e
        .linear_part()
        .map_err(|err| RunError::Exec(err.to_string()))?;
    let psi = e
        .bounded_part()
        .map_err(|err| RunError::Exec(err.to_string()))?;
    let interval = psi
        .canonical_bound_interval(DEFAULT_REFINEMENT_BUDGET)
        .map_err(|err| RunError::Exec(err.to_string()))?;
    let (lo, hi) = interval.to_f64();
    Ok(json!({
        "experiment": name,
        "command": "decompose",
        "expr": print_expr(e),
        "linear_part": format!("{a}"),
        "linear_part_value": round_sig(a.to_f64()),
        "bounded_part": print_expr(&psi),
        "bound_lo": round_sig(lo),
        "bound_hi": round_sig(hi),
        "summary": format!("linear part {a}; remainder within [{:.4}, {:.4}]", lo, hi),
    }))
}

fn run_rep(name: &str, e: &GlfExpr) -> Result<Value, RunError> {
    let rep = torus::build_rep(e).map_err(|err| RunError::Exec(err.to_string()))?;
    let pieces: Vec<Value> = rep
        .pieces
        .iter()
        .map(|p| {
            json!({
                "offset": format!("{}", p.offset),
                "offset_value": round_sig(p.offset.to_f64()),
                "constraints": p.polygon.constraints.iter().map(|h| {
                    json!({
                        "normal": h.normal.iter().map(|v| round_sig(v.to_f64())).collect::<Vec<_>>(),
                        "offset": round_sig(h.offset.to_f64()),
                        "strict": h.strict,
                    })
                }).collect::<Vec<_>>(),
            })
        })
        .collect();
    Ok(json!({
        "experiment": name,
        "command": "rep",
        "expr": print_expr(e),
        "dimension": rep.dim,
        "rotation_symbolic": rep.rotation.iter().map(|u| format!("{u}")).collect::<Vec<_>>(),
        "rotation": rep.rotation.iter().map(|u| round_sig(u.to_f64())).collect::<Vec<_>>(),
        "linear_row": rep.linear_row.iter().map(|v| round_sig(v.to_f64())).collect::<Vec<_>>(),
        "pieces": pieces,
        "summary": format!("dimension {}, {} pieces", rep.dim, rep.pieces.len()),
    }))
}

fn run_limit(
    name: &str,
    beta: &crate::number_field::SymReal,
    of: &GlfExpr,
    n: u64,
) -> Result<(Value, String), RunError> {
    let v = spectral::char_limit(of, beta).map_err(|err| RunError::Exec(err.to_string()))?;
    // direct orbit-average convergence trace
    let mut rows = Vec::new();
    let scaled = GlfExpr::scale(beta.clone(), of.clone());
    let mut acc = Complex64::new(0.0, 0.0);
    let mut next = 0usize;
    let cps = checkpoints(n);
    for i in 1..=n {
        let p = scaled.eval_f64(i as i64).rem_euclid(1.0);
        acc += Complex64::from_polar(1.0, std::f64::consts::TAU * p);
        if next < cps.len() && i == cps[next] {
            let est = acc / i as f64;
            rows.push((i, est, (est - v.value).norm()));
            next += 1;
        }
    }
    let rec = json!({
        "experiment": name,
        "command": "limit",
        "expr": print_expr(of),
        "beta": format!("{beta}"),
        "exact": if v.exact { Some(complex_json(v.value)) } else { None },
        "numeric": complex_json(v.value),
        "certificate": v.certificate,
        "error_proxy": round_sig(v.error_proxy),
        "summary": format!(
            "limit modulus {:.6}{}",
            v.value.norm(),
            v.certificate.as_deref().map(|c| format!(" ({c})")).unwrap_or_default()
        ),
    });
    Ok((rec, trace_csv(&rows)))
}

fn run_density(
    name: &str,
    of: &GlfExpr,
    lo: &crate::number_field::SymReal,
    hi: &crate::number_field::SymReal,
    schedule: &FolnerSchedule,
    n: u64,
) -> Result<(Value, String), RunError> {
    let lo_f = lo.to_f64();
    let hi_f = hi.to_f64();
    let mut rows = Vec::new();
    let mut last = 0.0;
    for cp in checkpoints(n) {
        let d = averaging::density_est(
            |k| {
                let v = of.eval_f64(k);
                v >= lo_f && v < hi_f
            },
            schedule,
            cp,
        )
        .map_err(|err| RunError::Exec(err.to_string()))?;
        rows.push((cp, Complex64::new(d, 0.0), (d - last).abs()));
        last = d;
    }
    let rec = json!({
        "experiment": name,
        "command": "density",
        "expr": print_expr(of),
        "interval": [round_sig(lo_f), round_sig(hi_f)],
        "density": round_sig(last),
        "summary": format!("density {:.6} at N = {}", last, n),
    });
    Ok((rec, trace_csv(&rows)))
}

fn bank_from_chars(
    sys: &SystemSpec,
    seq_count: usize,
    chars: Option<&[Vec<Vec<i64>>]>,
) -> Vec<Vec<CharacterSum>> {
    match chars {
        Some(entries) => entries
            .iter()
            .map(|tuple| tuple.iter().map(|v| CharacterSum::single(v.clone())).collect())
            .collect(),
        None => {
            // default bank: every sequence gets each unit-frequency character
            let d = sys.freq_dim();
            (0..d)
                .map(|c| {
                    let mut k = vec![0i64; d];
                    k[c] = 1;
                    (0..seq_count).map(|_| CharacterSum::single(k.clone())).collect()
                })
                .collect()
        }
    }
}

fn run_check_joint(
    name: &str,
    sys: &SystemSpec,
    seqs: &[(String, GlfExpr)],
    chars: Option<&[Vec<Vec<i64>>]>,
    schedule: &FolnerSchedule,
    n: u64,
    opts: &CheckOptions,
) -> Result<(Value, i32), RunError> {
    let resolved: Vec<GlSeq> = seqs
        .iter()
        .map(|(h, e)| GlSeq::single(sys.id_by_name(h).unwrap(), e.clone()))
        .collect();
    let verdict =
        joint::check_joint(sys, &resolved, opts).map_err(|err| RunError::Exec(err.to_string()))?;
    let mut bank = bank_from_chars(sys, seqs.len(), chars);
    // witnesses from the checker name the characters where the defect lives
    let d = sys.freq_dim();
    for w in &verdict.witnesses {
        if w.frequency.len() == d * seqs.len() {
            let entry: Vec<CharacterSum> = (0..seqs.len())
                .map(|i| CharacterSum::single(w.frequency[i * d..(i + 1) * d].to_vec()))
                .collect();
            bank.push(entry);
        }
    }
    let report = joint::empirical_validate(sys, &resolved, &bank, schedule, n, 0.05, 0.15)
        .map_err(|err| RunError::Exec(err.to_string()))?;
    let concordant = joint::concordant(verdict.decision, &report);
    let code = match verdict.decision {
        Decision::JointlyErgodic | Decision::Ergodic => 0,
        Decision::NotJointlyErgodic | Decision::NotErgodic => 2,
        Decision::Inconclusive => 3,
    };
    let rec = json!({
        "experiment": name,
        "command": "check-joint",
        "seqs": seqs.iter().map(|(h, e)| format!("{h}^({})", print_expr(e))).collect::<Vec<_>>(),
        "verdict": verdict,
        "empirical": {
            "max_defect": round_sig(report.max_defect),
            "defects": report.defects.iter().map(|d| round_sig(*d)).collect::<Vec<_>>(),
            "classification": report.classification,
        },
        "concordant": concordant,
        "summary": format!(
            "{:?}; max empirical defect {:.5} at N = {}{}",
            verdict.decision,
            report.max_defect,
            n,
            if concordant { "" } else { " (DISCORDANT)" }
        ),
    });
    Ok((rec, code))
}

fn run_prime_avg(
    name: &str,
    sys: &SystemSpec,
    seqs: &[(String, GlfExpr)],
    chars: Option<&[Vec<Vec<i64>>]>,
    n: u64,
    opts: &CheckOptions,
) -> Result<(Value, String), RunError> {
    let resolved: Vec<GlSeq> = seqs
        .iter()
        .map(|(h, e)| GlSeq::single(sys.id_by_name(h).unwrap(), e.clone()))
        .collect();
    let bank = bank_from_chars(sys, seqs.len(), chars);
    let fns = bank.into_iter().next().unwrap_or_default();
    let sieve = PrimeSieve::new(n as usize);
    let report = joint::prime_joint_check(sys, &resolved, &fns, &sieve, n as usize, &[1, 2, 6], opts)
        .map_err(|err| RunError::Exec(err.to_string()))?;
    // defect trace along geometric prime-count checkpoints
    let mut rows = Vec::new();
    for cp in checkpoints(n) {
        let primes: Vec<i64> = sieve.primes_up_to(cp as usize).map(|p| p as i64).collect();
        if primes.is_empty() {
            continue;
        }
        let d = if resolved.is_empty() {
            0.0
        } else {
            crate::systems::multi_average_l2_over(sys, &resolved, &fns, &primes)
                .map_err(|err| RunError::Exec(err.to_string()))?
        };
        rows.push((cp, Complex64::new(d, 0.0), (d - report.prime_defect).abs()));
    }
    let rec = json!({
        "experiment": name,
        "command": "prime-avg",
        "seqs": seqs.iter().map(|(h, e)| format!("{h}^({})", print_expr(e))).collect::<Vec<_>>(),
        "hypothesis_holds": report.hypothesis_holds,
        "hypothesis": report.hypothesis.iter()
            .map(|(w, r, d)| json!({"w": w, "r": r, "decision": d}))
            .collect::<Vec<_>>(),
        "prime_defect": round_sig(report.prime_defect),
        "summary": format!(
            "hypothesis {}; prime-average defect {:.5} at N = {}",
            if report.hypothesis_holds { "holds" } else { "fails" },
            report.prime_defect,
            n
        ),
    });
    Ok((rec, trace_csv(&rows)))
}


fn run_gowers(name: &str, k: u32, n: u64, of: &GlfExpr) -> Result<Value, RunError> {
    let b: Vec<f64> = (1..=n as i64).map(|i| of.eval_f64(i)).collect();
    let g = averaging::gowers_norm(&b, k).map_err(|err| RunError::Exec(err.to_string()))?;
    Ok(json!({
        "experiment": name,
        "command": "gowers",
        "expr": print_expr(of),
        "k": k,
        "N": n,
        "value": round_sig(g),
        "summary": format!("U^{k}[{n}] norm {:.8}", g),
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse;

    const PROGRAM: &str = "\
irrational sqrt2 = quadratic(2);
irrational sqrt3 = quadratic(3);
let beatty = floor(sqrt2*x);
system rot {
  torus dim 1;
  T: alpha = sqrt2;
  U: alpha = sqrt3;
}
experiment dec { decompose beatty; }
experiment lim { limit beta = 1/2 of floor(sqrt2*x); n = 20000; }
experiment jc { check-joint rot (T^(x), U^(x)); n = 20000; }
experiment g { gowers k = 1 N = 4 of 1/2 + 0*x + frac(sqrt2*x)*0 + 1/2; }
experiment fin { report; }
";

    #[test]
    fn run_program_end_to_end() {
        let p = parse(PROGRAM).unwrap();
        let out = run(&p, &RunConfig::default()).unwrap();
        assert_eq!(out.exit_code, 0, "{}", out.summary);
        assert!(out.summary.contains("JointlyErgodic"));
        // gowers of the constant 1: hand value sqrt(3/8)
        let g = out
            .artifacts
            .iter()
            .find(|(n, _)| n == "g.json")
            .map(|(_, c)| c.clone())
            .unwrap();
        let v: serde_json::Value = serde_json::from_str(&g).unwrap();
        let val = v["value"].as_f64().unwrap();
        assert!((val - (3.0f64 / 8.0).sqrt()).abs() < 1e-9);
    }

    #[test]
    fn deterministic_artifacts() {
        let p = parse(PROGRAM).unwrap();
        let a = run(&p, &RunConfig::default()).unwrap();
        let p2 = parse(PROGRAM).unwrap();
        let b = run(&p2, &RunConfig::default()).unwrap();
        assert_eq!(a.artifacts.len(), b.artifacts.len());
        for ((n1, c1), (n2, c2)) in a.artifacts.iter().zip(&b.artifacts) {
            assert_eq!(n1, n2);
            assert_eq!(c1, c2, "artifact {n1} differs between runs");
        }
    }

    #[test]
    fn exit_code_reflects_negative_verdict() {
        let src = "\
irrational sqrt2 = quadratic(2);
system rot {
  torus dim 1;
  T: alpha = sqrt2;
}
experiment bad { check-joint rot (T^(x), T^(2*x)); n = 10000; }
";
        let p = parse(src).unwrap();
        let out = run(&p, &RunConfig::default()).unwrap();
        assert_eq!(out.exit_code, 2);
        let rec = &out.artifacts[0].1;
        assert!(rec.contains("NotJointlyErgodic"));
        assert!(rec.contains("\"concordant\": true"));
    }

    #[test]
    fn prime_avg_command_runs() {
        let src = "\
irrational sqrt2 = quadratic(2);
irrational sqrt3 = quadratic(3);
system rot {
  torus dim 1;
  T: alpha = sqrt2;
  U: alpha = sqrt3;
}
experiment pa { prime-avg rot (T^(x), U^(3*x)); n = 20000; }
";
        let p = parse(src).unwrap();
        let out = run(&p, &RunConfig::default()).unwrap();
        assert_eq!(out.exit_code, 0, "{}", out.summary);
        let rec = out
            .artifacts
            .iter()
            .find(|(n, _)| n == "pa.json")
            .map(|(_, c)| c.clone())
            .unwrap();
        let v: serde_json::Value = serde_json::from_str(&rec).unwrap();
        assert_eq!(v["hypothesis_holds"], true, "{rec}");
        assert!(v["prime_defect"].as_f64().unwrap() < 0.1);
        let trace = out
            .artifacts
            .iter()
            .find(|(n, _)| n == "pa_trace.csv")
            .map(|(_, c)| c.clone())
            .unwrap();
        assert!(trace.starts_with("N,estimate_re,estimate_im,error_proxy"));
    }

    #[test]
    fn exit_code_three_for_inconclusive() {
        // distinct commuting automorphism handles: the quotient sequence is
        // outside the spectral checker, so the verdict stays inconclusive
        let src = "\
irrational sqrt2 = quadratic(2);
irrational sqrt3 = quadratic(3);
system cat {
  automorphism dim 2;
  A: matrix = [2, 1; 1, 1];
  B: matrix = [5, 3; 3, 2];
}
experiment amb { check-joint cat (A^(floor(sqrt2*x)), B^(floor(sqrt3*x))); n = 2000; }
";
        let p = parse(src).unwrap();
        let out = run(&p, &RunConfig::default()).unwrap();
        assert_eq!(out.exit_code, 3, "{}", out.summary);
    }

    #[test]
    fn empty_report_is_fine() {
        let src = "experiment fin { report; }\n";
        let p = parse(src).unwrap();
        let out = run(&p, &RunConfig::default()).unwrap();
        assert_eq!(out.exit_code, 0);
        assert!(out.artifacts.iter().any(|(n, _)| n == "report.json"));
    }
}
