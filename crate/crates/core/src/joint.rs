//! Ergodicity and joint-ergodicity checkers for GL sequences on concrete
//! systems, with empirical validation.
//!
//! On rotations and cyclic shifts the characters are a complete eigenbasis,
//! so ergodicity of a GL sequence reduces to the vanishing of the Cesàro
//! limits of its eigenvalue phases: for every nontrivial character the phase
//! is itself a GL function and [`crate::spectral::exp_limit`] decides or
//! estimates the limit. Joint ergodicity follows the product/quotient
//! criterion: all pairwise quotient sequences and the product-system sequence
//! must be ergodic.
//!
//! Character enumeration is necessarily truncated at a frequency cutoff, so a
//! `JointlyErgodic` verdict on a system with dense spectrum is one-sided
//! evidence; refutations carry a concrete witness (often an exact one).
//! Numeric limits classify through a two-threshold gray zone, and anything in
//! between yields `Inconclusive` rather than a false certificate.

use std::fmt;

use serde::Serialize;

use crate::averaging::{FolnerSchedule, PrimeSieve};
use crate::glf_ast::GlfExpr;
use crate::number_field::{NumberFieldError, Rat};
use crate::spectral::{exp_limit_with_samples, LimitValue};
use crate::systems::{
    automorphism_has_root_of_unity, inverse_times, multi_average_l2_over, product_system,
    CharacterSum, GlSeq, SysResult, SystemError, SystemKind, SystemSpec,
};
use crate::torus::TorusError;

use num_bigint::BigInt;

#[derive(Debug)]
pub enum JointError {
    UnboundedRequired,
    HypothesisFailed(String),
    Sys(SystemError),
    Torus(TorusError),
    Nf(NumberFieldError),
}

impl fmt::Display for JointError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            JointError::UnboundedRequired => {
                write!(f, "criterion requires an unbounded exponent")
            }
            JointError::HypothesisFailed(m) => write!(f, "hypothesis failed: {m}"),
            JointError::Sys(e) => write!(f, "{e}"),
            JointError::Torus(e) => write!(f, "{e}"),
            JointError::Nf(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for JointError {}

impl From<SystemError> for JointError {
    fn from(e: SystemError) -> Self {
        JointError::Sys(e)
    }
}

impl From<TorusError> for JointError {
    fn from(e: TorusError) -> Self {
        JointError::Torus(e)
    }
}

impl From<NumberFieldError> for JointError {
    fn from(e: NumberFieldError) -> Self {
        JointError::Nf(e)
    }
}

pub type JointResult<T> = Result<T, JointError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Decision {
    Ergodic,
    NotErgodic,
    JointlyErgodic,
    NotJointlyErgodic,
    Inconclusive,
}

impl Decision {
    pub fn is_definite(self) -> bool {
        !matches!(self, Decision::Inconclusive)
    }

    pub fn is_positive(self) -> bool {
        matches!(self, Decision::Ergodic | Decision::JointlyErgodic)
    }
}

/// A nonvanishing eigenvalue limit backing a negative verdict.
#[derive(Debug, Clone, Serialize)]
pub struct EigWitness {
    pub frequency: Vec<i64>,
    pub limit_modulus: f64,
    pub exact: bool,
    pub certificate: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub decision: Decision,
    pub witnesses: Vec<EigWitness>,
    /// labelled sub-decisions (pairwise quotients, product sequence, ...)
    pub conditions: Vec<(String, Decision)>,
    pub notes: Vec<String>,
}

impl Verdict {
    fn simple(decision: Decision) -> Verdict {
        Verdict {
            decision,
            witnesses: Vec::new(),
            conditions: Vec::new(),
            notes: Vec::new(),
        }
    }
}

/// Numeric zero-test thresholds and enumeration bounds.
#[derive(Debug, Clone, Copy)]
pub struct CheckOptions {
    /// numeric limits below this modulus count as zero
    pub eps_zero: f64,
    /// numeric limits above this modulus count as nonzero
    pub eps_nonzero: f64,
    /// per-coordinate character cutoff
    pub freq_cutoff: i64,
    /// cap on the total number of enumerated characters
    pub freq_budget: usize,
    /// sample count for numeric limits
    pub samples: usize,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            eps_zero: 0.01,
            eps_nonzero: 0.05,
            freq_cutoff: 8,
            freq_budget: 4096,
            samples: 1 << 14,
        }
    }
}

enum LimitClass {
    Zero,
    Nonzero,
    Gray,
}

fn classify(v: &LimitValue, opts: &CheckOptions) -> LimitClass {
    let m = v.value.norm();
    if v.exact {
        if m == 0.0 {
            LimitClass::Zero
        } else {
            LimitClass::Nonzero
        }
    } else if m < opts.eps_zero {
        LimitClass::Zero
    } else if m > opts.eps_nonzero {
        LimitClass::Nonzero
    } else {
        LimitClass::Gray
    }
}

/// Mean-zero character frequencies up to the cutoff, budget-capped by
/// shrinking the cutoff when the lattice is too large.
fn enumerate_freqs(dim: usize, opts: &CheckOptions) -> Vec<Vec<i64>> {
    let mut cutoff = opts.freq_cutoff;
    loop {
        let count = ((2 * cutoff + 1) as f64).powi(dim as i32);
        if count <= opts.freq_budget as f64 || cutoff == 1 {
            break;
        }
        cutoff -= 1;
    }
    let mut out = vec![Vec::new()];
    for _ in 0..dim {
        let mut next = Vec::with_capacity(out.len() * (2 * cutoff as usize + 1));
        for p in &out {
            for k in -cutoff..=cutoff {
                let mut q = p.clone();
                q.push(k);
                next.push(q);
            }
        }
        out = next;
    }
    out.retain(|k| k.iter().any(|&x| x != 0));
    out
}

fn cyclic_freqs(moduli: &[u64]) -> Vec<Vec<i64>> {
    let mut out = vec![Vec::new()];
    for &m in moduli {
        let mut next = Vec::new();
        for p in &out {
            for k in 0..m as i64 {
                let mut q = p.clone();
                q.push(k);
                next.push(q);
            }
        }
        out = next;
    }
    out.retain(|k| k.iter().any(|&x| x != 0));
    out
}

/// Phase GL function of a sequence against a character: `sum_j beta_j phi_j`
/// with `beta_j` the exact frequency pairing of the factor's transformation.
fn phase_function(sys: &SystemSpec, seq: &GlSeq, freq: &[i64]) -> SysResult<Option<GlfExpr>> {
    let s = sys.session();
    let mut parts: Vec<GlfExpr> = Vec::new();
    for (id, e) in &seq.factors {
        let tr = sys.transform(*id);
        let mut beta = s.zero();
        match &sys.kind {
            SystemKind::TorusRotation { .. } => {
                for (k, a) in freq.iter().zip(&tr.rotation) {
                    beta = beta.add(&a.scale(&Rat::from_integer(BigInt::from(*k))))?;
                }
            }
            SystemKind::CyclicShift { moduli } => {
                for ((k, sft), m) in freq.iter().zip(&tr.shifts).zip(moduli) {
                    beta = beta.add(&s.rational(Rat::new(
                        BigInt::from(k * sft),
                        BigInt::from(*m),
                    )))?;
                }
            }
            SystemKind::ToralAutomorphism { .. } => return Ok(None),
        }
        if !beta.is_zero() {
            parts.push(GlfExpr::scale(beta, e.clone()));
        }
    }
    Ok(Some(if parts.is_empty() {
        GlfExpr::constant(s.zero())
    } else {
        GlfExpr::sum(parts)
    }))
}

/// Ergodicity of a GL sequence of transformations on a character system.
///
/// On rotations and cyclic shifts the decision enumerates nontrivial
/// characters up to the cutoff and tests the Cesàro limit of each eigenvalue
/// phase. On automorphism systems it applies the weakly-mixing rule: a
/// single-handle sequence is ergodic iff the matrix has no root-of-unity
/// eigenvalue and the exponent is unbounded.
pub fn seq_ergodicity(sys: &SystemSpec, seq: &GlSeq, opts: &CheckOptions) -> JointResult<Verdict> {
    if seq.is_identity() {
        let mut v = Verdict::simple(Decision::NotErgodic);
        v.witnesses.push(EigWitness {
            frequency: first_nontrivial_freq(sys),
            limit_modulus: 1.0,
            exact: true,
            certificate: Some("identity-sequence".to_string()),
        });
        return Ok(v);
    }
    match &sys.kind {
        SystemKind::TorusRotation { dim } => {
            let freqs = enumerate_freqs(*dim, opts);
            spectral_scan(sys, seq, &freqs, opts)
        }
        SystemKind::CyclicShift { moduli } => {
            let freqs = cyclic_freqs(moduli);
            spectral_scan(sys, seq, &freqs, opts)
        }
        SystemKind::ToralAutomorphism { .. } => {
            let normalized = inverse_times(&GlSeq::identity(), seq)?;
            if normalized.is_identity() {
                return seq_ergodicity(sys, &normalized, opts);
            }
            if normalized.factors.len() > 1 {
                let mut v = Verdict::simple(Decision::Inconclusive);
                v.notes.push(
                    "multi-handle automorphism sequences are outside the spectral checker"
                        .to_string(),
                );
                return Ok(v);
            }
            let (id, e) = &normalized.factors[0];
            let tr = sys.transform(*id);
            if automorphism_has_root_of_unity(&tr.matrix) {
                let mut v = Verdict::simple(Decision::NotErgodic);
                v.notes
                    .push(format!("{} has a root-of-unity eigenvalue", tr.name));
                return Ok(v);
            }
            let unbounded = !e.linear_part()?.is_zero();
            if unbounded {
                let mut v = Verdict::simple(Decision::Ergodic);
                v.notes
                    .push("weakly mixing base with unbounded exponent".to_string());
                Ok(v)
            } else {
                let mut v = Verdict::simple(Decision::NotErgodic);
                v.notes.push("bounded exponent on a single handle".to_string());
                Ok(v)
            }
        }
    }
}

fn first_nontrivial_freq(sys: &SystemSpec) -> Vec<i64> {
    let mut k = vec![0i64; sys.freq_dim()];
    if !k.is_empty() {
        k[0] = 1;
    }
    k
}

fn spectral_scan(
    sys: &SystemSpec,
    seq: &GlSeq,
    freqs: &[Vec<i64>],
    opts: &CheckOptions,
) -> JointResult<Verdict> {
    let mut verdict = Verdict::simple(Decision::Ergodic);
    let mut saw_gray = false;
    for k in freqs {
        let Some(g) = phase_function(sys, seq, k)? else {
            unreachable!("spectral scan only runs on rotation/cyclic kinds")
        };
        let v = exp_limit_with_samples(&g, opts.samples)?;
        match classify(&v, opts) {
            LimitClass::Zero => {}
            LimitClass::Nonzero => {
                verdict.decision = Decision::NotErgodic;
                verdict.witnesses.push(EigWitness {
                    frequency: k.clone(),
                    limit_modulus: v.value.norm(),
                    exact: v.exact,
                    certificate: v.certificate.clone(),
                });
            }
            LimitClass::Gray => saw_gray = true,
        }
    }
    if verdict.decision == Decision::Ergodic && saw_gray {
        verdict.decision = Decision::Inconclusive;
        verdict
            .notes
            .push("some eigenvalue limits fell in the gray zone".to_string());
    }
    Ok(verdict)
}

/// Ergodicity of a single-handle sequence `T^{phi(n)}`; requires `phi`
/// unbounded.
pub fn check_single(sys: &SystemSpec, seq: &GlSeq, opts: &CheckOptions) -> JointResult<Verdict> {
    for (_, e) in &seq.factors {
        if e.linear_part()?.is_zero() {
            return Err(JointError::UnboundedRequired);
        }
    }
    seq_ergodicity(sys, seq, opts)
}

/// Joint ergodicity of several GL sequences: all pairwise quotients and the
/// product-system sequence must be ergodic.
///
/// On weakly mixing automorphism systems the product condition is implied by
/// single and quotient ergodicity (the joint-ergodicity criterion for a
/// weakly mixing base reduces to unbounded exponents with unbounded pairwise
/// differences), so only those conditions are checked there.
pub fn check_joint(sys: &SystemSpec, seqs: &[GlSeq], opts: &CheckOptions) -> JointResult<Verdict> {
    assert!(!seqs.is_empty());
    if matches!(sys.kind, SystemKind::ToralAutomorphism { .. }) {
        return check_joint_weakly_mixing(sys, seqs, opts);
    }
    let mut verdict = Verdict::simple(Decision::JointlyErgodic);
    let mut any_gray = false;
    let mut any_fail = false;

    let dim = sys.freq_dim();
    for i in 0..seqs.len() {
        for j in 0..seqs.len() {
            if i >= j {
                continue;
            }
            let q = inverse_times(&seqs[i], &seqs[j])?;
            let sub = seq_ergodicity(sys, &q, opts)?;
            match sub.decision {
                Decision::Ergodic => {}
                Decision::Inconclusive => any_gray = true,
                _ => {
                    any_fail = true;
                    // lift the quotient witness k to the product tuple with
                    // -k on slot i and +k on slot j
                    for w in &sub.witnesses {
                        let mut tuple = vec![0i64; dim * seqs.len()];
                        for (c, &kc) in w.frequency.iter().enumerate() {
                            tuple[i * dim + c] = -kc;
                            tuple[j * dim + c] = kc;
                        }
                        verdict.witnesses.push(EigWitness {
                            frequency: tuple,
                            ..w.clone()
                        });
                    }
                }
            }
            verdict
                .conditions
                .push((format!("quotient[{i},{j}]"), sub.decision));
            verdict.notes.extend(sub.notes);
        }
    }

    // product-system sequence on X^k
    let copies: Vec<&SystemSpec> = std::iter::repeat_n(sys, seqs.len()).collect();
    let (prod, maps) = product_system(&copies)?;
    let mut product_factors = Vec::new();
    for (i, seq) in seqs.iter().enumerate() {
        for (id, e) in &seq.factors {
            product_factors.push((maps[i][id.0], e.clone()));
        }
    }
    let product_seq = GlSeq::new(product_factors);
    let sub = seq_ergodicity(&prod, &product_seq, opts)?;
    match sub.decision {
        Decision::Ergodic => {}
        Decision::Inconclusive => any_gray = true,
        _ => {
            any_fail = true;
            verdict.witnesses.extend(sub.witnesses.iter().cloned());
        }
    }
    verdict.conditions.push(("product".to_string(), sub.decision));
    verdict.notes.extend(sub.notes);

    verdict.decision = if any_fail {
        Decision::NotJointlyErgodic
    } else if any_gray {
        Decision::Inconclusive
    } else {
        Decision::JointlyErgodic
    };
    Ok(verdict)
}

fn check_joint_weakly_mixing(
    sys: &SystemSpec,
    seqs: &[GlSeq],
    opts: &CheckOptions,
) -> JointResult<Verdict> {
    let mut verdict = Verdict::simple(Decision::JointlyErgodic);
    let mut any_gray = false;
    let mut any_fail = false;
    let mut record = |label: String, sub: Verdict, verdict: &mut Verdict| {
        match sub.decision {
            Decision::Ergodic => {}
            Decision::Inconclusive => any_gray = true,
            _ => {
                any_fail = true;
                verdict.witnesses.extend(sub.witnesses.iter().cloned());
            }
        }
        verdict.conditions.push((label, sub.decision));
        verdict.notes.extend(sub.notes);
    };
    for (i, seq) in seqs.iter().enumerate() {
        let sub = seq_ergodicity(sys, seq, opts)?;
        record(format!("single[{i}]"), sub, &mut verdict);
    }
    for i in 0..seqs.len() {
        for j in i + 1..seqs.len() {
            let q = inverse_times(&seqs[i], &seqs[j])?;
            let sub = seq_ergodicity(sys, &q, opts)?;
            record(format!("quotient[{i},{j}]"), sub, &mut verdict);
        }
    }
    verdict.notes.push(
        "weakly mixing base: joint ergodicity from unbounded exponents with unbounded differences"
            .to_string(),
    );
    verdict.decision = if any_fail {
        Decision::NotJointlyErgodic
    } else if any_gray {
        Decision::Inconclusive
    } else {
        Decision::JointlyErgodic
    };
    Ok(verdict)
}

/// Joint ergodicity of `T_1^{phi}, ..., T_k^{phi}` with one shared exponent:
/// the limit of every nontrivial product eigenvalue along `phi` must vanish.
/// Requires the transformations themselves (exponent `n`) to be jointly
/// ergodic.
pub fn spec_criterion(
    sys: &SystemSpec,
    transforms: &[crate::systems::TransformId],
    phi: &GlfExpr,
    opts: &CheckOptions,
) -> JointResult<Verdict> {
    let s = sys.session();
    // hypothesis: the base transformations are jointly ergodic
    let base_seqs: Vec<GlSeq> = transforms
        .iter()
        .map(|&t| GlSeq::single(t, GlfExpr::var(s)))
        .collect();
    let base = check_joint(sys, &base_seqs, opts)?;
    if base.decision != Decision::JointlyErgodic {
        return Err(JointError::HypothesisFailed(format!(
            "base transformations are {:?}",
            base.decision
        )));
    }
    if phi.linear_part()?.is_zero() {
        return Err(JointError::UnboundedRequired);
    }

    // enumerate the product eigenvalue set Eig(T_1)...Eig(T_k)
    let dim = sys.freq_dim();
    let tuple_freqs = enumerate_freqs(dim * transforms.len(), opts);
    let mut verdict = Verdict::simple(Decision::JointlyErgodic);
    let mut saw_gray = false;
    let mut seen: std::collections::HashSet<Vec<String>> = std::collections::HashSet::new();
    for tuple in &tuple_freqs {
        // beta = sum_i k_i . alpha_{T_i}
        let mut beta = s.zero();
        for (i, &t) in transforms.iter().enumerate() {
            let tr = sys.transform(t);
            match &sys.kind {
                SystemKind::TorusRotation { .. } => {
                    for (c, a) in tuple[i * dim..(i + 1) * dim].iter().zip(&tr.rotation) {
                        beta = beta.add(&a.scale(&Rat::from_integer(BigInt::from(*c))))?;
                    }
                }
                SystemKind::CyclicShift { moduli } => {
                    for ((c, sft), m) in tuple[i * dim..(i + 1) * dim]
                        .iter()
                        .zip(&tr.shifts)
                        .zip(moduli)
                    {
                        beta = beta.add(&s.rational(Rat::new(
                            BigInt::from(c * sft),
                            BigInt::from(*m),
                        )))?;
                    }
                }
                SystemKind::ToralAutomorphism { .. } => {
                    // trivial eigenvalue set: nothing to test
                    return Ok(Verdict::simple(Decision::JointlyErgodic));
                }
            }
        }
        if beta.is_zero() {
            continue; // trivial eigenvalue
        }
        // dedupe repeated beta values cheaply by display form
        if !seen.insert(vec![format!("{beta}")]) {
            continue;
        }
        let v = exp_limit_with_samples(&GlfExpr::scale(beta, phi.clone()), opts.samples)?;
        match classify(&v, opts) {
            LimitClass::Zero => {}
            LimitClass::Nonzero => {
                verdict.decision = Decision::NotJointlyErgodic;
                verdict.witnesses.push(EigWitness {
                    frequency: tuple.clone(),
                    limit_modulus: v.value.norm(),
                    exact: v.exact,
                    certificate: v.certificate.clone(),
                });
            }
            LimitClass::Gray => saw_gray = true,
        }
    }
    if verdict.decision == Decision::JointlyErgodic && saw_gray {
        verdict.decision = Decision::Inconclusive;
    }
    Ok(verdict)
}

/// Empirical defect report for a bank of character tuples.
#[derive(Debug, Clone, Serialize)]
pub struct EmpiricalReport {
    pub max_defect: f64,
    pub defects: Vec<f64>,
    /// `Some(true)` = consistent with joint ergodicity, `Some(false)` =
    /// inconsistent, `None` = gray zone
    pub classification: Option<bool>,
}

pub fn empirical_validate(
    sys: &SystemSpec,
    seqs: &[GlSeq],
    bank: &[Vec<CharacterSum>],
    schedule: &FolnerSchedule,
    index: u64,
    eps_pass: f64,
    eps_fail: f64,
) -> SysResult<EmpiricalReport> {
    let mut defects = Vec::new();
    for fns in bank {
        defects.push(multi_average_l2_over(
            sys,
            seqs,
            fns,
            &schedule.elements(index),
        )?);
    }
    let max_defect = defects.iter().cloned().fold(0.0, f64::max);
    let classification = if max_defect < eps_pass {
        Some(true)
    } else if max_defect > eps_fail {
        Some(false)
    } else {
        None
    };
    Ok(EmpiricalReport {
        max_defect,
        defects,
        classification,
    })
}

/// Whether a definite verdict agrees with an empirical classification.
pub fn concordant(decision: Decision, report: &EmpiricalReport) -> bool {
    match (decision, report.classification) {
        (Decision::Inconclusive, _) => true,
        (_, None) => true,
        (d, Some(ok)) => d.is_positive() == ok,
    }
}

/// Prime-average analysis of `prod_i T_i(p) f_i`.
#[derive(Debug, Clone, Serialize)]
pub struct PrimeReport {
    /// hypothesis sub-verdicts for sampled (W, r) pairs
    pub hypothesis: Vec<(u64, u64, Decision)>,
    pub hypothesis_holds: bool,
    /// L2 distance of the prime average from the product of integrals
    pub prime_defect: f64,
}

/// Checks the along-primes criterion: (1) joint ergodicity of the sequences
/// composed with `W n + r` for sampled `W` and every residue `r` coprime to
/// `W`; (2) the prime-average defect of the product against the product of
/// integrals.
pub fn prime_joint_check(
    sys: &SystemSpec,
    seqs: &[GlSeq],
    fns: &[CharacterSum],
    sieve: &PrimeSieve,
    n_max: usize,
    w_samples: &[u64],
    opts: &CheckOptions,
) -> JointResult<PrimeReport> {
    let s = sys.session();
    if seqs.is_empty() {
        // the empty product averages to 1 identically
        return Ok(PrimeReport {
            hypothesis: Vec::new(),
            hypothesis_holds: true,
            prime_defect: 0.0,
        });
    }
    let mut hypothesis = Vec::new();
    let mut holds = true;
    for &w in w_samples {
        for r in 1..=w {
            if num_integer::gcd(r, w) != 1 {
                continue;
            }
            let composed: Vec<GlSeq> = seqs
                .iter()
                .map(|seq| {
                    let factors = seq
                        .factors
                        .iter()
                        .map(|(id, e)| {
                            let inner = GlfExpr::linear(s.integer(w as i64), s.integer(r as i64));
                            Ok((*id, GlfExpr::compose(e, &inner)?))
                        })
                        .collect::<Result<Vec<_>, NumberFieldError>>()?;
                    Ok(GlSeq::new(factors))
                })
                .collect::<JointResult<Vec<GlSeq>>>()?;
            let v = check_joint(sys, &composed, opts)?;
            if v.decision != Decision::JointlyErgodic {
                holds = false;
            }
            hypothesis.push((w, r, v.decision));
        }
    }
    let primes: Vec<i64> = sieve.primes_up_to(n_max).map(|p| p as i64).collect();
    let prime_defect = if seqs.is_empty() {
        0.0
    } else {
        multi_average_l2_over(sys, seqs, fns, &primes)?
    };
    Ok(PrimeReport {
        hypothesis,
        hypothesis_holds: holds,
        prime_defect,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::number_field::{Session, SymReal};
    use crate::systems::TransformId;

    fn s235() -> Session {
        Session::quadratic(&[2, 3, 5])
    }

    fn rotation(s: &Session, alphas: &[SymReal]) -> (SystemSpec, Vec<TransformId>) {
        let mut sys = SystemSpec::torus_rotation(s, 1);
        let ids = alphas
            .iter()
            .enumerate()
            .map(|(i, a)| sys.add_rotation(&format!("T{i}"), vec![a.clone()]).unwrap())
            .collect();
        (sys, ids)
    }

    fn beatty(s: &Session, n: u64) -> GlfExpr {
        GlfExpr::floor(GlfExpr::linear(s.sqrt(n).unwrap(), s.zero()))
    }

    #[test]
    fn single_rotation_linear_is_ergodic() {
        let s = s235();
        let (sys, ids) = rotation(&s, &[s.sqrt(2).unwrap()]);
        let seq = GlSeq::single(ids[0], GlfExpr::var(&s));
        let v = check_single(&sys, &seq, &CheckOptions::default()).unwrap();
        assert_eq!(v.decision, Decision::Ergodic);
    }

    #[test]
    fn single_rotation_bracket_with_resonance() {
        let s = s235();
        // rotation by sqrt2/4 with exponent [sqrt2 n]: beta = k sqrt2/4 with
        // alpha beta = k/2; k = 2 gives alpha beta = 1 in Z alpha + Z
        let (sys, ids) = rotation(&s, &[s.sqrt(2).unwrap().scale(&crate::number_field::rat(1, 4))]);
        let seq = GlSeq::single(ids[0], beatty(&s, 2));
        let v = check_single(&sys, &seq, &CheckOptions::default()).unwrap();
        assert_eq!(v.decision, Decision::NotErgodic);
        assert!(v.witnesses.iter().any(|w| w.exact));
    }

    #[test]
    fn unbounded_precondition() {
        let s = s235();
        let (sys, ids) = rotation(&s, &[s.sqrt(2).unwrap()]);
        let seq = GlSeq::single(
            ids[0],
            GlfExpr::frac(GlfExpr::linear(s.sqrt(2).unwrap(), s.zero())),
        );
        assert!(matches!(
            check_single(&sys, &seq, &CheckOptions::default()),
            Err(JointError::UnboundedRequired)
        ));
    }

    #[test]
    fn cyclic_flip_even_exponent_not_ergodic() {
        let s = s235();
        let mut cyc = SystemSpec::cyclic(&s, vec![2]);
        let f = cyc.add_shift("F", vec![1]).unwrap();
        let seq = GlSeq::single(f, GlfExpr::linear(s.integer(2), s.zero()));
        let v = check_single(&cyc, &seq, &CheckOptions::default()).unwrap();
        assert_eq!(v.decision, Decision::NotErgodic);
        assert!(v.witnesses[0].exact);
    }

    #[test]
    fn same_rotation_multiples_fail_jointly() {
        let s = s235();
        let (sys, ids) = rotation(&s, &[s.sqrt(2).unwrap()]);
        let seqs = vec![
            GlSeq::single(ids[0], GlfExpr::var(&s)),
            GlSeq::single(ids[0], GlfExpr::linear(s.integer(2), s.zero())),
        ];
        let v = check_joint(&sys, &seqs, &CheckOptions::default()).unwrap();
        // the product rotation (sqrt2, 2 sqrt2) carries the exact resonance
        // (2, -1), so the pair is not jointly ergodic
        assert_eq!(v.decision, Decision::NotJointlyErgodic);
        assert!(v.witnesses.iter().any(|w| w.exact));
        // quotient T^n alone is fine
        assert!(v
            .conditions
            .iter()
            .any(|(n, d)| n.starts_with("quotient") && *d == Decision::Ergodic));
    }

    #[test]
    fn distinct_rotations_jointly_ergodic() {
        let s = s235();
        let (sys, ids) = rotation(&s, &[s.sqrt(2).unwrap(), s.sqrt(3).unwrap()]);
        let seqs = vec![
            GlSeq::single(ids[0], GlfExpr::var(&s)),
            GlSeq::single(ids[1], GlfExpr::var(&s)),
        ];
        let v = check_joint(&sys, &seqs, &CheckOptions::default()).unwrap();
        assert_eq!(v.decision, Decision::JointlyErgodic);
    }

    #[test]
    fn flip_pair_not_jointly_ergodic() {
        let s = s235();
        let mut cyc = SystemSpec::cyclic(&s, vec![2]);
        let f = cyc.add_shift("F", vec![1]).unwrap();
        let seqs = vec![
            GlSeq::single(f, GlfExpr::var(&s)),
            GlSeq::single(f, GlfExpr::var(&s)),
        ];
        let v = check_joint(&cyc, &seqs, &CheckOptions::default()).unwrap();
        assert_eq!(v.decision, Decision::NotJointlyErgodic);
        // the quotient is the identity sequence
        assert!(v
            .witnesses
            .iter()
            .any(|w| w.certificate.as_deref() == Some("identity-sequence")));
    }

    #[test]
    fn cat_map_beatty_pair() {
        let s = s235();
        let mut cat = SystemSpec::toral_automorphism(&s, 2);
        let a = cat
            .add_automorphism("A", vec![vec![2, 1], vec![1, 1]])
            .unwrap();
        let seqs = vec![
            GlSeq::single(a, beatty(&s, 2)),
            GlSeq::single(a, beatty(&s, 3)),
        ];
        let v = check_joint(&cat, &seqs, &CheckOptions::default()).unwrap();
        assert_eq!(v.decision, Decision::JointlyErgodic, "notes: {:?}", v.notes);
    }

    #[test]
    fn spec_criterion_independent_rotations() {
        let s = s235();
        let (sys, ids) = rotation(&s, &[s.sqrt(3).unwrap(), s.sqrt(5).unwrap()]);
        let phi = beatty(&s, 2);
        let opts = CheckOptions {
            freq_cutoff: 2,
            ..CheckOptions::default()
        };
        let v = spec_criterion(&sys, &ids, &phi, &opts).unwrap();
        assert_eq!(v.decision, Decision::JointlyErgodic);
    }

    #[test]
    fn spec_criterion_with_rational_resonance() {
        let s = s235();
        // T2 rotates by sqrt2/2: beta = sqrt2/2 has alpha beta = 1
        let (sys, ids) = rotation(
            &s,
            &[
                s.sqrt(3).unwrap(),
                s.sqrt(2).unwrap().scale(&crate::number_field::rat(1, 2)),
            ],
        );
        let phi = beatty(&s, 2);
        let opts = CheckOptions {
            freq_cutoff: 2,
            ..CheckOptions::default()
        };
        let v = spec_criterion(&sys, &ids, &phi, &opts).unwrap();
        assert_eq!(v.decision, Decision::NotJointlyErgodic);
        assert!(v.witnesses.iter().any(|w| w.exact));
    }

    #[test]
    fn spec_criterion_requires_jointly_ergodic_base() {
        let s = s235();
        let r2 = s.sqrt(2).unwrap();
        let (sys, ids) = rotation(&s, &[r2.clone(), r2.scale(&crate::number_field::rat_i(2))]);
        let phi = beatty(&s, 2);
        assert!(matches!(
            spec_criterion(&sys, &ids, &phi, &CheckOptions::default()),
            Err(JointError::HypothesisFailed(_))
        ));
    }

    #[test]
    fn jointly_ergodic_implies_single_checks_pass() {
        // sub-family monotonicity: a positive joint verdict implies every
        // single sequence passes its own check
        let s = s235();
        let (sys, ids) = rotation(&s, &[s.sqrt(2).unwrap(), s.sqrt(3).unwrap()]);
        let seqs = vec![
            GlSeq::single(ids[0], GlfExpr::var(&s)),
            GlSeq::single(ids[1], beatty(&s, 5)),
        ];
        let opts = CheckOptions::default();
        let joint = check_joint(&sys, &seqs, &opts).unwrap();
        assert_eq!(joint.decision, Decision::JointlyErgodic);
        for seq in &seqs {
            let single = check_single(&sys, seq, &opts).unwrap();
            assert_eq!(single.decision, Decision::Ergodic);
        }
    }

    #[test]
    fn prime_check_empty_sequence_list() {
        // the empty product averages to 1 identically: zero defect
        let s = s235();
        let (sys, _) = rotation(&s, &[s.sqrt(2).unwrap()]);
        let sieve = PrimeSieve::new(1000);
        let report =
            prime_joint_check(&sys, &[], &[], &sieve, 1000, &[1], &CheckOptions::default())
                .unwrap();
        assert!(report.hypothesis_holds);
        assert_eq!(report.prime_defect, 0.0);
    }

    #[test]
    fn empirical_concordance_for_rotation_pair() {
        let s = s235();
        let (sys, ids) = rotation(&s, &[s.sqrt(2).unwrap(), s.sqrt(3).unwrap()]);
        let seqs = vec![
            GlSeq::single(ids[0], GlfExpr::var(&s)),
            GlSeq::single(ids[1], GlfExpr::var(&s)),
        ];
        let v = check_joint(&sys, &seqs, &CheckOptions::default()).unwrap();
        let bank: Vec<Vec<CharacterSum>> = vec![
            vec![CharacterSum::single(vec![1]), CharacterSum::single(vec![1])],
            vec![CharacterSum::single(vec![2]), CharacterSum::single(vec![-1])],
        ];
        let rep = empirical_validate(
            &sys,
            &seqs,
            &bank,
            &FolnerSchedule::Forward,
            100_000,
            0.05,
            0.15,
        )
        .unwrap();
        assert!(concordant(v.decision, &rep), "{v:?} vs {rep:?}");
        assert_eq!(rep.classification, Some(true));
    }

    #[test]
    fn prime_check_flip_counterexample_hypothesis_fails() {
        let s = s235();
        let mut cyc = SystemSpec::cyclic(&s, vec![2]);
        let f = cyc.add_shift("F", vec![1]).unwrap();
        let seqs = vec![GlSeq::single(f, GlfExpr::var(&s)), GlSeq::single(f, beatty(&s, 2))];
        let fns = vec![CharacterSum::single(vec![1]), CharacterSum::single(vec![0])];
        let sieve = PrimeSieve::new(100_000);
        let report = prime_joint_check(
            &cyc,
            &seqs,
            &fns,
            &sieve,
            100_000,
            &[1, 2],
            &CheckOptions::default(),
        )
        .unwrap();
        assert!(!report.hypothesis_holds);
        // W = 2 composition makes T^{2n+r} constant: not ergodic
        assert!(report
            .hypothesis
            .iter()
            .any(|(w, _, d)| *w == 2 && *d != Decision::JointlyErgodic));
        // the naive product prediction fails badly: T f1 int f2 vs int f1 int f2
        assert!(report.prime_defect > 0.4, "defect {}", report.prime_defect);
    }

    #[test]
    fn prime_check_rotation_pair_passes() {
        let s = s235();
        let (sys, ids) = rotation(&s, &[s.sqrt(2).unwrap(), s.sqrt(3).unwrap()]);
        let seqs = vec![
            GlSeq::single(ids[0], GlfExpr::var(&s)),
            GlSeq::single(ids[1], GlfExpr::var(&s)),
        ];
        let fns = vec![CharacterSum::single(vec![1]), CharacterSum::single(vec![1])];
        let sieve = PrimeSieve::new(200_000);
        let report = prime_joint_check(
            &sys,
            &seqs,
            &fns,
            &sieve,
            200_000,
            &[1, 2],
            &CheckOptions::default(),
        )
        .unwrap();
        assert!(report.hypothesis_holds, "{:?}", report.hypothesis);
        assert!(report.prime_defect < 0.05, "defect {}", report.prime_defect);
    }
}
