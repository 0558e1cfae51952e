//! Concrete commutative measure-preserving systems with closed-form spectral
//! data: torus rotations, cyclic shifts, and toral automorphisms.
//!
//! Functions live in character banks. On rotations and cyclic shifts a
//! character is an eigenfunction and a GL sequence acts by an exactly
//! computable phase; on automorphisms the action permutes frequencies by
//! integer matrix powers. Multi-correlation averages therefore reduce to
//! bookkeeping of (frequency, coefficient) pairs, and the L2 norm of a finite
//! character combination is read off from orthonormality.
//!
//! Phase arithmetic is organized so that resonances cancel symbolically: per
//! distinct exponent expression the total frequency-weighted rotation
//! coefficient is assembled as an exact `SymReal` before any float enters.
//! Frequency orbits under automorphisms are tracked modulo two fixed 61-bit
//! primes, which keeps the collision bookkeeping exact with overwhelming
//! probability while avoiding huge-integer matrix growth along the orbit.

use std::collections::HashMap;
use std::fmt;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::averaging::FolnerSchedule;
use crate::glf_ast::GlfExpr;
use crate::number_field::{NumberFieldError, Rat, Session, SymReal};

const TAU: f64 = std::f64::consts::TAU;
const P1: u64 = (1 << 61) - 1;
const P2: u64 = 2_305_843_009_213_693_811; // prime below 2^61

#[derive(Debug)]
pub enum SystemError {
    NonCommuting(String),
    NotIntegerExponent { at: i64 },
    BadTransform(String),
    Nf(NumberFieldError),
}

impl fmt::Display for SystemError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SystemError::NonCommuting(m) => write!(f, "transformations do not commute: {m}"),
            SystemError::NotIntegerExponent { at } => {
                write!(f, "exponent is not integer-valued at n = {at}")
            }
            SystemError::BadTransform(m) => write!(f, "invalid transformation: {m}"),
            SystemError::Nf(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for SystemError {}

impl From<NumberFieldError> for SystemError {
    fn from(e: NumberFieldError) -> Self {
        SystemError::Nf(e)
    }
}

pub type SysResult<T> = Result<T, SystemError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct TransformId(pub usize);

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SystemKind {
    /// rotations of a `dim`-torus
    TorusRotation { dim: usize },
    /// shifts of a product of cyclic groups
    CyclicShift { moduli: Vec<u64> },
    /// automorphisms of a `dim`-torus given by integer matrices with
    /// determinant of modulus 1
    ToralAutomorphism { dim: usize },
}

#[derive(Clone, Debug)]
pub struct Transform {
    pub name: String,
    /// rotation vector (torus), zero elsewhere
    pub rotation: Vec<SymReal>,
    /// shifts (cyclic), empty elsewhere
    pub shifts: Vec<i64>,
    /// matrix (automorphism), empty elsewhere
    pub matrix: Vec<Vec<BigInt>>,
}

pub struct SystemSpec {
    session: Session,
    pub kind: SystemKind,
    pub transforms: Vec<Transform>,
}

impl fmt::Debug for SystemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "SystemSpec {{ kind: {:?}, transforms: {:?} }}",
            self.kind,
            self.transforms.iter().map(|t| &t.name).collect::<Vec<_>>()
        )
    }
}

fn det(m: &[Vec<BigInt>]) -> BigInt {
    let n = m.len();
    match n {
        0 => BigInt::one(),
        1 => m[0][0].clone(),
        _ => {
            let mut acc = BigInt::zero();
            for j in 0..n {
                let minor: Vec<Vec<BigInt>> = m[1..]
                    .iter()
                    .map(|row| {
                        row.iter()
                            .enumerate()
                            .filter(|(c, _)| *c != j)
                            .map(|(_, v)| v.clone())
                            .collect()
                    })
                    .collect();
                let term = &m[0][j] * det(&minor);
                if j % 2 == 0 {
                    acc += term;
                } else {
                    acc -= term;
                }
            }
            acc
        }
    }
}

fn mat_mul_big(a: &[Vec<BigInt>], b: &[Vec<BigInt>]) -> Vec<Vec<BigInt>> {
    let n = a.len();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| (0..n).map(|k| &a[i][k] * &b[k][j]).sum())
                .collect()
        })
        .collect()
}

fn mat_identity_big(n: usize) -> Vec<Vec<BigInt>> {
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j { BigInt::one() } else { BigInt::zero() })
                .collect()
        })
        .collect()
}

/// Integer inverse of a matrix with determinant +-1 (adjugate method).
fn mat_inverse_unimodular(m: &[Vec<BigInt>]) -> Vec<Vec<BigInt>> {
    let n = m.len();
    let d = det(m);
    assert!(d.magnitude() == &num_bigint::BigUint::one());
    let mut adj = vec![vec![BigInt::zero(); n]; n];
    for i in 0..n {
        for j in 0..n {
            let minor: Vec<Vec<BigInt>> = (0..n)
                .filter(|&r| r != i)
                .map(|r| {
                    (0..n)
                        .filter(|&c| c != j)
                        .map(|c| m[r][c].clone())
                        .collect()
                })
                .collect();
            let mut cof = det(&minor);
            if (i + j) % 2 == 1 {
                cof = -cof;
            }
            adj[j][i] = cof; // transpose of cofactor matrix
        }
    }
    if d.is_negative() {
        for row in adj.iter_mut() {
            for v in row.iter_mut() {
                *v = -v.clone();
            }
        }
    }
    adj
}

fn mat_pow_big(m: &[Vec<BigInt>], e: i64) -> Vec<Vec<BigInt>> {
    let n = m.len();
    let base = if e < 0 {
        mat_inverse_unimodular(m)
    } else {
        m.to_vec()
    };
    let mut exp = e.unsigned_abs();
    let mut acc = mat_identity_big(n);
    let mut sq = base;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mat_mul_big(&acc, &sq);
        }
        sq = mat_mul_big(&sq, &sq);
        exp >>= 1;
    }
    acc
}

impl SystemSpec {
    pub fn session(&self) -> &Session {
        &self.session
    }

    pub fn torus_rotation(session: &Session, dim: usize) -> SystemSpec {
        SystemSpec {
            session: session.clone(),
            kind: SystemKind::TorusRotation { dim },
            transforms: Vec::new(),
        }
    }

    pub fn cyclic(session: &Session, moduli: Vec<u64>) -> SystemSpec {
        SystemSpec {
            session: session.clone(),
            kind: SystemKind::CyclicShift { moduli },
            transforms: Vec::new(),
        }
    }

    pub fn toral_automorphism(session: &Session, dim: usize) -> SystemSpec {
        SystemSpec {
            session: session.clone(),
            kind: SystemKind::ToralAutomorphism { dim },
            transforms: Vec::new(),
        }
    }

    pub fn add_rotation(&mut self, name: &str, rotation: Vec<SymReal>) -> SysResult<TransformId> {
        let SystemKind::TorusRotation { dim } = &self.kind else {
            return Err(SystemError::BadTransform("not a rotation system".into()));
        };
        if rotation.len() != *dim {
            return Err(SystemError::BadTransform("rotation dimension mismatch".into()));
        }
        self.transforms.push(Transform {
            name: name.to_string(),
            rotation,
            shifts: Vec::new(),
            matrix: Vec::new(),
        });
        Ok(TransformId(self.transforms.len() - 1))
    }

    pub fn add_shift(&mut self, name: &str, shifts: Vec<i64>) -> SysResult<TransformId> {
        let SystemKind::CyclicShift { moduli } = &self.kind else {
            return Err(SystemError::BadTransform("not a cyclic system".into()));
        };
        if shifts.len() != moduli.len() {
            return Err(SystemError::BadTransform("shift arity mismatch".into()));
        }
        self.transforms.push(Transform {
            name: name.to_string(),
            rotation: Vec::new(),
            shifts,
            matrix: Vec::new(),
        });
        Ok(TransformId(self.transforms.len() - 1))
    }

    pub fn add_automorphism(
        &mut self,
        name: &str,
        matrix: Vec<Vec<i64>>,
    ) -> SysResult<TransformId> {
        let SystemKind::ToralAutomorphism { dim } = &self.kind else {
            return Err(SystemError::BadTransform("not an automorphism system".into()));
        };
        let m: Vec<Vec<BigInt>> = matrix
            .iter()
            .map(|r| r.iter().map(|&x| BigInt::from(x)).collect())
            .collect();
        if m.len() != *dim || m.iter().any(|r| r.len() != *dim) {
            return Err(SystemError::BadTransform("matrix dimension mismatch".into()));
        }
        if det(&m).magnitude() != &num_bigint::BigUint::one() {
            return Err(SystemError::BadTransform(
                "matrix must have determinant +-1".into(),
            ));
        }
        // all listed automorphisms must commute
        for t in &self.transforms {
            if mat_mul_big(&t.matrix, &m) != mat_mul_big(&m, &t.matrix) {
                return Err(SystemError::NonCommuting(format!("{name} vs {}", t.name)));
            }
        }
        self.transforms.push(Transform {
            name: name.to_string(),
            rotation: Vec::new(),
            shifts: Vec::new(),
            matrix: m,
        });
        Ok(TransformId(self.transforms.len() - 1))
    }

    pub fn transform(&self, id: TransformId) -> &Transform {
        &self.transforms[id.0]
    }

    pub fn id_by_name(&self, name: &str) -> Option<TransformId> {
        self.transforms
            .iter()
            .position(|t| t.name == name)
            .map(TransformId)
    }

    /// Frequency-vector length for characters of this system.
    pub fn freq_dim(&self) -> usize {
        match &self.kind {
            SystemKind::TorusRotation { dim } => *dim,
            SystemKind::CyclicShift { moduli } => moduli.len(),
            SystemKind::ToralAutomorphism { dim } => *dim,
        }
    }
}

/// A character, indexed by an integer frequency vector.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CharacterFn {
    pub freq: Vec<i64>,
}

impl CharacterFn {
    pub fn new(freq: Vec<i64>) -> CharacterFn {
        CharacterFn { freq }
    }

    pub fn is_mean_zero(&self) -> bool {
        self.freq.iter().any(|&k| k != 0)
    }
}

/// Finite linear combination of characters; the concrete function bank.
#[derive(Clone, Debug)]
pub struct CharacterSum {
    pub terms: Vec<(CharacterFn, Complex64)>,
}

impl CharacterSum {
    pub fn single(freq: Vec<i64>) -> CharacterSum {
        CharacterSum {
            terms: vec![(CharacterFn::new(freq), Complex64::new(1.0, 0.0))],
        }
    }

    pub fn new(terms: Vec<(CharacterFn, Complex64)>) -> CharacterSum {
        CharacterSum { terms }
    }

    /// Integral over the space: the coefficient mass at the trivial
    /// character (frequency zero, mod the moduli on cyclic systems).
    pub fn integral(&self, kind: &SystemKind) -> Complex64 {
        self.terms
            .iter()
            .filter(|(c, _)| freq_is_trivial(kind, &c.freq))
            .map(|(_, v)| v)
            .sum()
    }
}

/// Whether a frequency indexes the constant character.
pub fn freq_is_trivial(kind: &SystemKind, freq: &[i64]) -> bool {
    match kind {
        SystemKind::CyclicShift { moduli } => freq
            .iter()
            .zip(moduli)
            .all(|(k, m)| k.rem_euclid(*m as i64) == 0),
        _ => freq.iter().all(|&k| k == 0),
    }
}

/// Canonical representative of a frequency (reduces mod the moduli on
/// cyclic systems).
pub fn reduce_freq(kind: &SystemKind, freq: &mut [i64]) {
    if let SystemKind::CyclicShift { moduli } = kind {
        for (k, m) in freq.iter_mut().zip(moduli) {
            *k = k.rem_euclid(*m as i64);
        }
    }
}

/// Formal product `prod_j T_j^{phi_j(n)}`.
#[derive(Clone, Debug)]
pub struct GlSeq {
    pub factors: Vec<(TransformId, GlfExpr)>,
}

impl GlSeq {
    pub fn new(factors: Vec<(TransformId, GlfExpr)>) -> GlSeq {
        GlSeq { factors }
    }

    pub fn single(t: TransformId, exponent: GlfExpr) -> GlSeq {
        GlSeq {
            factors: vec![(t, exponent)],
        }
    }

    /// The identity sequence (empty product).
    pub fn identity() -> GlSeq {
        GlSeq { factors: Vec::new() }
    }

    pub fn is_identity(&self) -> bool {
        self.factors.is_empty()
    }
}

/// `seq_i^{-1} seq_j`: concatenates `j`'s factors with negated exponents of
/// `i`, combining exponents on equal handles and dropping exact zeros.
pub fn inverse_times(seq_i: &GlSeq, seq_j: &GlSeq) -> SysResult<GlSeq> {
    let mut factors: Vec<(TransformId, GlfExpr)> = Vec::new();
    let mut push = |id: TransformId, e: GlfExpr| -> SysResult<()> {
        for (fid, fe) in factors.iter_mut() {
            if *fid == id {
                *fe = GlfExpr::sum(vec![fe.clone(), e]);
                return Ok(());
            }
        }
        factors.push((id, e));
        Ok(())
    };
    for (id, e) in &seq_j.factors {
        push(*id, e.clone())?;
    }
    for (id, e) in &seq_i.factors {
        push(*id, e.clone().neg())?;
    }
    // drop structurally-zero exponents
    let mut kept = Vec::new();
    for (id, e) in factors {
        let can = e.canonicalize()?;
        let zero = can.slope.is_zero() && can.constant.is_zero() && can.terms.is_empty();
        if !zero {
            kept.push((id, e));
        }
    }
    Ok(GlSeq { factors: kept })
}

/// Spectral description of a single transformation.
#[derive(Debug)]
pub enum EigSet {
    /// eigenvalues `exp(2 pi i k . alpha)`, `k` ranging over the frequency
    /// lattice
    RotationLattice { alphas: Vec<SymReal> },
    /// roots of unity `exp(2 pi i sum_c j_c s_c / m_c)`
    CyclicRoots { moduli: Vec<u64>, shifts: Vec<i64> },
    /// only the trivial eigenvalue (weakly mixing)
    TrivialOnly,
}

pub fn eig_description(sys: &SystemSpec, t: TransformId) -> SysResult<EigSet> {
    let tr = sys.transform(t);
    Ok(match &sys.kind {
        SystemKind::TorusRotation { .. } => EigSet::RotationLattice {
            alphas: tr.rotation.clone(),
        },
        SystemKind::CyclicShift { moduli } => EigSet::CyclicRoots {
            moduli: moduli.clone(),
            shifts: tr.shifts.clone(),
        },
        // hyperbolic automorphisms have trivial point spectrum; the
        // root-of-unity (non-weakly-mixing) case is reported by the
        // standalone check below
        SystemKind::ToralAutomorphism { .. } => EigSet::TrivialOnly,
    })
}

/// `A^m = I` for some `m <= 12` signals a root-of-unity eigenvalue.
pub fn automorphism_has_root_of_unity(matrix: &[Vec<BigInt>]) -> bool {
    let n = matrix.len();
    let id = mat_identity_big(n);
    let mut acc = id.clone();
    for _ in 1..=12 {
        acc = mat_mul_big(&acc, matrix);
        if acc == id {
            return true;
        }
    }
    false
}

/// Evaluates an integer-valued exponent at `n`.
pub fn exponent_value(e: &GlfExpr, n: i64) -> SysResult<i64> {
    let v = e.eval_f64(n);
    let r = v.round();
    if (v - r).abs() > 1e-6 {
        return Err(SystemError::NotIntegerExponent { at: n });
    }
    Ok(r as i64)
}

/// Applies a GL sequence at time `n` to a character: returns the exact phase
/// (mod 1) and the transformed frequency.
pub fn apply_glseq_to_character(
    sys: &SystemSpec,
    seq: &GlSeq,
    f: &CharacterFn,
    n: i64,
) -> SysResult<(SymReal, CharacterFn)> {
    let s = sys.session();
    match &sys.kind {
        SystemKind::TorusRotation { .. } => {
            let mut phase = s.zero();
            for (id, e) in &seq.factors {
                let v = e.eval_exact(n)?;
                let r = v
                    .as_rational()
                    .filter(|r| r.is_integer())
                    .cloned()
                    .ok_or(SystemError::NotIntegerExponent { at: n })?;
                let tr = sys.transform(*id);
                let mut k_alpha = s.zero();
                for (k, a) in f.freq.iter().zip(&tr.rotation) {
                    k_alpha = k_alpha.add(&a.scale(&Rat::from_integer(BigInt::from(*k))))?;
                }
                phase = phase.add(&k_alpha.scale(&r))?;
            }
            Ok((phase.frac(crate::number_field::DEFAULT_REFINEMENT_BUDGET)?, f.clone()))
        }
        SystemKind::CyclicShift { moduli } => {
            let mut phase = Rat::zero();
            for (id, e) in &seq.factors {
                let v = exponent_value(e, n)?;
                let tr = sys.transform(*id);
                for ((k, sft), m) in f.freq.iter().zip(&tr.shifts).zip(moduli) {
                    phase += Rat::new(BigInt::from(k * sft * v), BigInt::from(*m));
                }
            }
            let phase = &phase - phase.floor();
            Ok((s.rational(phase), f.clone()))
        }
        SystemKind::ToralAutomorphism { .. } => {
            let mut k: Vec<BigInt> = f.freq.iter().map(|&x| BigInt::from(x)).collect();
            for (id, e) in &seq.factors {
                let v = exponent_value(e, n)?;
                let tr = sys.transform(*id);
                let mt = transpose(&tr.matrix);
                let p = mat_pow_big(&mt, v);
                k = (0..k.len())
                    .map(|i| (0..k.len()).map(|j| &p[i][j] * &k[j]).sum())
                    .collect();
            }
            let freq: Vec<i64> = k
                .iter()
                .map(|x| x.to_i64().expect("frequency fits in i64"))
                .collect();
            Ok((s.zero(), CharacterFn::new(freq)))
        }
    }
}

fn transpose(m: &[Vec<BigInt>]) -> Vec<Vec<BigInt>> {
    let n = m.len();
    (0..n)
        .map(|i| (0..n).map(|j| m[j][i].clone()).collect())
        .collect()
}

/// Product system on `X^k` with blockwise action: transformation `t` of
/// component `i` becomes a transformation acting on block `i` only.
pub fn product_system(systems: &[&SystemSpec]) -> SysResult<(SystemSpec, Vec<Vec<TransformId>>)> {
    assert!(!systems.is_empty());
    let session = systems[0].session().clone();
    let kind = match &systems[0].kind {
        SystemKind::TorusRotation { .. } => {
            let dim = systems
                .iter()
                .map(|s| match &s.kind {
                    SystemKind::TorusRotation { dim } => Ok(*dim),
                    _ => Err(SystemError::NonCommuting("mixing system kinds".into())),
                })
                .sum::<SysResult<usize>>()?;
            SystemKind::TorusRotation { dim }
        }
        SystemKind::CyclicShift { .. } => {
            let mut moduli = Vec::new();
            for s in systems {
                match &s.kind {
                    SystemKind::CyclicShift { moduli: m } => moduli.extend(m.iter().copied()),
                    _ => return Err(SystemError::NonCommuting("mixing system kinds".into())),
                }
            }
            SystemKind::CyclicShift { moduli }
        }
        SystemKind::ToralAutomorphism { .. } => {
            let dim = systems
                .iter()
                .map(|s| match &s.kind {
                    SystemKind::ToralAutomorphism { dim } => Ok(*dim),
                    _ => Err(SystemError::NonCommuting("mixing system kinds".into())),
                })
                .sum::<SysResult<usize>>()?;
            SystemKind::ToralAutomorphism { dim }
        }
    };
    let mut product = SystemSpec {
        session,
        kind,
        transforms: Vec::new(),
    };
    let mut maps = Vec::new();
    let mut offset = 0usize;
    let total = systems.iter().map(|s| s.freq_dim()).sum::<usize>();
    for sys in systems {
        let d = sys.freq_dim();
        let mut map = Vec::new();
        for tr in &sys.transforms {
            let name = format!("{}@{}", tr.name, offset);
            let id = match &product.kind {
                SystemKind::TorusRotation { .. } => {
                    let mut rot: Vec<SymReal> =
                        std::iter::repeat_with(|| product.session.zero()).take(total).collect();
                    rot[offset..offset + d].clone_from_slice(&tr.rotation);
                    product.add_rotation(&name, rot)?
                }
                SystemKind::CyclicShift { .. } => {
                    let mut shifts = vec![0i64; total];
                    shifts[offset..offset + d].clone_from_slice(&tr.shifts);
                    product.add_shift(&name, shifts)?
                }
                SystemKind::ToralAutomorphism { .. } => {
                    // block-diagonal: identity outside the component block
                    let mut m = mat_identity_big(total);
                    for i in 0..d {
                        for j in 0..d {
                            m[offset + i][offset + j] = tr.matrix[i][j].clone();
                        }
                    }
                    let as_i64: Vec<Vec<i64>> = m
                        .iter()
                        .map(|r| r.iter().map(|x| x.to_i64().unwrap()).collect())
                        .collect();
                    product.add_automorphism(&name, as_i64)?
                }
            };
            map.push(id);
        }
        maps.push(map);
        offset += d;
    }
    Ok((product, maps))
}

// --- multi-correlation averages -------------------------------------------

struct ModMatrix {
    p: u64,
    fwd: Vec<Vec<u64>>,
    inv: Vec<Vec<u64>>,
}

impl ModMatrix {
    fn new(m: &[Vec<BigInt>], p: u64) -> ModMatrix {
        let reduce = |m: &[Vec<BigInt>]| -> Vec<Vec<u64>> {
            m.iter()
                .map(|r| {
                    r.iter()
                        .map(|x| {
                            let v = x.mod_floor(&BigInt::from(p));
                            v.to_u64().unwrap()
                        })
                        .collect()
                })
                .collect()
        };
        let inv = mat_inverse_unimodular(m);
        ModMatrix {
            p,
            fwd: reduce(m),
            inv: reduce(&inv),
        }
    }

    fn apply_to(&self, acc: &mut [Vec<u64>], steps: i64) {
        let m = if steps >= 0 { &self.fwd } else { &self.inv };
        for _ in 0..steps.unsigned_abs() {
            let n = acc.len();
            let old = acc.to_vec();
            for i in 0..n {
                for j in 0..n {
                    let mut v: u128 = 0;
                    for (k, ok) in old.iter().enumerate() {
                        v += m[i][k] as u128 * ok[j] as u128;
                        let _ = k;
                    }
                    acc[i][j] = (v % self.p as u128) as u64;
                }
            }
        }
    }
}

/// L2 distance between the Cesàro average of `prod_i T_i(n) f_i` and the
/// product of the integrals, computed exactly through character bookkeeping.
pub fn multi_average_l2(
    sys: &SystemSpec,
    seqs: &[GlSeq],
    fns: &[CharacterSum],
    schedule: &FolnerSchedule,
    index: u64,
) -> SysResult<f64> {
    multi_average_l2_over(sys, seqs, fns, &schedule.elements(index))
}


/// Shared accumulation: mean coefficient per reduced total frequency for
/// rotation/cyclic systems, plus the count. Resonances cancel exactly: the
/// per-expression rotation coefficients are combined symbolically before any
/// float arithmetic.
fn character_accumulate(
    sys: &SystemSpec,
    seqs: &[GlSeq],
    fns: &[CharacterSum],
    phi: &[i64],
) -> SysResult<(HashMap<Vec<i64>, Complex64>, f64)> {
    let count = phi.len() as f64;
    let combos = term_combinations(fns);
    let (exprs, factor_expr) = distinct_exponents(seqs)?;
    let mut values: Vec<Vec<i64>> = Vec::with_capacity(exprs.len());
    for e in &exprs {
        let mut col = Vec::with_capacity(phi.len());
        for &n in phi {
            col.push(exponent_value(e, n)?);
        }
        values.push(col);
    }
    let mut acc: HashMap<Vec<i64>, Complex64> = HashMap::new();
    for (combo, coeff) in &combos {
        let fdim = sys.freq_dim();
        let mut total_freq = vec![0i64; fdim];
        for (i, &ti) in combo.iter().enumerate() {
            for (c, k) in total_freq.iter_mut().zip(&fns[i].terms[ti].0.freq) {
                *c += k;
            }
        }
        reduce_freq(&sys.kind, &mut total_freq);
        let mut betas: Vec<SymReal> = vec![sys.session().zero(); exprs.len()];
        for (i, seq) in seqs.iter().enumerate() {
            let k = &fns[i].terms[combo[i]].0.freq;
            for ((id, _), &eidx) in seq.factors.iter().zip(&factor_expr[i]) {
                let tr = sys.transform(*id);
                let mut k_alpha = sys.session().zero();
                match &sys.kind {
                    SystemKind::TorusRotation { .. } => {
                        for (kc, a) in k.iter().zip(&tr.rotation) {
                            k_alpha =
                                k_alpha.add(&a.scale(&Rat::from_integer(BigInt::from(*kc))))?;
                        }
                    }
                    SystemKind::CyclicShift { moduli } => {
                        for ((kc, sft), m) in k.iter().zip(&tr.shifts).zip(moduli) {
                            k_alpha = k_alpha.add(&sys.session().rational(Rat::new(
                                BigInt::from(kc * sft),
                                BigInt::from(*m),
                            )))?;
                        }
                    }
                    _ => unreachable!(),
                }
                betas[eidx] = betas[eidx].add(&k_alpha)?;
            }
        }
        let betas_f64: Vec<f64> = betas.iter().map(|b| b.to_f64()).collect();
        let exact_zero: Vec<bool> = betas.iter().map(|b| b.is_zero()).collect();
        let slot = acc.entry(total_freq).or_insert_with(Complex64::zero);
        for pos in 0..phi.len() {
            let mut theta = 0.0f64;
            for e in 0..exprs.len() {
                if exact_zero[e] {
                    continue;
                }
                theta += (values[e][pos] as f64 * betas_f64[e]).rem_euclid(1.0);
            }
            *slot += coeff * Complex64::from_polar(1.0, TAU * theta.rem_euclid(1.0));
        }
    }
    for v in acc.values_mut() {
        *v /= count;
    }
    Ok((acc, count))
}

fn term_combinations(fns: &[CharacterSum]) -> Vec<(Vec<usize>, Complex64)> {
    let mut combos: Vec<(Vec<usize>, Complex64)> = vec![(Vec::new(), Complex64::new(1.0, 0.0))];
    for f in fns {
        let mut next = Vec::new();
        for (prefix, coeff) in &combos {
            for (ti, (_, c)) in f.terms.iter().enumerate() {
                let mut p = prefix.clone();
                p.push(ti);
                next.push((p, coeff * c));
            }
        }
        combos = next;
    }
    combos
}

fn distinct_exponents(seqs: &[GlSeq]) -> SysResult<(Vec<GlfExpr>, Vec<Vec<usize>>)> {
    let mut exprs: Vec<GlfExpr> = Vec::new();
    let mut factor_expr: Vec<Vec<usize>> = Vec::new();
    for seq in seqs {
        let mut ids = Vec::new();
        for (_, e) in &seq.factors {
            let pos = match exprs.iter().position(|x| x == e) {
                Some(p) => p,
                None => {
                    exprs.push(e.clone());
                    exprs.len() - 1
                }
            };
            ids.push(pos);
        }
        factor_expr.push(ids);
    }
    Ok((exprs, factor_expr))
}

/// Averaged coefficient per total frequency (no expectation subtraction):
/// the character expansion of `(1/|phi|) sum_n prod_i T_i(n) f_i`. Only
/// rotation and cyclic systems expose frequencies directly.
pub fn character_average(
    sys: &SystemSpec,
    seqs: &[GlSeq],
    fns: &[CharacterSum],
    phi: &[i64],
) -> SysResult<HashMap<Vec<i64>, Complex64>> {
    if matches!(sys.kind, SystemKind::ToralAutomorphism { .. }) {
        return Err(SystemError::BadTransform(
            "character averages with explicit frequencies need an eigenbasis".into(),
        ));
    }
    let (acc, _) = character_accumulate(sys, seqs, fns, phi)?;
    Ok(acc)
}

/// Same defect over an arbitrary finite index set (e.g. the primes up to N).
pub fn multi_average_l2_over(
    sys: &SystemSpec,
    seqs: &[GlSeq],
    fns: &[CharacterSum],
    phi: &[i64],
) -> SysResult<f64> {
    assert_eq!(seqs.len(), fns.len());
    let count = phi.len() as f64;
    let expectation: Complex64 = fns.iter().map(|f| f.integral(&sys.kind)).product();
    let norm_sq_total: f64;
    match &sys.kind {
        SystemKind::TorusRotation { .. } | SystemKind::CyclicShift { .. } => {
            let (mut acc, _) = character_accumulate(sys, seqs, fns, phi)?;
            let mut has_trivial = false;
            for (freq, v) in acc.iter_mut() {
                if freq_is_trivial(&sys.kind, freq) {
                    *v -= expectation;
                    has_trivial = true;
                }
            }
            let mut total: f64 = acc.values().map(|v| v.norm_sqr()).sum();
            if !has_trivial {
                total += expectation.norm_sqr();
            }
            norm_sq_total = total;
        }
        SystemKind::ToralAutomorphism { dim } => {
            let combos = term_combinations(fns);
            let (exprs, factor_expr) = distinct_exponents(seqs)?;
            let mut values: Vec<Vec<i64>> = Vec::with_capacity(exprs.len());
            for e in &exprs {
                let mut col = Vec::with_capacity(phi.len());
                for &n in phi {
                    col.push(exponent_value(e, n)?);
                }
                values.push(col);
            }
            // track transposed matrix powers modulo two primes per factor
            let fdim = *dim;
            let mut states: Vec<Vec<FactorState>> = Vec::new();
            for seq in seqs {
                let mut row = Vec::new();
                for (id, _) in &seq.factors {
                    let mt = transpose(&sys.transform(*id).matrix);
                    row.push(FactorState {
                        m1: ModMatrix::new(&mt, P1),
                        m2: ModMatrix::new(&mt, P2),
                        acc1: (0..fdim)
                            .map(|i| (0..fdim).map(|j| u64::from(i == j)).collect())
                            .collect(),
                        acc2: (0..fdim)
                            .map(|i| (0..fdim).map(|j| u64::from(i == j)).collect())
                            .collect(),
                        current: 0,
                    });
                }
                states.push(row);
            }
            let mut acc: HashMap<Vec<u64>, Complex64> = HashMap::new();
            let mut zero_key: Option<Vec<u64>> = None;
            for (pos, _n) in phi.iter().enumerate() {
                // advance running powers to the exponent values at this n
                for (i, seq_states) in states.iter_mut().enumerate() {
                    for (j, st) in seq_states.iter_mut().enumerate() {
                        let target = values[factor_expr[i][j]][pos];
                        let delta = target - st.current;
                        if delta != 0 {
                            st.m1.apply_to(&mut st.acc1, delta);
                            st.m2.apply_to(&mut st.acc2, delta);
                            st.current = target;
                        }
                    }
                }
                for (combo, coeff) in &combos {
                    // residues of the total transformed frequency: the
                    // frequency vectors of the component blocks concatenate
                    let mut key = Vec::with_capacity(2 * fdim * seqs.len());
                    for (i, &ti) in combo.iter().enumerate() {
                        let k = &fns[i].terms[ti].0.freq;
                        let (r1, r2) = apply_residues(&states[i], k, fdim);
                        key.extend(r1);
                        key.extend(r2);
                    }
                    if combo
                        .iter()
                        .enumerate()
                        .all(|(i, &ti)| !fns[i].terms[ti].0.is_mean_zero())
                    {
                        zero_key = Some(key.clone());
                    }
                    *acc.entry(key).or_insert_with(Complex64::zero) += coeff;
                }
            }
            for (key, v) in acc.iter_mut() {
                *v /= count;
                if Some(key) == zero_key.as_ref() {
                    *v -= expectation;
                }
            }
            let mut total: f64 = acc.values().map(|v| v.norm_sqr()).sum();
            if zero_key.is_none() {
                total += expectation.norm_sqr();
            }
            norm_sq_total = total;
        }
    }
    Ok(norm_sq_total.sqrt())
}

/// Running transposed-matrix power of one sequence factor, tracked modulo
/// two primes and advanced incrementally as the exponent changes.
struct FactorState {
    m1: ModMatrix,
    m2: ModMatrix,
    acc1: Vec<Vec<u64>>,
    acc2: Vec<Vec<u64>>,
    current: i64,
}

fn apply_residues(states: &[FactorState], k: &[i64], fdim: usize) -> (Vec<u64>, Vec<u64>) {
    let mut v1: Vec<u64> = k.iter().map(|&x| x.rem_euclid(P1 as i64) as u64).collect();
    let mut v2: Vec<u64> = k.iter().map(|&x| x.rem_euclid(P2 as i64) as u64).collect();
    for st in states {
        v1 = mat_vec_mod(&st.acc1, &v1, P1, fdim);
        v2 = mat_vec_mod(&st.acc2, &v2, P2, fdim);
    }
    (v1, v2)
}

fn mat_vec_mod(m: &[Vec<u64>], v: &[u64], p: u64, n: usize) -> Vec<u64> {
    (0..n)
        .map(|i| {
            let mut acc: u128 = 0;
            for j in 0..n {
                acc += m[i][j] as u128 * v[j] as u128;
            }
            (acc % p as u128) as u64
        })
        .collect()
}
