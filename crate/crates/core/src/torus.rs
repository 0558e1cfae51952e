//! Torus representations of bounded GL functions.
//!
//! Every bounded GL function `phi` can be realized as `phi(n) = F(n u)` where
//! `u` lies on a torus and `F` is affine on each cell of a finite polygonal
//! partition of the fundamental cube `[0,1)^d`. The construction here follows
//! the inductive structure of the expression: fractional parts of linear maps
//! seed one-dimensional representations, sums take product tori, scalings act
//! on the function, and an outer fractional part splits each cell along the
//! integer level sets of its affine map and reduces the offset.
//!
//! The representation keeps one *global* linear row `L` and a per-piece
//! constant `E_j`, so `F = L . x + E_j` on piece `j`. All splitting data is
//! exact (`SymReal` normals and offsets, half-open boundary convention
//! matching `{x} in [0,1)`), which makes `eval_exact` agree with the symbolic
//! evaluation bit for bit. Float caches back the quasi-Monte Carlo sampler.
//!
//! [`ClosureGroup`] parametrizes the closure `Z` of the orbit `Z u` as a
//! subtorus times a finite cyclic group, via the integer annihilator lattice
//! of `u` and a Smith-style change of coordinates.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};

use crate::glf_ast::GlfExpr;
use crate::linalg;
use crate::number_field::{
    rat_i, rat_to_f64, NfResult, NumberFieldError, Rat, Session, SymReal,
    DEFAULT_REFINEMENT_BUDGET,
};

/// Default cap on the number of pieces of a representation.
pub const DEFAULT_PIECE_CAP: usize = 10_000;

/// Default sample count for closure-group integration.
pub const DEFAULT_SAMPLES: usize = 1 << 16;

#[derive(Debug)]
pub enum TorusError {
    NotBounded,
    PieceExplosion { count: usize, cap: usize },
    PointOnNoPiece { n: i64 },
    NoInteriorPiece,
    CutoffExceeded { eps: f64 },
    Nf(NumberFieldError),
}

impl fmt::Display for TorusError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TorusError::NotBounded => write!(f, "representation requires a bounded function"),
            TorusError::PieceExplosion { count, cap } => {
                write!(f, "piece count {count} exceeds cap {cap}")
            }
            TorusError::PointOnNoPiece { n } => {
                write!(f, "evaluation point at n = {n} lies on no piece (partition bug)")
            }
            TorusError::NoInteriorPiece => write!(f, "no piece has 0 as an interior limit point"),
            TorusError::CutoffExceeded { eps } => {
                write!(f, "trigonometric approximation to {eps} unreachable within budget")
            }
            TorusError::Nf(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for TorusError {}

impl From<NumberFieldError> for TorusError {
    fn from(e: NumberFieldError) -> Self {
        TorusError::Nf(e)
    }
}

pub type TorusResult<T> = Result<T, TorusError>;

/// Half-space constraint `normal . x (<|<=) offset` inside the fundamental
/// cube.
#[derive(Clone, Debug)]
pub struct HalfSpace {
    pub normal: Vec<SymReal>,
    pub offset: SymReal,
    pub strict: bool,
}

/// Intersection of half-spaces with the fundamental cube `[0,1)^d`.
#[derive(Clone, Debug, Default)]
pub struct Polygon {
    pub constraints: Vec<HalfSpace>,
}

impl Polygon {
    pub fn whole_cube() -> Polygon {
        Polygon {
            constraints: Vec::new(),
        }
    }

    pub fn contains_exact(&self, x: &[SymReal], budget: u32) -> NfResult<bool> {
        for hs in &self.constraints {
            if !constraint_holds(hs, x, None, budget)? {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

const SCREEN_LEVEL: u32 = 16;

/// Decides `normal . x (<|<=) offset` exactly. A rigorous float bracket
/// screens the common case (all enclosures are cached on the participating
/// values); the symbolic product path only runs when the bracket straddles
/// the boundary. `xb` optionally supplies precomputed coordinate brackets.
fn constraint_holds(
    hs: &HalfSpace,
    x: &[SymReal],
    xb: Option<&[(f64, f64)]>,
    budget: u32,
) -> NfResult<bool> {
    let mut lo = 0.0f64;
    let mut hi = 0.0f64;
    let mut screened = true;
    for (i, (n, xi)) in hs.normal.iter().zip(x).enumerate() {
        if n.is_zero() {
            continue;
        }
        let (nl, nh) = n.f64_bounds(SCREEN_LEVEL)?;
        let (xl, xh) = match xb {
            Some(b) => b[i],
            None => xi.f64_bounds(SCREEN_LEVEL)?,
        };
        if !(nl.is_finite() && nh.is_finite() && xl.is_finite() && xh.is_finite()) {
            screened = false;
            break;
        }
        let cands = [nl * xl, nl * xh, nh * xl, nh * xh];
        lo += cands.iter().cloned().fold(f64::INFINITY, f64::min);
        hi += cands.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    }
    if screened {
        if let Ok((cl, ch)) = hs.offset.f64_bounds(SCREEN_LEVEL) {
            if hi < cl {
                return Ok(true); // strictly below the offset
            }
            if lo > ch {
                return Ok(false);
            }
        }
    }
    // boundary-ambiguous: exact symbolic evaluation
    let mut lhs = hs.offset.session().zero();
    for (n, xi) in hs.normal.iter().zip(x) {
        if n.is_zero() {
            continue;
        }
        lhs = lhs.add(&n.mul(xi)?)?;
    }
    Ok(match lhs.cmp_exact(&hs.offset, budget)? {
        std::cmp::Ordering::Greater => false,
        std::cmp::Ordering::Equal => !hs.strict,
        std::cmp::Ordering::Less => true,
    })
}

/// One affine cell: polygon plus the constant part of F on it.
#[derive(Clone, Debug)]
pub struct Piece {
    pub polygon: Polygon,
    pub offset: SymReal,
}

struct FloatPiece {
    normals: Vec<Vec<f64>>,
    offsets: Vec<f64>,
    strict: Vec<bool>,
    value_offset: f64,
}

/// Piecewise-affine representation `phi(n) = F(n u)` with global linear row.
pub struct TorusRep {
    session: Session,
    pub dim: usize,
    pub rotation: Vec<SymReal>,
    pub linear_row: Vec<SymReal>,
    pub pieces: Vec<Piece>,
    cap: usize,
    rotation_f64: Vec<f64>,
    linear_row_f64: Vec<f64>,
    float_pieces: Vec<FloatPiece>,
}

impl fmt::Debug for TorusRep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "TorusRep {{ dim: {}, pieces: {} }}",
            self.dim,
            self.pieces.len()
        )
    }
}

impl TorusRep {
    fn new(
        session: Session,
        dim: usize,
        rotation: Vec<SymReal>,
        linear_row: Vec<SymReal>,
        pieces: Vec<Piece>,
        cap: usize,
    ) -> TorusResult<TorusRep> {
        if pieces.len() > cap {
            return Err(TorusError::PieceExplosion {
                count: pieces.len(),
                cap,
            });
        }
        let rotation_f64 = rotation.iter().map(|v| v.to_f64()).collect();
        let linear_row_f64: Vec<f64> = linear_row.iter().map(|v| v.to_f64()).collect();
        let float_pieces = pieces
            .iter()
            .map(|p| FloatPiece {
                normals: p
                    .polygon
                    .constraints
                    .iter()
                    .map(|h| h.normal.iter().map(|v| v.to_f64()).collect())
                    .collect(),
                offsets: p
                    .polygon
                    .constraints
                    .iter()
                    .map(|h| h.offset.to_f64())
                    .collect(),
                strict: p.polygon.constraints.iter().map(|h| h.strict).collect(),
                value_offset: p.offset.to_f64(),
            })
            .collect();
        Ok(TorusRep {
            session,
            dim,
            rotation,
            linear_row,
            pieces,
            cap,
            rotation_f64,
            linear_row_f64,
            float_pieces,
        })
    }

    fn constant(session: &Session, value: SymReal, cap: usize) -> TorusResult<TorusRep> {
        TorusRep::new(
            session.clone(),
            0,
            Vec::new(),
            Vec::new(),
            vec![Piece {
                polygon: Polygon::whole_cube(),
                offset: value,
            }],
            cap,
        )
    }

    /// Product torus carrying the sum of the two functions.
    fn sum(&self, other: &TorusRep) -> TorusResult<TorusRep> {
        let dim = self.dim + other.dim;
        let mut rotation = self.rotation.clone();
        rotation.extend(other.rotation.iter().cloned());
        let mut linear_row = self.linear_row.clone();
        linear_row.extend(other.linear_row.iter().cloned());
        let mut pieces = Vec::with_capacity(self.pieces.len() * other.pieces.len());
        let zero = self.session.zero();
        for a in &self.pieces {
            for b in &other.pieces {
                let mut constraints = Vec::new();
                for hs in &a.polygon.constraints {
                    let mut normal = hs.normal.clone();
                    normal.extend(std::iter::repeat_with(|| zero.clone()).take(other.dim));
                    constraints.push(HalfSpace {
                        normal,
                        offset: hs.offset.clone(),
                        strict: hs.strict,
                    });
                }
                for hs in &b.polygon.constraints {
                    let mut normal: Vec<SymReal> =
                        std::iter::repeat_with(|| zero.clone()).take(self.dim).collect();
                    normal.extend(hs.normal.iter().cloned());
                    constraints.push(HalfSpace {
                        normal,
                        offset: hs.offset.clone(),
                        strict: hs.strict,
                    });
                }
                pieces.push(Piece {
                    polygon: Polygon { constraints },
                    offset: a.offset.add(&b.offset)?,
                });
            }
        }
        TorusRep::new(
            self.session.clone(),
            dim,
            rotation,
            linear_row,
            pieces,
            self.cap,
        )
    }

    fn scale(&self, c: &SymReal) -> TorusResult<TorusRep> {
        let linear_row = self
            .linear_row
            .iter()
            .map(|v| c.mul(v))
            .collect::<NfResult<Vec<_>>>()?;
        let pieces = self
            .pieces
            .iter()
            .map(|p| {
                Ok(Piece {
                    polygon: p.polygon.clone(),
                    offset: c.mul(&p.offset)?,
                })
            })
            .collect::<NfResult<Vec<_>>>()?;
        TorusRep::new(
            self.session.clone(),
            self.dim,
            self.rotation.clone(),
            linear_row,
            pieces,
            self.cap,
        )
    }

    /// Adds a fresh leading coordinate rotating by `a`, with `F` picking up
    /// that coordinate (realizing `x0 + F(x)` for the later fractional cut).
    fn prepend_rotation(&self, a: &SymReal) -> TorusResult<TorusRep> {
        let mut rotation = vec![a.clone()];
        rotation.extend(self.rotation.iter().cloned());
        let mut linear_row = vec![self.session.one()];
        linear_row.extend(self.linear_row.iter().cloned());
        let zero = self.session.zero();
        let pieces = self
            .pieces
            .iter()
            .map(|p| {
                let constraints = p
                    .polygon
                    .constraints
                    .iter()
                    .map(|hs| {
                        let mut normal = vec![zero.clone()];
                        normal.extend(hs.normal.iter().cloned());
                        HalfSpace {
                            normal,
                            offset: hs.offset.clone(),
                            strict: hs.strict,
                        }
                    })
                    .collect();
                Piece {
                    polygon: Polygon { constraints },
                    offset: p.offset.clone(),
                }
            })
            .collect();
        TorusRep::new(
            self.session.clone(),
            self.dim + 1,
            rotation,
            linear_row,
            pieces,
            self.cap,
        )
    }

    /// Bounds of `F` over a piece, using the half-open cube `[0,1)` per
    /// coordinate. The returned flag says whether the upper bound is
    /// exclusive (some positive coefficient contributed its unattained sup).
    fn value_bounds(&self, piece: &Piece, budget: u32) -> NfResult<(Rat, Rat, bool)> {
        let mut lo = piece.offset.clone();
        let mut hi = piece.offset.clone();
        let mut hi_exclusive = false;
        for l in &self.linear_row {
            match l.signum(budget)? {
                0 => {}
                s if s > 0 => {
                    hi = hi.add(l)?;
                    hi_exclusive = true;
                }
                _ => lo = lo.add(l)?,
            }
        }
        let level = budget.min(32);
        let llo = match lo.as_rational() {
            Some(r) => r.clone(),
            None => lo.enclosure(level)?.0,
        };
        let (hhi, hi_rational) = match hi.as_rational() {
            Some(r) => (r.clone(), true),
            None => (hi.enclosure(level)?.1, false),
        };
        Ok((llo, hhi, hi_exclusive && hi_rational))
    }

    /// Fractional part of the represented function: splits every piece along
    /// the integer levels of its affine map and reduces the offset.
    fn frac(&self) -> TorusResult<TorusRep> {
        let budget = DEFAULT_REFINEMENT_BUDGET;
        let mut pieces = Vec::new();
        for piece in &self.pieces {
            let (lo, hi, hi_exclusive) = self.value_bounds(piece, budget)?;
            let k_lo = lo.floor().to_integer();
            let mut k_hi = hi.floor().to_integer();
            if hi_exclusive && hi.is_integer() {
                k_hi -= BigInt::one();
            }
            let mut k = k_lo.clone();
            while k <= k_hi {
                // new cell: piece /\ { k <= L.x + E < k+1 }
                let mut constraints = piece.polygon.constraints.clone();
                let krat = Rat::from_integer(k.clone());
                // L.x >= k - E  <=>  (-L).x <= E - k
                constraints.push(HalfSpace {
                    normal: self.linear_row.iter().map(SymReal::neg).collect(),
                    offset: piece.offset.add_rat(&-&krat),
                    strict: false,
                });
                // L.x < k + 1 - E
                constraints.push(HalfSpace {
                    normal: self.linear_row.clone(),
                    offset: piece
                        .offset
                        .neg()
                        .add_rat(&(&krat + rat_i(1))),
                    strict: true,
                });
                pieces.push(Piece {
                    polygon: Polygon { constraints },
                    offset: piece.offset.add_rat(&-krat),
                });
                if pieces.len() > self.cap {
                    return Err(TorusError::PieceExplosion {
                        count: pieces.len(),
                        cap: self.cap,
                    });
                }
                k += BigInt::one();
            }
        }
        TorusRep::new(
            self.session.clone(),
            self.dim,
            self.rotation.clone(),
            self.linear_row.clone(),
            pieces,
            self.cap,
        )
    }

    pub fn session(&self) -> &Session {
        &self.session
    }

    /// Exact orbit point `n u` reduced into the fundamental cube.
    pub fn point_exact(&self, n: i64) -> NfResult<Vec<SymReal>> {
        self.rotation
            .iter()
            .map(|u| u.scale(&rat_i(n)).frac(DEFAULT_REFINEMENT_BUDGET))
            .collect()
    }

    /// Exact piece lookup, guided by the float caches: the float candidate is
    /// verified first (through the screened constraint test) and the full
    /// scan only runs for boundary-ambiguous points.
    pub fn piece_index_exact(&self, x: &[SymReal]) -> TorusResult<usize> {
        let xb: Vec<(f64, f64)> = x
            .iter()
            .map(|v| v.f64_bounds(SCREEN_LEVEL))
            .collect::<NfResult<_>>()?;
        let xf: Vec<f64> = xb.iter().map(|(l, h)| 0.5 * (l + h)).collect();
        let guess = self.piece_index_f64(&xf);
        let check = |j: usize| -> NfResult<bool> {
            for hs in &self.pieces[j].polygon.constraints {
                if !constraint_holds(hs, x, Some(&xb), DEFAULT_REFINEMENT_BUDGET)? {
                    return Ok(false);
                }
            }
            Ok(true)
        };
        if check(guess)? {
            return Ok(guess);
        }
        for j in 0..self.pieces.len() {
            if j != guess && check(j)? {
                return Ok(j);
            }
        }
        Err(TorusError::PointOnNoPiece { n: i64::MIN })
    }

    /// Exact evaluation `F(n u)`; agrees with the symbolic evaluation of the
    /// represented expression.
    pub fn eval_exact(&self, n: i64) -> TorusResult<SymReal> {
        let x = self.point_exact(n)?;
        let j = self
            .piece_index_exact(&x)
            .map_err(|_| TorusError::PointOnNoPiece { n })?;
        let mut acc = self.pieces[j].offset.clone();
        for (l, xi) in self.linear_row.iter().zip(&x) {
            if l.is_zero() {
                continue;
            }
            acc = acc.add(&l.mul(xi)?)?;
        }
        Ok(acc)
    }

    pub fn point_f64(&self, n: i64) -> Vec<f64> {
        self.rotation_f64
            .iter()
            .map(|u| (u * n as f64).rem_euclid(1.0))
            .collect()
    }

    /// Piece lookup with float arithmetic; returns the piece with the
    /// smallest constraint violation, which only matters on the measure-zero
    /// boundaries.
    pub fn piece_index_f64(&self, x: &[f64]) -> usize {
        let mut best = 0usize;
        let mut best_violation = f64::INFINITY;
        for (j, p) in self.float_pieces.iter().enumerate() {
            let mut violation: f64 = 0.0;
            for (ni, (off, _strict)) in p
                .normals
                .iter()
                .zip(p.offsets.iter().zip(p.strict.iter()))
            {
                let lhs: f64 = ni.iter().zip(x).map(|(a, b)| a * b).sum();
                violation = violation.max(lhs - off);
            }
            if violation <= 0.0 {
                return j;
            }
            if violation < best_violation {
                best_violation = violation;
                best = j;
            }
        }
        best
    }

    pub fn value_at_f64(&self, x: &[f64]) -> f64 {
        let j = self.piece_index_f64(x);
        let dot: f64 = self.linear_row_f64.iter().zip(x).map(|(a, b)| a * b).sum();
        dot + self.float_pieces[j].value_offset
    }

    pub fn eval_f64(&self, n: i64) -> f64 {
        let x = self.point_f64(n);
        self.value_at_f64(&x)
    }
}

/// Builds the torus representation of a bounded GL function.
pub fn build_rep(phi: &GlfExpr) -> TorusResult<TorusRep> {
    build_rep_with_cap(phi, DEFAULT_PIECE_CAP)
}

pub fn build_rep_with_cap(phi: &GlfExpr, cap: usize) -> TorusResult<TorusRep> {
    let can = phi.canonicalize()?;
    if !can.slope.is_zero() {
        return Err(TorusError::NotBounded);
    }
    build_bounded(&phi.session(), &can.constant, &can.terms, cap)
}

fn build_bounded(
    session: &Session,
    constant: &SymReal,
    terms: &[(SymReal, GlfExpr)],
    cap: usize,
) -> TorusResult<TorusRep> {
    let mut rep = TorusRep::constant(session, constant.clone(), cap)?;
    for (c, g) in terms {
        let fr = frac_rep(session, g, cap)?;
        rep = rep.sum(&fr.scale(c)?)?;
    }
    Ok(rep)
}

/// Representation of `{g}` for an arbitrary GL function `g`.
fn frac_rep(session: &Session, g: &GlfExpr, cap: usize) -> TorusResult<TorusRep> {
    let can = g.canonicalize()?;
    let inner = build_bounded(session, &can.constant, &can.terms, cap)?;
    let with_linear = if can.slope.is_zero()
        || can
            .slope
            .as_rational()
            .map(|r| r.is_integer())
            .unwrap_or(false)
    {
        // integer multiples of n vanish mod 1
        inner
    } else {
        inner.prepend_rotation(&can.slope)?
    };
    with_linear.frac()
}

/// Deterministic Halton low-discrepancy sequence.
pub struct Halton {
    bases: Vec<u64>,
}

const HALTON_PRIMES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

impl Halton {
    pub fn new(dims: usize) -> Halton {
        assert!(dims <= HALTON_PRIMES.len(), "too many sampling dimensions");
        Halton {
            bases: HALTON_PRIMES[..dims].to_vec(),
        }
    }

    pub fn point(&self, idx: usize) -> Vec<f64> {
        self.bases
            .iter()
            .map(|&b| {
                let mut f = 1.0f64;
                let mut r = 0.0f64;
                let mut i = idx as u64 + 1;
                while i > 0 {
                    f /= b as f64;
                    r += f * (i % b) as f64;
                    i /= b;
                }
                r
            })
            .collect()
    }
}

/// Closure of the orbit `Z u` inside the torus, as subtorus x finite cyclic
/// group in Smith coordinates `y = q_inv x`.
pub struct ClosureGroup {
    pub dim: usize,
    /// diagonal moduli of the finite coordinates
    pub moduli: Vec<BigInt>,
    /// change of coordinates `x = q y`
    pub q: linalg::Mat,
    pub q_inv: linalg::Mat,
    /// finite coordinates of `u` in `y`-space, reduced mod 1
    pub finite_base: Vec<Rat>,
    /// order of the finite part of the orbit
    pub order: u64,
    pub free_dims: usize,
    q_f64: Vec<Vec<f64>>,
    q_inv_f64: Vec<Vec<f64>>,
    lattice: Vec<Vec<BigInt>>,
}

impl fmt::Debug for ClosureGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "ClosureGroup {{ dim: {}, finite: {:?}, order: {}, free: {} }}",
            self.dim, self.moduli, self.order, self.free_dims
        )
    }
}

pub fn closure_group(rep: &TorusRep) -> TorusResult<ClosureGroup> {
    closure_group_of_point(&rep.rotation)
}

pub fn closure_group_of_point(u: &[SymReal]) -> TorusResult<ClosureGroup> {
    let dim = u.len();
    let lattice = crate::number_field::integer_annihilator(u)?;
    let (moduli, q, q_inv) = if lattice.is_empty() {
        (Vec::new(), linalg::identity(dim), linalg::identity(dim))
    } else {
        let d = linalg::smith_diagonalize(&lattice);
        (d.diag, d.q, d.q_inv)
    };
    // y_u = q_inv * u; its first `moduli.len()` coordinates are rational
    let mut finite_base = Vec::new();
    for (t, modulus) in moduli.iter().enumerate() {
        let mut acc = u[0].session().zero();
        for (c, ui) in q_inv[t].iter().zip(u) {
            acc = acc.add(&ui.scale(&Rat::from_integer(c.clone())))?;
        }
        let r = acc
            .as_rational()
            .expect("finite closure coordinate must be rational")
            .clone();
        let reduced = &r - r.floor();
        debug_assert!(
            (&reduced * Rat::from_integer(modulus.clone())).is_integer(),
            "finite coordinate denominator divides the modulus"
        );
        finite_base.push(reduced);
    }
    let order = finite_base
        .iter()
        .fold(BigInt::one(), |acc, r| acc.lcm(r.denom()))
        .to_u64()
        .expect("finite part order fits in u64");
    let free_dims = dim - moduli.len();
    let q_f64 = q
        .iter()
        .map(|row| row.iter().map(|x| x.to_f64().unwrap()).collect())
        .collect();
    let q_inv_f64 = q_inv
        .iter()
        .map(|row| row.iter().map(|x| x.to_f64().unwrap()).collect())
        .collect();
    Ok(ClosureGroup {
        dim,
        moduli,
        q,
        q_inv,
        finite_base,
        order,
        free_dims,
        q_f64,
        q_inv_f64,
        lattice,
    })
}

impl ClosureGroup {
    /// Generating relations `m` with `m . u` integral.
    pub fn relations(&self) -> &[Vec<BigInt>] {
        &self.lattice
    }

    /// `idx`-th quasi-uniform sample of the closure, in torus coordinates.
    pub fn sample_f64(&self, idx: usize, halton: &Halton) -> Vec<f64> {
        let finite_count = self.moduli.len();
        let mut y = vec![0.0f64; self.dim];
        if self.order > 1 {
            let j = (idx as u64 % self.order) as i64;
            for (t, base) in self.finite_base.iter().enumerate() {
                let v = rat_to_f64(base) * j as f64;
                y[t] = v.rem_euclid(1.0);
            }
        }
        if self.free_dims > 0 {
            let h = halton.point(idx / self.order.max(1) as usize);
            for (k, hv) in h.iter().enumerate().take(self.free_dims) {
                y[finite_count + k] = *hv;
            }
        }
        // x = q y mod 1
        (0..self.dim)
            .map(|i| {
                let v: f64 = self.q_f64[i].iter().zip(&y).map(|(a, b)| a * b).sum();
                v.rem_euclid(1.0)
            })
            .collect()
    }

    /// Exact points of a finite closure (no free dimensions).
    pub fn enumerate_exact(&self, session: &Session) -> Option<Vec<Vec<SymReal>>> {
        if self.free_dims != 0 {
            return None;
        }
        let mut points = Vec::new();
        for j in 0..self.order {
            let mut y: Vec<Rat> = Vec::with_capacity(self.dim);
            for base in &self.finite_base {
                let v = base * rat_i(j as i64);
                y.push(&v - v.floor());
            }
            let x: Vec<SymReal> = (0..self.dim)
                .map(|i| {
                    let mut acc = Rat::zero();
                    for (c, yv) in self.q[i].iter().zip(&y) {
                        acc += Rat::from_integer(c.clone()) * yv;
                    }
                    let acc = &acc - acc.floor();
                    session.rational(acc)
                })
                .collect();
            points.push(x);
        }
        Some(points)
    }

    /// Free (subtorus) coordinates of the orbit point `n u`, for evaluating
    /// characters of the closure at orbit points.
    pub fn free_coords_f64(&self, x: &[f64]) -> Vec<f64> {
        let finite_count = self.moduli.len();
        (finite_count..self.dim)
            .map(|t| {
                let v: f64 = self.q_inv_f64[t].iter().zip(x).map(|(a, b)| a * b).sum();
                v.rem_euclid(1.0)
            })
            .collect()
    }
}

impl TorusRep {
    /// Exact Haar integral of `F` over the full torus, for dimensions 1 and
    /// 2: symbolic endpoint/vertex enumeration and division-free shoelace
    /// moments. Returns `None` when the dimension is higher or a needed
    /// symbolic inverse is unavailable in the session. Meaningful as a mean
    /// value only when the orbit closure is the whole torus; used as an
    /// independent cross-check of the sampler.
    pub fn exact_mean_full_torus(&self) -> NfResult<Option<SymReal>> {
        match self.dim {
            0 => Ok(Some(self.pieces[0].offset.clone())),
            1 => self.exact_mean_1d(),
            2 => self.exact_mean_2d(),
            _ => Ok(None),
        }
    }

    fn exact_mean_1d(&self) -> NfResult<Option<SymReal>> {
        let s = &self.session;
        let half = s.ratio(1, 2);
        let mut total = s.zero();
        for piece in &self.pieces {
            // the piece is an interval: intersect constraint boundaries
            let mut lo = s.zero();
            let mut hi = s.one();
            for hs in &piece.polygon.constraints {
                let n = &hs.normal[0];
                if n.is_zero() {
                    continue;
                }
                let Ok(inv) = n.try_inverse() else {
                    return Ok(None);
                };
                let bound = inv.mul(&hs.offset)?;
                if n.signum(DEFAULT_REFINEMENT_BUDGET)? > 0 {
                    // n x <= c: upper bound c/n
                    if bound.cmp_exact(&hi, DEFAULT_REFINEMENT_BUDGET)? == std::cmp::Ordering::Less
                    {
                        hi = bound;
                    }
                } else if bound.cmp_exact(&lo, DEFAULT_REFINEMENT_BUDGET)?
                    == std::cmp::Ordering::Greater
                {
                    lo = bound;
                }
            }
            if lo.cmp_exact(&hi, DEFAULT_REFINEMENT_BUDGET)? != std::cmp::Ordering::Less {
                continue; // empty piece
            }
            // integral of l x + e over [lo, hi]
            let l = &self.linear_row[0];
            let width = hi.sub(&lo)?;
            let sq_diff = hi.mul(&hi)?.sub(&lo.mul(&lo)?)?;
            let part = l.mul(&sq_diff)?.mul(&half)?.add(&piece.offset.mul(&width)?)?;
            total = total.add(&part)?;
        }
        Ok(Some(total))
    }

    fn exact_mean_2d(&self) -> NfResult<Option<SymReal>> {
        let s = &self.session;
        let sixth = s.ratio(1, 6);
        let half = s.ratio(1, 2);
        let mut total = s.zero();
        for piece in &self.pieces {
            // closed constraint list including the cube facets
            let mut lines: Vec<(SymReal, SymReal, SymReal)> = Vec::new(); // a x + b y = c
            let mut closed: Vec<HalfSpace> = piece.polygon.constraints.clone();
            for (a, b, c) in [
                (-1i64, 0, 0), // x >= 0
                (1, 0, 1),     // x <= 1
                (0, -1, 0),    // y >= 0
                (0, 1, 1),     // y <= 1
            ] {
                closed.push(HalfSpace {
                    normal: vec![s.integer(a), s.integer(b)],
                    offset: s.integer(c),
                    strict: false,
                });
            }
            for hs in &closed {
                lines.push((hs.normal[0].clone(), hs.normal[1].clone(), hs.offset.clone()));
            }
            // candidate vertices: pairwise line intersections inside the
            // closure of the piece
            let mut verts: Vec<(SymReal, SymReal)> = Vec::new();
            for i in 0..lines.len() {
                for j in i + 1..lines.len() {
                    let (a1, b1, c1) = &lines[i];
                    let (a2, b2, c2) = &lines[j];
                    let det = a1.mul(b2)?.sub(&b1.mul(a2)?)?;
                    if det.is_zero() {
                        continue;
                    }
                    let Ok(inv) = det.try_inverse() else {
                        return Ok(None);
                    };
                    let x = c1.mul(b2)?.sub(&b1.mul(c2)?)?.mul(&inv)?;
                    let y = a1.mul(c2)?.sub(&c1.mul(a2)?)?.mul(&inv)?;
                    // closed-region membership (strictness ignored: the
                    // boundary has measure zero)
                    let mut inside = x.signum(DEFAULT_REFINEMENT_BUDGET)? >= 0
                        && y.signum(DEFAULT_REFINEMENT_BUDGET)? >= 0
                        && s.one().sub(&x)?.signum(DEFAULT_REFINEMENT_BUDGET)? >= 0
                        && s.one().sub(&y)?.signum(DEFAULT_REFINEMENT_BUDGET)? >= 0;
                    if inside {
                        for hs in &piece.polygon.constraints {
                            let lhs = hs.normal[0].mul(&x)?.add(&hs.normal[1].mul(&y)?)?;
                            if lhs.sub(&hs.offset)?.signum(DEFAULT_REFINEMENT_BUDGET)? > 0 {
                                inside = false;
                                break;
                            }
                        }
                    }
                    if inside && !verts.iter().any(|(vx, vy)| vx == &x && vy == &y) {
                        verts.push((x, y));
                    }
                }
            }
            if verts.len() < 3 {
                continue; // empty or degenerate piece
            }
            // order the convex hull by angle around the float centroid
            let cx: f64 = verts.iter().map(|(x, _)| x.to_f64()).sum::<f64>() / verts.len() as f64;
            let cy: f64 = verts.iter().map(|(_, y)| y.to_f64()).sum::<f64>() / verts.len() as f64;
            verts.sort_by(|p, q| {
                let ap = (p.1.to_f64() - cy).atan2(p.0.to_f64() - cx);
                let aq = (q.1.to_f64() - cy).atan2(q.0.to_f64() - cx);
                ap.partial_cmp(&aq).unwrap()
            });
            // shoelace moments: signed area A = (1/2) sum cross_i,
            // S_x = (1/6) sum (x_i + x_{i+1}) cross_i, similarly S_y
            let mut area2 = s.zero(); // 2A
            let mut sx6 = s.zero(); // 6 S_x
            let mut sy6 = s.zero(); // 6 S_y
            for k in 0..verts.len() {
                let (x0, y0) = &verts[k];
                let (x1, y1) = &verts[(k + 1) % verts.len()];
                let cross = x0.mul(y1)?.sub(&x1.mul(y0)?)?;
                area2 = area2.add(&cross)?;
                sx6 = sx6.add(&x0.add(x1)?.mul(&cross)?)?;
                sy6 = sy6.add(&y0.add(y1)?.mul(&cross)?)?;
            }
            // orientation: make the signed area positive
            if area2.signum(DEFAULT_REFINEMENT_BUDGET)? < 0 {
                area2 = area2.neg();
                sx6 = sx6.neg();
                sy6 = sy6.neg();
            }
            let area = area2.mul(&half)?;
            let sx = sx6.mul(&sixth)?;
            let sy = sy6.mul(&sixth)?;
            // integral of l1 x + l2 y + e over the piece
            let part = self.linear_row[0]
                .mul(&sx)?
                .add(&self.linear_row[1].mul(&sy)?)?
                .add(&piece.offset.mul(&area)?)?;
            total = total.add(&part)?;
        }
        Ok(Some(total))
    }
}

/// Cesàro mean of a bounded GL function: the Haar integral of `F` over the
/// orbit closure, with an empirical standard-error proxy. Finite closures
/// are enumerated exactly.
pub fn mean_value(rep: &TorusRep) -> TorusResult<(f64, f64)> {
    mean_value_with_samples(rep, DEFAULT_SAMPLES)
}

pub fn mean_value_with_samples(rep: &TorusRep, samples: usize) -> TorusResult<(f64, f64)> {
    let z = closure_group(rep)?;
    if z.free_dims == 0 && z.order <= samples as u64 {
        let pts = z.enumerate_exact(rep.session()).unwrap();
        let mut acc = 0.0;
        for x in &pts {
            let xf: Vec<f64> = x.iter().map(|v| v.to_f64()).collect();
            acc += rep.value_at_f64(&xf);
        }
        return Ok((acc / pts.len() as f64, 0.0));
    }
    let halton = Halton::new(z.free_dims);
    let mut sum = 0.0f64;
    let mut sumsq = 0.0f64;
    let m = samples;
    for idx in 0..m {
        let x = z.sample_f64(idx, &halton);
        let v = rep.value_at_f64(&x);
        sum += v;
        sumsq += v * v;
    }
    let mean = sum / m as f64;
    let var = (sumsq / m as f64 - mean * mean).max(0.0);
    Ok((mean, (var / m as f64).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::number_field::rat;

    fn s23() -> Session {
        Session::quadratic(&[2, 3])
    }

    fn frac_lin(_s: &Session, slope: SymReal, icept: SymReal) -> GlfExpr {
        GlfExpr::frac(GlfExpr::linear(slope, icept))
    }

    #[test]
    fn base_case_rep() {
        let s = s23();
        let e = frac_lin(&s, s.sqrt(2).unwrap(), s.zero());
        let rep = build_rep(&e).unwrap();
        assert_eq!(rep.dim, 1);
        assert_eq!(rep.rotation[0], s.sqrt(2).unwrap());
        assert_eq!(rep.pieces.len(), 1);
        for n in -50..50 {
            assert_eq!(rep.eval_exact(n).unwrap(), e.eval_exact(n).unwrap());
        }
    }

    #[test]
    fn sum_of_two_fracs() {
        let s = s23();
        let e = GlfExpr::sum(vec![
            frac_lin(&s, s.sqrt(2).unwrap(), s.zero()),
            frac_lin(&s, s.sqrt(3).unwrap(), s.ratio(1, 3)),
        ]);
        let rep = build_rep(&e).unwrap();
        assert_eq!(rep.dim, 2);
        for n in -30..30 {
            assert_eq!(rep.eval_exact(n).unwrap(), e.eval_exact(n).unwrap());
        }
    }

    #[test]
    fn nested_frac_splits_pieces() {
        let s = s23();
        let inner = frac_lin(&s, s.sqrt(2).unwrap(), s.zero());
        let e = GlfExpr::frac(GlfExpr::scale(s.integer(2), inner));
        let rep = build_rep(&e).unwrap();
        assert_eq!(rep.dim, 1);
        assert!(rep.pieces.len() >= 2, "needs a split at x = 1/2");
        for n in 0..1000 {
            assert_eq!(
                rep.eval_exact(n).unwrap(),
                e.eval_exact(n).unwrap(),
                "mismatch at n = {n}"
            );
        }
    }

    #[test]
    fn rep_handles_floors_and_scales() {
        let s = s23();
        // psi(n) = -{sqrt2 n} written via floors: [sqrt2 n] - sqrt2 n
        let e = GlfExpr::sum(vec![
            GlfExpr::floor(GlfExpr::linear(s.sqrt(2).unwrap(), s.zero())),
            GlfExpr::linear(s.sqrt(2).unwrap(), s.zero()).neg(),
        ]);
        let rep = build_rep(&e).unwrap();
        for n in -100..100 {
            assert_eq!(rep.eval_exact(n).unwrap(), e.eval_exact(n).unwrap());
        }
        // irrational scale inside a fractional part
        let e2 = GlfExpr::frac(GlfExpr::scale(
            s.sqrt(3).unwrap(),
            frac_lin(&s, s.sqrt(2).unwrap(), s.zero()),
        ));
        let rep2 = build_rep(&e2).unwrap();
        for n in -100..100 {
            assert_eq!(rep2.eval_exact(n).unwrap(), e2.eval_exact(n).unwrap());
        }
    }

    #[test]
    fn unbounded_rejected() {
        let s = s23();
        let e = GlfExpr::floor(GlfExpr::linear(s.sqrt(2).unwrap(), s.zero()));
        assert!(matches!(build_rep(&e), Err(TorusError::NotBounded)));
    }

    #[test]
    fn eval_f64_close_to_exact() {
        let s = s23();
        let e = GlfExpr::frac(GlfExpr::sum(vec![
            GlfExpr::scale(s.ratio(5, 3), frac_lin(&s, s.sqrt(2).unwrap(), s.ratio(1, 7))),
            frac_lin(&s, s.sqrt(3).unwrap(), s.zero()),
        ]));
        let rep = build_rep(&e).unwrap();
        for n in -200..200 {
            let f = rep.eval_f64(n);
            let x = rep.eval_exact(n).unwrap().to_f64();
            assert!((f - x).abs() < 1e-7, "n = {n}: {f} vs {x}");
        }
    }

    #[test]
    fn closure_full_circle() {
        let s = s23();
        let rep = build_rep(&frac_lin(&s, s.sqrt(2).unwrap(), s.zero())).unwrap();
        let z = closure_group(&rep).unwrap();
        assert_eq!(z.order, 1);
        assert_eq!(z.free_dims, 1);
        assert!(z.relations().is_empty());
    }

    #[test]
    fn closure_cyclic_three_points() {
        let s = s23();
        let rep = build_rep(&frac_lin(&s, s.ratio(1, 3), s.zero())).unwrap();
        let z = closure_group(&rep).unwrap();
        assert_eq!(z.order, 3);
        assert_eq!(z.free_dims, 0);
        let pts = z.enumerate_exact(&s).unwrap();
        assert_eq!(pts.len(), 3);
    }

    #[test]
    fn closure_diagonal_subtorus() {
        let s = s23();
        let r2 = s.sqrt(2).unwrap();
        let u = vec![r2.clone(), r2.scale(&rat_i(2))];
        let z = closure_group_of_point(&u).unwrap();
        assert_eq!(z.free_dims, 1);
        assert_eq!(z.order, 1);
        // sampled points satisfy the lattice relation 2x1 - x2 = 0 mod 1
        let halton = Halton::new(z.free_dims);
        for idx in 0..200 {
            let x = z.sample_f64(idx, &halton);
            for rel in z.relations() {
                let v: f64 = rel
                    .iter()
                    .zip(&x)
                    .map(|(c, xi)| c.to_f64().unwrap() * xi)
                    .sum();
                let frac = (v - v.round()).abs();
                assert!(frac < 1e-9, "relation violated: {frac}");
            }
        }
    }

    #[test]
    fn mean_values() {
        let s = s23();
        // equidistributed sawtooth: mean 1/2
        let rep = build_rep(&frac_lin(&s, s.sqrt(2).unwrap(), s.zero())).unwrap();
        let (m, _) = mean_value_with_samples(&rep, 1 << 14).unwrap();
        assert!((m - 0.5).abs() < 0.01, "mean {m}");
        // constant
        let repc = build_rep(&GlfExpr::constant(s.ratio(7, 2))).unwrap();
        let (mc, ec) = mean_value(&repc).unwrap();
        assert_eq!(mc, 3.5);
        assert_eq!(ec, 0.0);
        // finite orbit {0, 1/4, 1/2, 3/4}: exact mean 3/8
        let rep4 = build_rep(&frac_lin(&s, s.ratio(1, 4), s.zero())).unwrap();
        let (m4, e4) = mean_value(&rep4).unwrap();
        assert_eq!(m4, 0.375);
        assert_eq!(e4, 0.0);
    }

    #[test]
    fn piece_cap_enforced() {
        let s = s23();
        let e = GlfExpr::frac(GlfExpr::scale(
            s.integer(100),
            frac_lin(&s, s.sqrt(2).unwrap(), s.zero()),
        ));
        assert!(matches!(
            build_rep_with_cap(&e, 10),
            Err(TorusError::PieceExplosion { .. })
        ));
    }

    #[test]
    fn representation_fidelity_weighted_samples() {
        let s = s23();
        let r2 = s.sqrt(2).unwrap();
        let r3 = s.sqrt(3).unwrap();
        let exprs = vec![
            GlfExpr::frac(GlfExpr::sum(vec![
                GlfExpr::scale(r3.clone(), frac_lin(&s, r2.clone(), s.zero())),
                GlfExpr::linear(s.integer(3), s.ratio(2, 5)),
            ])),
            GlfExpr::sum(vec![
                GlfExpr::scale(rat_sym(&s, 5, 7), GlfExpr::frac(GlfExpr::floor(GlfExpr::linear(r2.clone(), s.zero())))),
                frac_lin(&s, r3.clone(), s.ratio(1, 9)).neg(),
            ]),
        ];
        for e in &exprs {
            assert!(e.is_bounded().unwrap());
            let rep = build_rep(e).unwrap();
            for n in -300..300 {
                assert_eq!(
                    rep.eval_exact(n).unwrap(),
                    e.eval_exact(n).unwrap(),
                    "mismatch for {e:?} at {n}"
                );
            }
        }
    }

    fn rat_sym(s: &Session, p: i64, q: i64) -> SymReal {
        s.rational(rat(p, q))
    }
}
