//! Symbolic generalized (bracket) linear functions.
//!
//! A [`GlfExpr`] is built from linear atoms `a*x + b` by sums, scalar
//! multiples, integer parts, and fractional parts. The class is graded by
//! *weight*: linear atoms have weight 0 and each floor/frac layer adds one.
//! Every expression decomposes uniquely as `a*x + psi(x)` with `psi` bounded;
//! [`GlfExpr::linear_part`] and [`GlfExpr::bounded_part`] compute that
//! decomposition, and [`GlfExpr::bound_interval`] encloses the range of the
//! bounded remainder.
//!
//! `Frac` is a first-class node (lowered to `Sum`/`Floor` only on demand), so
//! weights and printed forms track the way expressions were written.
//! Normalization flattens nested sums and fuses scale chains but never
//! rewrites across a floor boundary.

use num_bigint::BigInt;
use num_traits::{One, Signed};

use crate::number_field::{
    rat_i, NfResult, NumberFieldError, Rat, Session, SymReal, DEFAULT_REFINEMENT_BUDGET,
};

/// Arguments of floors this close to an integer (in float arithmetic) are
/// re-evaluated exactly; the float path is untrustworthy across the jump.
pub const FLOAT_BOUNDARY_EPS: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub enum GlfExpr {
    Linear { slope: SymReal, intercept: SymReal },
    Sum(Vec<GlfExpr>),
    Scale(SymReal, Box<GlfExpr>),
    Floor(Box<GlfExpr>),
    Frac(Box<GlfExpr>),
}

impl GlfExpr {
    pub fn linear(slope: SymReal, intercept: SymReal) -> GlfExpr {
        GlfExpr::Linear { slope, intercept }
    }

    pub fn constant(value: SymReal) -> GlfExpr {
        let zero = value.session().zero();
        GlfExpr::Linear {
            slope: zero,
            intercept: value,
        }
    }

    /// The identity function `x`.
    pub fn var(session: &Session) -> GlfExpr {
        GlfExpr::Linear {
            slope: session.one(),
            intercept: session.zero(),
        }
    }

    /// Flattens nested sums, merges linear atoms, and drops exact-zero
    /// constant terms (keeping one if everything vanishes).
    pub fn sum(terms: Vec<GlfExpr>) -> GlfExpr {
        assert!(!terms.is_empty(), "sum of no terms");
        let mut flat: Vec<GlfExpr> = Vec::new();
        let mut sess = None;
        for t in terms {
            if sess.is_none() {
                sess = Some(t.session());
            }
            match t {
                GlfExpr::Sum(inner) => flat.extend(inner),
                other => flat.push(other),
            }
        }
        // merge consecutive-by-collection linear atoms into one
        let mut merged: Vec<GlfExpr> = Vec::with_capacity(flat.len());
        let mut linear_slot: Option<usize> = None;
        for t in flat {
            if let GlfExpr::Linear { slope, intercept } = &t {
                if let Some(idx) = linear_slot {
                    if let GlfExpr::Linear {
                        slope: s0,
                        intercept: i0,
                    } = &merged[idx]
                    {
                        if let (Ok(ns), Ok(ni)) = (s0.add(slope), i0.add(intercept)) {
                            merged[idx] = GlfExpr::Linear {
                                slope: ns,
                                intercept: ni,
                            };
                            continue;
                        }
                    }
                } else {
                    linear_slot = Some(merged.len());
                }
            }
            merged.push(t);
        }
        merged.retain(|t| !t.is_zero_constant());
        match merged.len() {
            0 => GlfExpr::constant(sess.unwrap().zero()),
            1 => merged.pop().unwrap(),
            _ => GlfExpr::Sum(merged),
        }
    }

    /// Scales an expression, fusing `Scale(c, Scale(d, e))` into
    /// `Scale(c*d, e)` when the product is expressible in the session.
    pub fn scale(c: SymReal, e: GlfExpr) -> GlfExpr {
        if c.as_rational().map(|r| r.is_one()).unwrap_or(false) {
            return e;
        }
        if let GlfExpr::Scale(d, inner) = &e {
            if let Ok(cd) = c.mul(d) {
                return GlfExpr::Scale(cd, inner.clone());
            }
        }
        if let GlfExpr::Linear { slope, intercept } = &e {
            if let (Ok(ns), Ok(ni)) = (c.mul(slope), c.mul(intercept)) {
                return GlfExpr::Linear {
                    slope: ns,
                    intercept: ni,
                };
            }
        }
        GlfExpr::Scale(c, Box::new(e))
    }

    pub fn floor(e: GlfExpr) -> GlfExpr {
        GlfExpr::Floor(Box::new(e))
    }

    pub fn frac(e: GlfExpr) -> GlfExpr {
        GlfExpr::Frac(Box::new(e))
    }

    pub fn neg(self) -> GlfExpr {
        let minus_one = self.session().integer(-1);
        GlfExpr::scale(minus_one, self)
    }

    pub fn session(&self) -> Session {
        match self {
            GlfExpr::Linear { slope, .. } => slope.session(),
            GlfExpr::Sum(ts) => ts[0].session(),
            GlfExpr::Scale(c, _) => c.session(),
            GlfExpr::Floor(e) | GlfExpr::Frac(e) => e.session(),
        }
    }

    fn is_zero_constant(&self) -> bool {
        matches!(self, GlfExpr::Linear { slope, intercept } if slope.is_zero() && intercept.is_zero())
    }

    /// Constant value of the expression when it contains no `x` and no
    /// floor/frac nodes.
    pub fn as_constant(&self) -> Option<SymReal> {
        match self {
            GlfExpr::Linear { slope, intercept } if slope.is_zero() => Some(intercept.clone()),
            GlfExpr::Sum(ts) => {
                let mut acc = self.session().zero();
                for t in ts {
                    acc = acc.add(&t.as_constant()?).ok()?;
                }
                Some(acc)
            }
            GlfExpr::Scale(c, e) => c.mul(&e.as_constant()?).ok(),
            _ => None,
        }
    }

    /// Minimal `k` such that the expression lies in the `k`-th layer of the
    /// inductive hierarchy: linear atoms at 0, sums and scales at the maximum
    /// of their children, floor/frac one above their argument.
    pub fn weight(&self) -> u32 {
        match self {
            GlfExpr::Linear { .. } => 0,
            GlfExpr::Sum(ts) => ts.iter().map(GlfExpr::weight).max().unwrap_or(0),
            GlfExpr::Scale(_, e) => e.weight(),
            GlfExpr::Floor(e) | GlfExpr::Frac(e) => e.weight() + 1,
        }
    }

    /// The unique `a` with `self(x) - a*x` bounded.
    pub fn linear_part(&self) -> NfResult<SymReal> {
        match self {
            GlfExpr::Linear { slope, .. } => Ok(slope.clone()),
            GlfExpr::Sum(ts) => {
                let mut acc = self.session().zero();
                for t in ts {
                    acc = acc.add(&t.linear_part()?)?;
                }
                Ok(acc)
            }
            GlfExpr::Scale(c, e) => c.mul(&e.linear_part()?),
            GlfExpr::Floor(e) => e.linear_part(),
            GlfExpr::Frac(_) => Ok(self.session().zero()),
        }
    }

    /// The bounded remainder `psi = self - linear_part(self) * x`.
    pub fn bounded_part(&self) -> NfResult<GlfExpr> {
        Ok(match self {
            GlfExpr::Linear { slope, intercept } => GlfExpr::Linear {
                slope: slope.session().zero(),
                intercept: intercept.clone(),
            },
            GlfExpr::Sum(ts) => GlfExpr::sum(
                ts.iter()
                    .map(|t| t.bounded_part())
                    .collect::<NfResult<Vec<_>>>()?,
            ),
            GlfExpr::Scale(c, e) => GlfExpr::scale(c.clone(), e.bounded_part()?),
            GlfExpr::Floor(f) => {
                // [f] = f - {f}, so the bounded remainder is bp(f) - {f}
                let bp = f.bounded_part()?;
                GlfExpr::sum(vec![bp, GlfExpr::frac((**f).clone()).neg()])
            }
            GlfExpr::Frac(_) => self.clone(),
        })
    }

    pub fn is_bounded(&self) -> NfResult<bool> {
        Ok(self.linear_part()?.is_zero())
    }

    /// Sound (not tight) enclosure of the range over the reals.
    pub fn bound_interval(&self, budget: u32) -> NfResult<Interval> {
        match self {
            GlfExpr::Linear { slope, intercept } => Ok(if slope.is_zero() {
                Interval::point(intercept.clone())
            } else {
                Interval::unbounded()
            }),
            GlfExpr::Sum(ts) => {
                let mut acc = ts[0].bound_interval(budget)?;
                for t in &ts[1..] {
                    acc = acc.add(&t.bound_interval(budget)?)?;
                }
                Ok(acc)
            }
            GlfExpr::Scale(c, e) => e.bound_interval(budget)?.scale(c, budget),
            GlfExpr::Floor(f) => f.bound_interval(budget)?.floor_of(budget),
            GlfExpr::Frac(e) => Ok(Interval::frac_unit(&e.session())),
        }
    }

    /// Range enclosure computed through the canonical form: exact constant
    /// plus scaled copies of `[0, 1)`, one per fractional term. Sees
    /// cancellations that the structural `bound_interval` cannot.
    pub fn canonical_bound_interval(&self, budget: u32) -> NfResult<Interval> {
        let can = self.canonicalize()?;
        if !can.slope.is_zero() {
            return Ok(Interval::unbounded());
        }
        let s = self.session();
        let mut acc = Interval::point(can.constant.clone());
        for (c, _) in &can.terms {
            acc = acc.add(&Interval::frac_unit(&s).scale(c, budget)?)?;
        }
        Ok(acc)
    }

    /// Difference derivative `x -> self(x + h) - self(x)`; always bounded.
    pub fn diff_derivative(&self, h: &SymReal) -> NfResult<GlfExpr> {
        let shifted = self.shift(h)?;
        Ok(GlfExpr::sum(vec![shifted, self.clone().neg()]))
    }

    /// Substitution `x -> x + h`.
    pub fn shift(&self, h: &SymReal) -> NfResult<GlfExpr> {
        Ok(match self {
            GlfExpr::Linear { slope, intercept } => GlfExpr::Linear {
                slope: slope.clone(),
                intercept: intercept.add(&slope.mul(h)?)?,
            },
            GlfExpr::Sum(ts) => {
                GlfExpr::sum(ts.iter().map(|t| t.shift(h)).collect::<NfResult<Vec<_>>>()?)
            }
            GlfExpr::Scale(c, e) => GlfExpr::scale(c.clone(), e.shift(h)?),
            GlfExpr::Floor(e) => GlfExpr::floor(e.shift(h)?),
            GlfExpr::Frac(e) => GlfExpr::frac(e.shift(h)?),
        })
    }

    /// Substitution of `inner` for the argument of `outer`.
    pub fn compose(outer: &GlfExpr, inner: &GlfExpr) -> NfResult<GlfExpr> {
        Ok(match outer {
            GlfExpr::Linear { slope, intercept } => {
                if slope.is_zero() {
                    GlfExpr::constant(intercept.clone())
                } else {
                    GlfExpr::sum(vec![
                        GlfExpr::scale(slope.clone(), inner.clone()),
                        GlfExpr::constant(intercept.clone()),
                    ])
                }
            }
            GlfExpr::Sum(ts) => GlfExpr::sum(
                ts.iter()
                    .map(|t| GlfExpr::compose(t, inner))
                    .collect::<NfResult<Vec<_>>>()?,
            ),
            GlfExpr::Scale(c, e) => GlfExpr::scale(c.clone(), GlfExpr::compose(e, inner)?),
            GlfExpr::Floor(e) => GlfExpr::floor(GlfExpr::compose(e, inner)?),
            GlfExpr::Frac(e) => GlfExpr::frac(GlfExpr::compose(e, inner)?),
        })
    }

    /// Exact value at an integer argument.
    pub fn eval_exact(&self, n: i64) -> NfResult<SymReal> {
        self.eval_exact_with_budget(n, DEFAULT_REFINEMENT_BUDGET)
    }

    pub fn eval_exact_with_budget(&self, n: i64, budget: u32) -> NfResult<SymReal> {
        match self {
            GlfExpr::Linear { slope, intercept } => slope.scale(&rat_i(n)).add(intercept),
            GlfExpr::Sum(ts) => {
                let mut acc = self.session().zero();
                for t in ts {
                    acc = acc.add(&t.eval_exact_with_budget(n, budget)?)?;
                }
                Ok(acc)
            }
            GlfExpr::Scale(c, e) => c.mul(&e.eval_exact_with_budget(n, budget)?),
            GlfExpr::Floor(e) => {
                let v = e.eval_exact_with_budget(n, budget)?;
                let f = v.floor(budget)?;
                Ok(v.session().rational(Rat::from_integer(f)))
            }
            GlfExpr::Frac(e) => {
                let v = e.eval_exact_with_budget(n, budget)?;
                v.frac(budget)
            }
        }
    }

    /// Rigorous float bracket of the exact value at `n`: interval arithmetic
    /// over the tree with cached coefficient enclosures. Floors and
    /// fractional parts whose argument bracket straddles an integer fall
    /// back to exact evaluation, so the returned bracket always contains the
    /// exact value.
    pub fn eval_bracket(&self, n: i64) -> NfResult<(f64, f64)> {
        const LEVEL: u32 = 16;
        fn widen(lo: f64, hi: f64) -> (f64, f64) {
            let pad_l = 1e-14 * (1.0 + lo.abs());
            let pad_h = 1e-14 * (1.0 + hi.abs());
            (lo - pad_l, hi + pad_h)
        }
        match self {
            GlfExpr::Linear { slope, intercept } => {
                let (al, ah) = slope.f64_bounds(LEVEL)?;
                let (bl, bh) = intercept.f64_bounds(LEVEL)?;
                let nf = n as f64;
                let (sl, sh) = if n >= 0 { (al * nf, ah * nf) } else { (ah * nf, al * nf) };
                Ok(widen(sl + bl, sh + bh))
            }
            GlfExpr::Sum(ts) => {
                let mut lo = 0.0;
                let mut hi = 0.0;
                for t in ts {
                    let (l, h) = t.eval_bracket(n)?;
                    lo += l;
                    hi += h;
                }
                Ok(widen(lo, hi))
            }
            GlfExpr::Scale(c, e) => {
                let (cl, ch) = c.f64_bounds(LEVEL)?;
                let (l, h) = e.eval_bracket(n)?;
                let cands = [cl * l, cl * h, ch * l, ch * h];
                let lo = cands.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = cands.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                Ok(widen(lo, hi))
            }
            GlfExpr::Floor(e) => {
                let (l, h) = e.eval_bracket(n)?;
                let (fl, fh) = (l.floor(), h.floor());
                if fl == fh {
                    Ok((fl, fl))
                } else {
                    // bracket straddles an integer: resolve exactly
                    let v = e.eval_exact(n)?;
                    let f = v.floor(DEFAULT_REFINEMENT_BUDGET)?;
                    let f = big_to_f64(&f);
                    Ok((f, f))
                }
            }
            GlfExpr::Frac(e) => {
                let (l, h) = e.eval_bracket(n)?;
                let (fl, fh) = (l.floor(), h.floor());
                if fl == fh {
                    Ok(widen(l - fl, h - fl))
                } else {
                    let v = e.eval_exact(n)?;
                    let fr = v.frac(DEFAULT_REFINEMENT_BUDGET)?;
                    fr.f64_bounds(LEVEL)
                }
            }
        }
    }

    /// Floating evaluation. Near a floor/frac discontinuity (argument within
    /// [`FLOAT_BOUNDARY_EPS`] of an integer) the argument is recomputed
    /// exactly; any exact-path failure falls back to the float value.
    pub fn eval_f64(&self, n: i64) -> f64 {
        match self {
            GlfExpr::Linear { slope, intercept } => slope.to_f64() * n as f64 + intercept.to_f64(),
            GlfExpr::Sum(ts) => ts.iter().map(|t| t.eval_f64(n)).sum(),
            GlfExpr::Scale(c, e) => c.to_f64() * e.eval_f64(n),
            GlfExpr::Floor(e) => {
                let v = e.eval_f64(n);
                if (v - v.round()).abs() < FLOAT_BOUNDARY_EPS {
                    if let Ok(exact) = e.eval_exact(n) {
                        if let Ok(f) = exact.floor(DEFAULT_REFINEMENT_BUDGET) {
                            return big_to_f64(&f);
                        }
                    }
                }
                v.floor()
            }
            GlfExpr::Frac(e) => {
                let v = e.eval_f64(n);
                if (v - v.round()).abs() < FLOAT_BOUNDARY_EPS {
                    if let Ok(exact) = e.eval_exact(n) {
                        if let Ok(fr) = exact.frac(DEFAULT_REFINEMENT_BUDGET) {
                            return fr.to_f64();
                        }
                    }
                }
                v.rem_euclid(1.0)
            }
        }
    }

    /// Canonical decomposition `self = slope*x + constant + sum c_i {g_i}`
    /// with floors lowered through `[f] = f - {f}` and equal inner
    /// expressions merged.
    pub fn canonicalize(&self) -> NfResult<Canonical> {
        let mut can = Canonical {
            slope: self.session().zero(),
            constant: self.session().zero(),
            terms: Vec::new(),
        };
        self.accumulate(&self.session().one(), &mut can)?;
        can.terms.retain(|(c, _)| !c.is_zero());
        Ok(can)
    }

    fn accumulate(&self, scale: &SymReal, can: &mut Canonical) -> NfResult<()> {
        match self {
            GlfExpr::Linear { slope, intercept } => {
                can.slope = can.slope.add(&scale.mul(slope)?)?;
                can.constant = can.constant.add(&scale.mul(intercept)?)?;
            }
            GlfExpr::Sum(ts) => {
                for t in ts {
                    t.accumulate(scale, can)?;
                }
            }
            GlfExpr::Scale(c, e) => e.accumulate(&scale.mul(c)?, can)?,
            GlfExpr::Floor(f) => {
                // [f] = f - {f}
                f.accumulate(scale, can)?;
                can.push_term(scale.neg(), (**f).clone())?;
            }
            GlfExpr::Frac(f) => can.push_term(scale.clone(), (**f).clone())?,
        }
        Ok(())
    }
}

/// `slope*x + constant + sum of c_i * frac(g_i)`.
#[derive(Clone, Debug)]
pub struct Canonical {
    pub slope: SymReal,
    pub constant: SymReal,
    pub terms: Vec<(SymReal, GlfExpr)>,
}

impl Canonical {
    fn push_term(&mut self, coeff: SymReal, inner: GlfExpr) -> NfResult<()> {
        for (c, g) in self.terms.iter_mut() {
            if *g == inner {
                *c = c.add(&coeff)?;
                return Ok(());
            }
        }
        self.terms.push((coeff, inner));
        Ok(())
    }

    /// Reassembles a `GlfExpr` evaluating identically to the original.
    pub fn to_expr(&self, session: &Session) -> GlfExpr {
        let mut parts = vec![GlfExpr::linear(self.slope.clone(), self.constant.clone())];
        for (c, g) in &self.terms {
            parts.push(GlfExpr::scale(c.clone(), GlfExpr::frac(g.clone())));
        }
        let _ = session;
        GlfExpr::sum(parts)
    }
}

fn big_to_f64(b: &BigInt) -> f64 {
    num_traits::ToPrimitive::to_f64(b).unwrap_or(f64::NAN)
}

/// Interval with optional openness flags; `None` endpoints are infinite.
#[derive(Clone, Debug)]
pub struct Interval {
    pub lo: Option<SymReal>,
    pub lo_closed: bool,
    pub hi: Option<SymReal>,
    pub hi_closed: bool,
}

impl Interval {
    pub fn point(v: SymReal) -> Interval {
        Interval {
            lo: Some(v.clone()),
            lo_closed: true,
            hi: Some(v),
            hi_closed: true,
        }
    }

    pub fn unbounded() -> Interval {
        Interval {
            lo: None,
            lo_closed: false,
            hi: None,
            hi_closed: false,
        }
    }

    /// `[0, 1)`.
    pub fn frac_unit(session: &Session) -> Interval {
        Interval {
            lo: Some(session.zero()),
            lo_closed: true,
            hi: Some(session.one()),
            hi_closed: false,
        }
    }

    pub fn is_bounded(&self) -> bool {
        self.lo.is_some() && self.hi.is_some()
    }

    pub fn add(&self, other: &Interval) -> NfResult<Interval> {
        let join = |a: &Option<SymReal>, b: &Option<SymReal>| -> NfResult<Option<SymReal>> {
            match (a, b) {
                (Some(x), Some(y)) => Ok(Some(x.add(y)?)),
                _ => Ok(None),
            }
        };
        Ok(Interval {
            lo: join(&self.lo, &other.lo)?,
            lo_closed: self.lo_closed && other.lo_closed,
            hi: join(&self.hi, &other.hi)?,
            hi_closed: self.hi_closed && other.hi_closed,
        })
    }

    pub fn scale(&self, c: &SymReal, budget: u32) -> NfResult<Interval> {
        let sign = c.signum(budget)?;
        if sign == 0 {
            return Ok(Interval::point(c.session().zero()));
        }
        let mul = |e: &Option<SymReal>| -> NfResult<Option<SymReal>> {
            e.as_ref().map(|v| c.mul(v)).transpose()
        };
        if sign > 0 {
            Ok(Interval {
                lo: mul(&self.lo)?,
                lo_closed: self.lo_closed,
                hi: mul(&self.hi)?,
                hi_closed: self.hi_closed,
            })
        } else {
            Ok(Interval {
                lo: mul(&self.hi)?,
                lo_closed: self.hi_closed,
                hi: mul(&self.lo)?,
                hi_closed: self.lo_closed,
            })
        }
    }

    /// Enclosure of `floor(x)` for `x` in this interval.
    pub fn floor_of(&self, budget: u32) -> NfResult<Interval> {
        let lo = match &self.lo {
            None => None,
            Some(v) => Some(v.session().rational(Rat::from_integer(v.floor(budget)?))),
        };
        let hi = match &self.hi {
            None => None,
            Some(v) => {
                let f = v.floor(budget)?;
                let exact_int = v.is_rational() && v.rational_part().is_integer();
                let top = if exact_int && !self.hi_closed {
                    // x < integer hi, so floor(x) <= hi - 1
                    f - BigInt::one()
                } else {
                    f
                };
                Some(v.session().rational(Rat::from_integer(top)))
            }
        };
        Ok(Interval {
            lo,
            lo_closed: true,
            hi,
            hi_closed: true,
        })
    }

    /// Exact membership test. A rigorous float bracket screens points that
    /// are strictly inside (or outside); only boundary-ambiguous cases pay
    /// for symbolic comparisons.
    pub fn contains(&self, v: &SymReal, budget: u32) -> NfResult<bool> {
        if let Ok((vl, vh)) = v.f64_bounds(16) {
            let lo_b = match &self.lo {
                Some(lo) => lo.f64_bounds(16).ok(),
                None => Some((f64::NEG_INFINITY, f64::NEG_INFINITY)),
            };
            let hi_b = match &self.hi {
                Some(hi) => hi.f64_bounds(16).ok(),
                None => Some((f64::INFINITY, f64::INFINITY)),
            };
            if let (Some((ll, lh)), Some((hl, hh))) = (lo_b, hi_b) {
                if vl > lh && vh < hl {
                    return Ok(true); // strictly interior
                }
                if vh < ll || vl > hh {
                    return Ok(false); // strictly exterior
                }
            }
        }
        if let Some(lo) = &self.lo {
            match v.cmp_exact(lo, budget)? {
                std::cmp::Ordering::Less => return Ok(false),
                std::cmp::Ordering::Equal if !self.lo_closed => return Ok(false),
                _ => {}
            }
        }
        if let Some(hi) = &self.hi {
            match v.cmp_exact(hi, budget)? {
                std::cmp::Ordering::Greater => return Ok(false),
                std::cmp::Ordering::Equal if !self.hi_closed => return Ok(false),
                _ => {}
            }
        }
        Ok(true)
    }

    /// A rational upper bound for `sup |x|` over the interval, when bounded.
    pub fn sup_abs_rational(&self, budget: u32) -> NfResult<Option<Rat>> {
        let (Some(lo), Some(hi)) = (&self.lo, &self.hi) else {
            return Ok(None);
        };
        let level = budget.min(32);
        let (llo, _) = lo.enclosure(level).or_else(|_| {
            lo.as_rational()
                .map(|r| Ok((r.clone(), r.clone())))
                .unwrap_or(Err(NumberFieldError::RefinementBudgetExceeded { budget }))
        })?;
        let (_, hhi) = hi.enclosure(level).or_else(|_| {
            hi.as_rational()
                .map(|r| Ok((r.clone(), r.clone())))
                .unwrap_or(Err(NumberFieldError::RefinementBudgetExceeded { budget }))
        })?;
        let cand = llo.abs().max(hhi.abs());
        Ok(Some(cand))
    }

    pub fn to_f64(&self) -> (f64, f64) {
        (
            self.lo.as_ref().map(|v| v.to_f64()).unwrap_or(f64::NEG_INFINITY),
            self.hi.as_ref().map(|v| v.to_f64()).unwrap_or(f64::INFINITY),
        )
    }
}
