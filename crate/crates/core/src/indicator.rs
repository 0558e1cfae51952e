//! Constructions of {0,1}-valued GL functions.
//!
//! Threshold indicators of bounded GL functions are realized as a single
//! floor: with `c > sup|phi| + |a|`, the value `(phi - a)/c + 1` stays in
//! `(0, 2)` and its integer part is exactly the indicator of `phi >= a`.
//! Boolean combinations and box indicators reduce to that construction, and
//! the range indicator of an unbounded integer-valued GL function is a finite
//! disjunction of `delta = 0` tests obtained by composing with approximate
//! inverses `n -> [(n - j)/a] + i`.
//!
//! Range containment in {0,1} is structural for every constructor here. The
//! *semantic* identity with the intended set membership is certified over a
//! finite window by sampling (`certify_window`); integer-valuedness of inputs
//! to `range_indicator` is likewise a sampling certificate, not a proof.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Signed;

use crate::glf_ast::{GlfExpr, Interval};
use crate::number_field::{
    rat_i, NfResult, NumberFieldError, Rat, SymReal, DEFAULT_REFINEMENT_BUDGET,
};

/// Default certification window half-width.
pub const DEFAULT_WINDOW: i64 = 10_000;

#[derive(Debug)]
pub enum IndicatorError {
    NotBounded,
    UnboundedRequired,
    NotIntegerValued { at: i64 },
    RangeEstimateUnstable,
    SlopeNotInvertible,
    Nf(NumberFieldError),
}

impl fmt::Display for IndicatorError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IndicatorError::NotBounded => write!(f, "input must be a bounded GL function"),
            IndicatorError::UnboundedRequired => {
                write!(f, "range indicator requires an unbounded function")
            }
            IndicatorError::NotIntegerValued { at } => {
                write!(f, "function is not integer-valued (witness n = {at})")
            }
            IndicatorError::RangeEstimateUnstable => {
                write!(f, "finite range estimate changed between sampling horizons")
            }
            IndicatorError::SlopeNotInvertible => {
                write!(f, "linear part has no representable inverse in this session")
            }
            IndicatorError::Nf(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for IndicatorError {}

impl From<NumberFieldError> for IndicatorError {
    fn from(e: NumberFieldError) -> Self {
        IndicatorError::Nf(e)
    }
}

pub type IndResult<T> = Result<T, IndicatorError>;

/// A GL expression whose values are guaranteed to lie in {0,1}.
#[derive(Clone, Debug)]
pub struct UglExpr {
    expr: GlfExpr,
    window: i64,
}

impl UglExpr {
    pub fn expr(&self) -> &GlfExpr {
        &self.expr
    }

    pub fn window(&self) -> i64 {
        self.window
    }

    pub fn with_window(mut self, window: i64) -> Self {
        self.window = window;
        self
    }

    pub fn eval_bool(&self, n: i64) -> NfResult<bool> {
        let v = self.expr.eval_exact(n)?;
        Ok(v == v.session().one())
    }

    /// Exact comparison against a predicate over `[lo, hi]`; returns the
    /// first mismatching `n`, or `None` when the window certifies.
    pub fn certify_window(
        &self,
        lo: i64,
        hi: i64,
        pred: impl Fn(i64) -> bool,
    ) -> NfResult<Option<i64>> {
        for n in lo..=hi {
            let v = self.expr.eval_exact(n)?;
            let s = v.session();
            let ok = if v == s.one() {
                pred(n)
            } else if v.is_zero() {
                !pred(n)
            } else {
                false
            };
            if !ok {
                return Ok(Some(n));
            }
        }
        Ok(None)
    }
}

fn rational_abs_upper(v: &SymReal) -> NfResult<Rat> {
    if let Some(r) = v.as_rational() {
        return Ok(r.abs());
    }
    let (lo, hi) = v.enclosure(24)?;
    Ok(lo.abs().max(hi.abs()))
}

/// Indicator of `{n : phi(n) >= a}` for bounded `phi`.
pub fn indicator_ge(phi: &GlfExpr, a: &SymReal, window: i64) -> IndResult<UglExpr> {
    if !phi.is_bounded()? {
        return Err(IndicatorError::NotBounded);
    }
    let s = phi.session();
    let bound = phi.canonical_bound_interval(DEFAULT_REFINEMENT_BUDGET)?;
    let sup = bound
        .sup_abs_rational(DEFAULT_REFINEMENT_BUDGET)?
        .expect("bounded expression has finite interval");
    let c: Rat = sup.ceil() + rational_abs_upper(a)?.ceil() + rat_i(1);
    // xi = (phi - a)/c + 1 lies in (0,2); [xi] = [phi >= a]
    let shifted = GlfExpr::sum(vec![phi.clone(), GlfExpr::constant(a.neg())]);
    let xi = GlfExpr::sum(vec![
        GlfExpr::scale(s.rational(c.recip()), shifted),
        GlfExpr::constant(s.one()),
    ]);
    Ok(UglExpr {
        expr: GlfExpr::floor(xi),
        window,
    })
}

pub fn constant_indicator(s: &crate::number_field::Session, value: bool, window: i64) -> UglExpr {
    UglExpr {
        expr: GlfExpr::constant(if value { s.one() } else { s.zero() }),
        window,
    }
}

pub fn u_not(p: &UglExpr) -> UglExpr {
    let s = p.expr.session();
    UglExpr {
        expr: GlfExpr::sum(vec![GlfExpr::constant(s.one()), p.expr.clone().neg()]),
        window: p.window,
    }
}

/// `p or q`, realized as the indicator of `{p + q >= 1}`.
pub fn u_or(p: &UglExpr, q: &UglExpr) -> IndResult<UglExpr> {
    let s = p.expr.session();
    let sum = GlfExpr::sum(vec![p.expr.clone(), q.expr.clone()]);
    let mut out = indicator_ge(&sum, &s.one(), p.window.min(q.window))?;
    out.window = p.window.min(q.window);
    Ok(out)
}

pub fn u_and(p: &UglExpr, q: &UglExpr) -> IndResult<UglExpr> {
    Ok(u_not(&u_or(&u_not(p), &u_not(q))?))
}

/// Indicator of `{n : phi_i(n) in I_i for all i}` for bounded `phi_i`.
pub fn indicator_box(phis: &[GlfExpr], boxes: &[Interval], window: i64) -> IndResult<UglExpr> {
    assert_eq!(phis.len(), boxes.len());
    assert!(!phis.is_empty());
    let s = phis[0].session();
    let mut acc = constant_indicator(&s, true, window);
    for (phi, b) in phis.iter().zip(boxes) {
        if !phi.is_bounded()? {
            return Err(IndicatorError::NotBounded);
        }
        if let Some(lo) = &b.lo {
            let ge = indicator_ge(phi, lo, window)?;
            let cond = if b.lo_closed {
                ge
            } else {
                // phi > lo  <=>  not(-phi >= -lo)
                u_not(&indicator_ge(&phi.clone().neg(), &lo.neg(), window)?)
            };
            acc = u_and(&acc, &cond)?;
        }
        if let Some(hi) = &b.hi {
            let le = indicator_ge(&phi.clone().neg(), &hi.neg(), window)?; // phi <= hi
            let cond = if b.hi_closed {
                le
            } else {
                u_not(&indicator_ge(phi, hi, window)?) // phi < hi
            };
            acc = u_and(&acc, &cond)?;
        }
    }
    Ok(acc)
}

/// Indicator of `{delta = 0}` for bounded `delta`.
fn indicator_zero(delta: &GlfExpr, window: i64) -> IndResult<UglExpr> {
    let s = delta.session();
    let ge = indicator_ge(delta, &s.zero(), window)?;
    let le = indicator_ge(&delta.clone().neg(), &s.zero(), window)?;
    u_and(&ge, &le)
}

/// Indicator of the range `H = phi(Z)` of an unbounded integer-valued GL
/// function.
///
/// Integer-valuedness and the finite range `K` of the bounded remainder are
/// certified by sampling over `[-window, window]` (with `K` re-sampled at a
/// four-times-larger horizon and required to be stable). Negative slopes are
/// handled by the reflection `n -> -n`, which leaves the range unchanged.
pub fn range_indicator(phi: &GlfExpr, window: i64) -> IndResult<UglExpr> {
    let s = phi.session();
    let a = phi.linear_part()?;
    if a.is_zero() {
        return Err(IndicatorError::UnboundedRequired);
    }
    if a.signum(DEFAULT_REFINEMENT_BUDGET)? < 0 {
        let reflected = GlfExpr::compose(phi, &GlfExpr::linear(s.integer(-1), s.zero()))?;
        return range_indicator(&reflected, window);
    }

    // integer-valuedness certificate
    for n in -window..=window {
        let v = phi.eval_exact(n)?;
        match v.as_rational() {
            Some(r) if r.is_integer() => {}
            _ => return Err(IndicatorError::NotIntegerValued { at: n }),
        }
    }

    // phi(n) = [a n] + xi(n) with xi bounded and integer-valued
    let floor_an = GlfExpr::floor(GlfExpr::linear(a.clone(), s.zero()));
    let xi = GlfExpr::sum(vec![phi.clone(), floor_an.neg()]);
    debug_assert!(xi.is_bounded().unwrap_or(false));

    let sample_range = |h: i64| -> IndResult<Vec<BigRational>> {
        let mut vals: Vec<BigRational> = Vec::new();
        let mut n = -h;
        while n <= h {
            let v = xi.eval_exact(n)?;
            let r = v
                .as_rational()
                .cloned()
                .ok_or(IndicatorError::NotIntegerValued { at: n })?;
            if !vals.contains(&r) {
                vals.push(r);
            }
            n += 1;
        }
        vals.sort();
        Ok(vals)
    };
    let k_short = sample_range(window)?;
    let k_long = sample_range(4 * window)?;
    if k_short != k_long {
        return Err(IndicatorError::RangeEstimateUnstable);
    }

    let a_inv = a
        .try_inverse()
        .map_err(|_| IndicatorError::SlopeNotInvertible)?;
    let inv_floor = a_inv.floor(DEFAULT_REFINEMENT_BUDGET)?;
    let i_top: i64 = num_traits::ToPrimitive::to_i64(&(inv_floor + BigInt::from(1)))
        .expect("slope inverse floor fits in i64");

    let mut disjunction: Option<UglExpr> = None;
    for j in &k_long {
        for i in 0..=i_top {
            // k(n) = [(n - j)/a] + i
            let inner = GlfExpr::sum(vec![
                GlfExpr::floor(GlfExpr::linear(a_inv.clone(), a_inv.scale(&-j.clone()))),
                GlfExpr::constant(s.rational(BigRational::from_integer(BigInt::from(i)))),
            ]);
            let delta = GlfExpr::sum(vec![
                GlfExpr::var(&s),
                GlfExpr::compose(phi, &inner)?.neg(),
            ]);
            debug_assert!(delta.is_bounded().unwrap_or(false), "delta must be bounded");
            let term = indicator_zero(&delta, window)?;
            disjunction = Some(match disjunction {
                None => term,
                Some(acc) => u_or(&acc, &term)?,
            });
        }
    }
    Ok(disjunction.expect("at least one (i, j) pair"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::number_field::Session;

    fn s23() -> Session {
        Session::quadratic(&[2, 3])
    }

    fn frac_sqrt2(s: &Session) -> GlfExpr {
        GlfExpr::frac(GlfExpr::linear(s.sqrt(2).unwrap(), s.zero()))
    }

    #[test]
    fn threshold_matches_direct_comparison() {
        let s = s23();
        let phi = frac_sqrt2(&s);
        let ind = indicator_ge(&phi, &s.ratio(1, 2), 1000).unwrap();
        assert!(!ind.eval_bool(1).unwrap()); // {sqrt2} ~ 0.414
        for n in 0..1000i64 {
            let direct = phi
                .eval_exact(n)
                .unwrap()
                .cmp_exact(&s.ratio(1, 2), DEFAULT_REFINEMENT_BUDGET)
                .unwrap()
                != std::cmp::Ordering::Less;
            assert_eq!(ind.eval_bool(n).unwrap(), direct, "mismatch at n = {n}");
        }
    }

    #[test]
    fn threshold_saturates_outside_range() {
        let s = s23();
        let phi = frac_sqrt2(&s);
        let below = indicator_ge(&phi, &s.integer(-3), 100).unwrap();
        let above = indicator_ge(&phi, &s.integer(7), 100).unwrap();
        for n in -100..100i64 {
            assert!(below.eval_bool(n).unwrap());
            assert!(!above.eval_bool(n).unwrap());
        }
    }

    #[test]
    fn boolean_laws_pointwise() {
        let s = s23();
        let p = indicator_ge(&frac_sqrt2(&s), &s.ratio(1, 2), 200).unwrap();
        let q = indicator_ge(
            &GlfExpr::frac(GlfExpr::linear(s.sqrt(3).unwrap(), s.zero())),
            &s.ratio(1, 3),
            200,
        )
        .unwrap();
        let not_p = u_not(&p);
        let taut = u_or(&p, &not_p).unwrap();
        let de_morgan_l = u_not(&u_and(&p, &q).unwrap());
        let de_morgan_r = u_or(&u_not(&p), &u_not(&q)).unwrap();
        for n in -200..200i64 {
            assert!(taut.eval_bool(n).unwrap());
            assert_eq!(
                de_morgan_l.eval_bool(n).unwrap(),
                de_morgan_r.eval_bool(n).unwrap()
            );
            assert_eq!(
                u_not(&u_not(&p)).eval_bool(n).unwrap(),
                p.eval_bool(n).unwrap()
            );
        }
        let one = constant_indicator(&s, true, 10);
        assert!(!u_not(&one).eval_bool(3).unwrap());
    }

    #[test]
    fn box_indicator_matches() {
        let s = s23();
        let phi = frac_sqrt2(&s);
        let mut half = Interval::frac_unit(&s);
        half.hi = Some(s.ratio(1, 2));
        let ind = indicator_box(std::slice::from_ref(&phi), &[half], 2000).unwrap();
        for n in 0..2000i64 {
            let v = phi.eval_exact(n).unwrap();
            let direct = v.cmp_exact(&s.ratio(1, 2), 128).unwrap() == std::cmp::Ordering::Less;
            assert_eq!(ind.eval_bool(n).unwrap(), direct, "n = {n}");
        }
        // full-range box is constantly 1; empty box is constantly 0
        let full = indicator_box(std::slice::from_ref(&phi), &[Interval::unbounded()], 50).unwrap();
        let empty = indicator_box(
            std::slice::from_ref(&phi),
            &[Interval {
                lo: Some(s.one()),
                lo_closed: true,
                hi: Some(s.zero()),
                hi_closed: true,
            }],
            50,
        )
        .unwrap();
        for n in -50..50i64 {
            assert!(full.eval_bool(n).unwrap());
            assert!(!empty.eval_bool(n).unwrap());
        }
    }

    #[test]
    fn range_indicator_even_numbers() {
        let s = s23();
        let phi = GlfExpr::linear(s.integer(2), s.zero());
        let ind = range_indicator(&phi, 64).unwrap();
        assert!(ind.eval_bool(4).unwrap());
        assert!(!ind.eval_bool(5).unwrap());
        for n in -30..30i64 {
            assert_eq!(ind.eval_bool(n).unwrap(), n.rem_euclid(2) == 0);
        }
    }

    #[test]
    fn range_indicator_beatty() {
        let s = s23();
        let phi = GlfExpr::floor(GlfExpr::linear(s.sqrt(2).unwrap(), s.zero()));
        let ind = range_indicator(&phi, 200).unwrap();
        // oracle: enumerate floor(sqrt2 k) over a window wide enough to cover
        let mut members = std::collections::BTreeSet::new();
        for k in -400i64..400 {
            let v = phi.eval_exact(k).unwrap();
            members.insert(v.as_rational().unwrap().to_integer());
        }
        assert!(ind.eval_bool(1).unwrap()); // 1 = [sqrt2 * 1]
        for n in -200..200i64 {
            let expect = members.contains(&BigInt::from(n));
            assert_eq!(ind.eval_bool(n).unwrap(), expect, "Beatty membership at {n}");
        }
    }

    #[test]
    fn range_indicator_rejects_bounded() {
        let s = s23();
        let phi = frac_sqrt2(&s);
        assert!(matches!(
            range_indicator(&phi, 16),
            Err(IndicatorError::UnboundedRequired)
        ));
    }

    #[test]
    fn range_indicator_rejects_non_integer() {
        let s = s23();
        let phi = GlfExpr::linear(s.sqrt(2).unwrap(), s.zero());
        assert!(matches!(
            range_indicator(&phi, 16),
            Err(IndicatorError::NotIntegerValued { .. })
        ));
    }

    #[test]
    fn range_indicator_negative_slope() {
        let s = s23();
        // phi(n) = -2n has range = even integers
        let phi = GlfExpr::linear(s.integer(-2), s.zero());
        let ind = range_indicator(&phi, 64).unwrap();
        for n in -30..30i64 {
            assert_eq!(ind.eval_bool(n).unwrap(), n.rem_euclid(2) == 0);
        }
    }
}
