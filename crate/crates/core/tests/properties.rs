//! Property tests for the structural invariants: exact arithmetic laws, the
//! unique linear/bounded decomposition, interval soundness, the van der
//! Corput inequality, and Gowers-norm homogeneity.

mod common;

use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::SeedableRng;

use glf_calculus::averaging::{gowers_norm, vdc_finitary, vdc_shift_average_bound};
use glf_calculus::number_field::{rat, Session};

use common::{random_bounded_glf, random_glf, session23};

fn sym_strategy() -> impl Strategy<Value = (i64, i64, i64, i64)> {
    (-20i64..20, 1i64..12, -20i64..20, 1i64..12)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// add/mul are consistent with the enclosure oracles: the enclosure of a
    /// sum/product contains the interval arithmetic of the factors.
    #[test]
    fn symreal_ops_respect_enclosures((p1, q1, p2, q2) in sym_strategy()) {
        let s = Session::quadratic(&[2, 3]);
        let x = s.sqrt(2).unwrap().scale(&rat(p1, q1)).add(&s.ratio(p2, q2)).unwrap();
        let y = s.sqrt(3).unwrap().scale(&rat(p2, q2)).add(&s.ratio(p1, q1)).unwrap();
        let sum = x.add(&y).unwrap();
        let prod = x.mul(&y).unwrap();
        let (xl, xh) = x.enclosure(24).unwrap();
        let (yl, yh) = y.enclosure(24).unwrap();
        let (sl, sh) = sum.enclosure(24).unwrap();
        prop_assert!(sl <= &xh + &yh && &xl + &yl <= sh);
        let (pl, ph) = prod.enclosure(24).unwrap();
        let corners = [&xl * &yl, &xl * &yh, &xh * &yl, &xh * &yh];
        let cmin = corners.iter().min().unwrap();
        let cmax = corners.iter().max().unwrap();
        prop_assert!(pl <= *cmax && *cmin <= ph);
    }

    /// floor brackets its argument: floor(x) <= x < floor(x) + 1.
    #[test]
    fn floor_brackets((p1, q1, p2, q2) in sym_strategy()) {
        let s = Session::quadratic(&[2, 3]);
        let x = s.sqrt(2).unwrap().scale(&rat(p1, q1)).add(&s.ratio(p2, q2)).unwrap();
        let f = x.floor(256).unwrap();
        let fr = s.rational(num_rational::BigRational::from_integer(f));
        prop_assert!(x.sub(&fr).unwrap().signum(256).unwrap() >= 0);
        let fr1 = fr.add(&s.one()).unwrap();
        prop_assert!(x.sub(&fr1).unwrap().signum(256).unwrap() < 0);
    }

    /// van der Corput inequality on random vector families: exact rational
    /// arithmetic (float evaluation can flip the equality cases by an ulp,
    /// so the float route gets a rounding allowance).
    #[test]
    fn vdc_inequality(seed in 0u64..10_000) {
        let mut rng = StdRng::seed_from_u64(seed);
        let dim = rand::Rng::random_range(&mut rng, 1..=6usize);
        let len = rand::Rng::random_range(&mut rng, 2..=40usize);
        let u: Vec<Vec<glf_calculus::Rat>> = (0..len)
            .map(|_| {
                (0..dim)
                    .map(|_| rat(rand::Rng::random_range(&mut rng, -48..=48i64), 16))
                    .collect()
            })
            .collect();
        let (lhs, rhs) = glf_calculus::averaging::vdc_finitary_exact(&u);
        prop_assert!(lhs <= rhs);
        let uf: Vec<Vec<f64>> = u
            .iter()
            .map(|v| v.iter().map(glf_calculus::number_field::rat_to_f64).collect())
            .collect();
        let (lf, rf) = vdc_finitary(&uf);
        prop_assert!(lf <= rf + 1e-9 * (1.0 + rf.abs()));
    }

    /// fixed-difference-set shift-averaging bound with its finite-size slack.
    #[test]
    fn vdc_shift_window(seed in 0u64..2_000) {
        let mut rng = StdRng::seed_from_u64(seed);
        let len = rand::Rng::random_range(&mut rng, 60..=200usize);
        let u: Vec<Vec<f64>> = (0..len)
            .map(|_| vec![rand::Rng::random_range(&mut rng, -1.0..1.0)])
            .collect();
        let (lhs, rhs, slack) = vdc_shift_average_bound(&u, &[0, 3, 11]);
        prop_assert!(lhs <= rhs + slack + 1e-12);
    }

    /// the normalized Gowers norm is absolutely homogeneous.
    #[test]
    fn gowers_homogeneity(seed in 0u64..500, c in -3.0f64..3.0) {
        let mut rng = StdRng::seed_from_u64(seed);
        let n = rand::Rng::random_range(&mut rng, 2..=24usize);
        let b: Vec<f64> = (0..n).map(|_| rand::Rng::random_range(&mut rng, -1.0..1.0)).collect();
        let k = rand::Rng::random_range(&mut rng, 1..=2u32);
        let g = gowers_norm(&b, k).unwrap();
        let scaled: Vec<f64> = b.iter().map(|x| c * x).collect();
        let gs = gowers_norm(&scaled, k).unwrap();
        prop_assert!((gs - c.abs() * g).abs() < 1e-9 * (1.0 + g));
    }
}

/// The unique decomposition: the float evaluation drifts from the linear
/// trend only by the bounded remainder.
#[test]
fn lbp_uniqueness_sampled() {
    let s = session23();
    let mut rng = StdRng::seed_from_u64(777);
    for _ in 0..20 {
        let mut size = 10u32;
        let e = random_glf(&s, &mut rng, 2, &mut size);
        let a = e.linear_part().unwrap().to_f64();
        let psi = e.bounded_part().unwrap();
        let iv = psi.bound_interval(256).unwrap();
        let (lo, hi) = iv.to_f64();
        for n in (-10_000..=10_000i64).step_by(97) {
            let drift = e.eval_f64(n) - a * n as f64;
            assert!(
                drift >= lo - 1e-6 && drift <= hi + 1e-6,
                "drift {drift} outside [{lo}, {hi}] at n = {n}"
            );
        }
    }
}

/// Difference derivatives agree with the shifted difference and are bounded.
#[test]
fn diff_derivative_consistency_sampled() {
    let s = session23();
    let mut rng = StdRng::seed_from_u64(778);
    for _ in 0..12 {
        let mut size = 8u32;
        let e = random_glf(&s, &mut rng, 2, &mut size);
        let h = s.integer(rand::Rng::random_range(&mut rng, 1..=5i64));
        let d = e.diff_derivative(&h).unwrap();
        assert!(d.is_bounded().unwrap());
        let hh = num_traits::ToPrimitive::to_i64(
            &h.as_rational().unwrap().to_integer(),
        )
        .unwrap();
        for n in (-500..=500i64).step_by(13) {
            let lhs = d.eval_exact(n).unwrap();
            let rhs = e
                .eval_exact(n + hh)
                .unwrap()
                .sub(&e.eval_exact(n).unwrap())
                .unwrap();
            assert_eq!(lhs, rhs);
        }
    }
}

/// Fractional/floor coherence on random bounded expressions.
#[test]
fn frac_floor_coherence_sampled() {
    let s = session23();
    let mut rng = StdRng::seed_from_u64(779);
    for _ in 0..12 {
        let mut size = 8u32;
        let inner = random_bounded_glf(&s, &mut rng, 2, &mut size);
        let fr = glf_calculus::GlfExpr::frac(inner.clone());
        let fl = glf_calculus::GlfExpr::floor(inner.clone());
        for n in (-300..=300i64).step_by(7) {
            let lhs = fr.eval_exact(n).unwrap();
            let rhs = inner
                .eval_exact(n)
                .unwrap()
                .sub(&fl.eval_exact(n).unwrap())
                .unwrap();
            assert_eq!(lhs, rhs);
        }
    }
}
