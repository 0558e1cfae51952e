//! Shared helpers for the integration suites: seeded random GL expressions
//! over the quadratic field generated by sqrt2 and sqrt3.

use glf_calculus::glf_ast::GlfExpr;
use glf_calculus::number_field::{rat, Session, SymReal};
use rand::rngs::StdRng;
use rand::Rng;

pub fn session23() -> Session {
    Session::quadratic(&[2, 3])
}

/// A coefficient from {rationals, q*sqrt2, q*sqrt3} with small numerators.
pub fn random_coeff(s: &Session, rng: &mut StdRng) -> SymReal {
    let p = rng.random_range(-4..=4i64);
    let q = rng.random_range(1..=4i64);
    let r = rat(p, q);
    match rng.random_range(0..3u8) {
        0 => s.rational(r),
        1 => s.sqrt(2).unwrap().scale(&r),
        _ => s.sqrt(3).unwrap().scale(&r),
    }
}

pub fn random_nonzero_coeff(s: &Session, rng: &mut StdRng) -> SymReal {
    loop {
        let c = random_coeff(s, rng);
        if !c.is_zero() {
            return c;
        }
    }
}

/// Random GL expression of weight at most `weight`; `size` bounds the node
/// count so sums and scales cannot recurse forever.
pub fn random_glf(s: &Session, rng: &mut StdRng, weight: u32, size: &mut u32) -> GlfExpr {
    if *size > 0 {
        *size -= 1;
    }
    if weight == 0 || *size == 0 {
        return GlfExpr::linear(random_coeff(s, rng), random_coeff(s, rng));
    }
    match rng.random_range(0..5u8) {
        0 => GlfExpr::floor(random_glf(s, rng, weight - 1, size)),
        1 | 2 => GlfExpr::frac(random_glf(s, rng, weight - 1, size)),
        3 => {
            let second_weight = rng.random_range(0..=weight);
            GlfExpr::sum(vec![
                random_glf(s, rng, weight, size),
                random_glf(s, rng, second_weight, size),
            ])
        }
        _ => GlfExpr::scale(
            random_nonzero_coeff(s, rng),
            random_glf(s, rng, weight, size),
        ),
    }
}

/// Random *bounded* GL expression of weight at most `weight`.
pub fn random_bounded_glf(s: &Session, rng: &mut StdRng, weight: u32, size: &mut u32) -> GlfExpr {
    let base = match rng.random_range(0..3u8) {
        // fractional part of anything is bounded
        0 | 1 => GlfExpr::frac(random_glf(s, rng, weight.saturating_sub(1), size)),
        // or take the bounded remainder of a random expression
        _ => random_glf(s, rng, weight, size)
            .bounded_part()
            .expect("bounded part exists in the closed field"),
    };
    if rng.random_range(0..3u8) == 0 && *size > 0 {
        *size -= 1;
        GlfExpr::sum(vec![
            GlfExpr::scale(random_nonzero_coeff(s, rng), base),
            random_bounded_glf(s, rng, weight, size),
        ])
    } else {
        base
    }
}
