//! Cesàro limits of exponentials of GL functions, trigonometric
//! approximation, and almost-linearity along Bohr sets.
//!
//! The central quantity is `C-lim exp(2 pi i g(n))` for a GL function `g`.
//! Writing `g` canonically and reducing mod 1, the limit is the Haar integral
//! of `exp(2 pi i F)` over the orbit closure of the associated torus
//! representation; the numeric path computes exactly that with the
//! quasi-Monte Carlo sampler.
//!
//! Two families are decided exactly:
//!
//! * pure linear phases `a n + b`: the limit is `exp(2 pi i b)` for integer
//!   `a` and `0` otherwise;
//! * bracket-linear phases `beta [alpha n] + b` with `alpha` irrational: the
//!   limit is nonzero iff `alpha beta = m alpha + l` for *integers* `m, l`,
//!   in which case the phases distribute like `(m - beta) {alpha n}` and the
//!   limit is `exp(2 pi i b) * (exp(2 pi i w) - 1)/(2 pi i w)`, `w = m - beta`.
//!   When `alpha beta` is in `Z alpha + Q` with a non-integer rational part,
//!   the phase arcs split into cyclically translated copies whose character
//!   sums cancel, so the limit is 0; membership in `Z alpha + Q` alone is
//!   therefore not sufficient for nonvanishing, and only the `Z alpha + Z`
//!   witness certifies a nonzero limit.

use num_complex::Complex64;
use num_traits::{ToPrimitive, Zero};

use crate::glf_ast::GlfExpr;
use crate::number_field::{
    in_z_alpha_plus_q, rat_to_f64, z_alpha_plus_z_witness, NfResult, Rat, SymReal,
};
use crate::torus::{
    build_rep, closure_group, Halton, TorusError, TorusRep, TorusResult, DEFAULT_SAMPLES,
};

const TAU: f64 = std::f64::consts::TAU;

/// Result of a limit computation, possibly exact.
#[derive(Clone, Debug)]
pub struct LimitValue {
    pub value: Complex64,
    pub exact: bool,
    pub certificate: Option<String>,
    pub error_proxy: f64,
}

impl LimitValue {
    fn exact(value: Complex64, certificate: &str) -> LimitValue {
        LimitValue {
            value,
            exact: true,
            certificate: Some(certificate.to_string()),
            error_proxy: 0.0,
        }
    }
}

fn unit_phase(theta_mod1: f64) -> Complex64 {
    Complex64::from_polar(1.0, TAU * theta_mod1)
}

/// `int_0^1 exp(2 pi i w y) dy` for real `w`.
fn sawtooth_integral(w: f64) -> Complex64 {
    if w == 0.0 {
        return Complex64::new(1.0, 0.0);
    }
    let two_pi_w = TAU * w;
    (Complex64::from_polar(1.0, two_pi_w) - 1.0) / Complex64::new(0.0, two_pi_w)
}

/// `C-lim_n exp(2 pi i g(n))`.
pub fn exp_limit(g: &GlfExpr) -> TorusResult<LimitValue> {
    exp_limit_with_samples(g, DEFAULT_SAMPLES)
}

pub fn exp_limit_with_samples(g: &GlfExpr, samples: usize) -> TorusResult<LimitValue> {
    let can = g.canonicalize()?;

    // pure linear phase a n + b
    if can.terms.is_empty() {
        let b_phase = can.constant.mod1_f64()?;
        return Ok(match can.slope.as_rational() {
            Some(r) if r.is_integer() => {
                LimitValue::exact(unit_phase(b_phase), "linear:integer-slope")
            }
            Some(_) => LimitValue::exact(Complex64::zero(), "linear:rational-slope"),
            None => LimitValue::exact(Complex64::zero(), "linear:irrational-slope"),
        });
    }

    // bracket-linear phase beta [alpha n] + b
    if can.terms.len() == 1 {
        if let GlfExpr::Linear { slope, intercept } = &can.terms[0].1 {
            if intercept.is_zero() && !slope.is_rational() {
                let alpha = slope;
                let beta = can.terms[0].0.neg();
                if let Ok(prod) = beta.mul(alpha) {
                    if can.slope == prod {
                        if let Some(v) = bracket_linear_limit(alpha, &beta, &can.constant)? {
                            return Ok(v);
                        }
                    }
                }
            }
        }
    }

    // general path: integrate exp(2 pi i {g}) over the orbit closure
    let rep = build_rep(&GlfExpr::frac(g.clone()))?;
    let (value, err) = integrate_unit_exp(&rep, samples)?;
    Ok(LimitValue {
        value,
        exact: false,
        certificate: None,
        error_proxy: err,
    })
}

fn bracket_linear_limit(
    alpha: &SymReal,
    beta: &SymReal,
    constant: &SymReal,
) -> NfResult<Option<LimitValue>> {
    let b_phase = constant.mod1_f64()?;
    match z_alpha_plus_z_witness(alpha, beta)? {
        Some((m, l)) => {
            let w = rat_to_f64(&Rat::from_integer(m.clone())) - beta.to_f64();
            let value = unit_phase(b_phase) * sawtooth_integral(w);
            Ok(Some(LimitValue::exact(
                value,
                &format!("bracket-linear:nonzero(m={m},l={l})"),
            )))
        }
        None => {
            let cert = if in_z_alpha_plus_q(alpha, beta)? {
                // alpha beta = m alpha + p/q with q >= 2: the phase arcs come
                // in q translated copies and their contributions cancel
                "bracket-linear:zero(rational-offset)"
            } else {
                "bracket-linear:zero(independent)"
            };
            Ok(Some(LimitValue::exact(Complex64::zero(), cert)))
        }
    }
}

/// QMC (or exact finite) integral of `exp(2 pi i F)` over the closure.
fn integrate_unit_exp(rep: &TorusRep, samples: usize) -> TorusResult<(Complex64, f64)> {
    let z = closure_group(rep)?;
    if z.free_dims == 0 && z.order <= samples as u64 {
        let pts = z.enumerate_exact(rep.session()).unwrap();
        let mut acc = Complex64::zero();
        for x in &pts {
            let xf: Vec<f64> = x.iter().map(|v| v.to_f64()).collect();
            acc += unit_phase(rep.value_at_f64(&xf));
        }
        return Ok((acc / pts.len() as f64, 1e-12));
    }
    let halton = Halton::new(z.free_dims);
    let mut acc = Complex64::zero();
    for idx in 0..samples {
        let x = z.sample_f64(idx, &halton);
        acc += unit_phase(rep.value_at_f64(&x));
    }
    let mean = acc / samples as f64;
    Ok((mean, 2.0 / (samples as f64).sqrt()))
}

/// `C-lim_n exp(2 pi i beta phi(n))`, consulting the exact bracket-linear
/// certificate when `phi` has that shape.
pub fn char_limit(phi: &GlfExpr, beta: &SymReal) -> TorusResult<LimitValue> {
    char_limit_with_samples(phi, beta, DEFAULT_SAMPLES)
}

pub fn char_limit_with_samples(
    phi: &GlfExpr,
    beta: &SymReal,
    samples: usize,
) -> TorusResult<LimitValue> {
    exp_limit_with_samples(&GlfExpr::scale(beta.clone(), phi.clone()), samples)
}

/// Finite character sum approximating a bounded GL function in mean density.
#[derive(Clone, Debug)]
pub struct TrigPolynomial {
    rotation_f64: Vec<f64>,
    free_rows: Vec<Vec<f64>>,
    order: u64,
    /// (finite-character index, free frequency vector, coefficient)
    pub terms: Vec<(u64, Vec<i64>, Complex64)>,
    /// empirical mean absolute error at the accepted cutoff
    pub mean_error: f64,
    pub cutoff: i64,
}

impl TrigPolynomial {
    pub fn eval(&self, n: i64) -> f64 {
        let x: Vec<f64> = self
            .rotation_f64
            .iter()
            .map(|u| (u * n as f64).rem_euclid(1.0))
            .collect();
        let y_free: Vec<f64> = self
            .free_rows
            .iter()
            .map(|row| {
                row.iter()
                    .zip(&x)
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
                    .rem_euclid(1.0)
            })
            .collect();
        let j = if self.order > 1 {
            n.rem_euclid(self.order as i64) as f64
        } else {
            0.0
        };
        let mut acc = Complex64::zero();
        for (l, m, c) in &self.terms {
            let mut theta = *l as f64 * j / self.order as f64;
            for (mi, yi) in m.iter().zip(&y_free) {
                theta += *mi as f64 * yi;
            }
            acc += c * unit_phase(theta.rem_euclid(1.0));
        }
        acc.re
    }
}

/// Builds a trigonometric polynomial `q(n) = Theta(n u)` with empirical
/// D-limsup proxy `(1/N) sum |phi(n) - q(n)| < eps`, raising the frequency
/// cutoff until the target is met.
pub fn besicovitch_approx(phi: &GlfExpr, eps: f64) -> TorusResult<TrigPolynomial> {
    besicovitch_approx_with(phi, eps, 1 << 14, 100_000)
}

pub fn besicovitch_approx_with(
    phi: &GlfExpr,
    eps: f64,
    samples: usize,
    err_horizon: i64,
) -> TorusResult<TrigPolynomial> {
    let rep = build_rep(phi)?;
    let z = closure_group(&rep)?;
    let halton = Halton::new(z.free_dims);

    // sample the closure once; reuse for every cutoff
    let finite = z.free_dims == 0 && z.order <= samples as u64;
    let mut xs: Vec<Vec<f64>> = Vec::new();
    let mut fin_idx: Vec<u64> = Vec::new();
    let mut ys: Vec<Vec<f64>> = Vec::new();
    if finite {
        for (j, x) in z
            .enumerate_exact(rep.session())
            .unwrap()
            .into_iter()
            .enumerate()
        {
            let xf: Vec<f64> = x.iter().map(|v| v.to_f64()).collect();
            fin_idx.push(j as u64);
            ys.push(z.free_coords_f64(&xf));
            xs.push(xf);
        }
    } else {
        for idx in 0..samples {
            let x = z.sample_f64(idx, &halton);
            fin_idx.push(idx as u64 % z.order);
            ys.push(z.free_coords_f64(&x));
            xs.push(x);
        }
    }
    let values: Vec<f64> = xs.iter().map(|x| rep.value_at_f64(x)).collect();

    let free_rows: Vec<Vec<f64>> = (z.moduli.len()..z.dim)
        .map(|t| {
            z.q_inv[t]
                .iter()
                .map(|c| c.to_f64().unwrap())
                .collect::<Vec<f64>>()
        })
        .collect();
    let rotation_f64: Vec<f64> = rep.rotation.iter().map(|v| v.to_f64()).collect();

    let mut cutoff: i64 = 0;
    loop {
        let mut terms = Vec::new();
        let freqs = free_freqs(z.free_dims, cutoff);
        for l in 0..z.order {
            for m in &freqs {
                let mut acc = Complex64::zero();
                for ((j, y), v) in fin_idx.iter().zip(&ys).zip(&values) {
                    let mut theta = l as f64 * *j as f64 / z.order as f64;
                    for (mi, yi) in m.iter().zip(y) {
                        theta += *mi as f64 * yi;
                    }
                    acc += v * unit_phase(-theta.rem_euclid(1.0));
                }
                let c = acc / xs.len() as f64;
                if c.norm() > 1e-9 {
                    terms.push((l, m.clone(), c));
                }
            }
        }
        let q = TrigPolynomial {
            rotation_f64: rotation_f64.clone(),
            free_rows: free_rows.clone(),
            order: z.order,
            terms,
            mean_error: 0.0,
            cutoff,
        };
        let mut err_sum = 0.0;
        for n in 1..=err_horizon {
            err_sum += (rep.eval_f64(n) - q.eval(n)).abs();
        }
        let err = err_sum / err_horizon as f64;
        if err < eps {
            return Ok(TrigPolynomial { mean_error: err, ..q });
        }
        cutoff = if cutoff == 0 { 1 } else { cutoff * 2 };
        if cutoff > 64 {
            return Err(TorusError::CutoffExceeded { eps });
        }
    }
}

fn free_freqs(dims: usize, cutoff: i64) -> Vec<Vec<i64>> {
    let mut out = vec![Vec::new()];
    for _ in 0..dims {
        let mut next = Vec::new();
        for partial in &out {
            for k in -cutoff..=cutoff {
                let mut p = partial.clone();
                p.push(k);
                next.push(p);
            }
        }
        out = next;
    }
    out
}

/// Witness data for almost-linearity along a Bohr set.
#[derive(Debug)]
pub struct AlmostLinearity {
    /// per-function constants `C_i`
    pub constants: Vec<SymReal>,
    /// window radius around 0 on the joint torus
    pub delta: f64,
    /// sampled Bohr-set elements with the empirical density of
    /// `{n : phi_i(n+h) = phi_i(n) + phi_i(h) + C_i for all i}`
    pub sampled: Vec<(i64, f64)>,
    /// whether every sampled density cleared `1 - eps`
    pub all_pass: bool,
}

/// Finds a Bohr window `W` near 0 on the joint torus of the bounded parts and
/// constants `C_i` such that, for `h` with `h u in W`, the shift identity
/// `phi_i(n+h) = phi_i(n) + phi_i(h) + C_i` holds off a set of density < eps.
///
/// The joint partition is refined by quarter cuts in every coordinate so that
/// each cell has diameter at most 1/4, which rules out lattice translates
/// between difference vectors of a cell.
pub fn almost_linearity_witness(
    phis: &[GlfExpr],
    eps: f64,
) -> TorusResult<AlmostLinearity> {
    almost_linearity_with(phis, eps, 200_000, 100_000, 6)
}

pub fn almost_linearity_with(
    phis: &[GlfExpr],
    eps: f64,
    scan_cap: i64,
    density_horizon: i64,
    h_count: usize,
) -> TorusResult<AlmostLinearity> {
    assert!(!phis.is_empty());
    let reps: Vec<TorusRep> = phis
        .iter()
        .map(|p| build_rep(&p.bounded_part()?))
        .collect::<TorusResult<Vec<_>>>()?;

    // joint rotation vector (floats are enough to locate cells; offsets C_i
    // are read off exactly from the per-function pieces)
    let u_f64: Vec<f64> = reps
        .iter()
        .flat_map(|r| r.rotation.iter().map(|v| v.to_f64()))
        .collect();
    let dims: Vec<usize> = reps.iter().map(|r| r.dim).collect();

    let cell_of = |x: &[f64]| -> (Vec<usize>, Vec<usize>) {
        let mut pieces = Vec::with_capacity(reps.len());
        let mut offset = 0;
        for (r, d) in reps.iter().zip(&dims) {
            pieces.push(r.piece_index_f64(&x[offset..offset + d]));
            offset += d;
        }
        let quarters = x.iter().map(|v| ((v * 4.0) as usize).min(3)).collect();
        (pieces, quarters)
    };

    // home cell: the one seen arbitrarily close to 0 along the diagonal
    let epsilon = 1.0 / 4096.0;
    let x0: Vec<f64> = vec![epsilon; u_f64.len()];
    let home = cell_of(&x0);
    let constants: Vec<SymReal> = reps
        .iter()
        .zip(&home.0)
        .map(|(r, &j)| r.pieces[j].offset.neg())
        .collect();

    let phi_f64 = |i: usize, n: i64| phis[i].eval_f64(n);
    let c_f64: Vec<f64> = constants.iter().map(|c| c.to_f64()).collect();

    let mut delta = 0.125f64;
    loop {
        // collect Bohr-set elements: n with n u in the home cell and within
        // delta of 0 in every coordinate
        let mut hs: Vec<i64> = Vec::new();
        let mut n = 1i64;
        while n <= scan_cap && hs.len() < h_count {
            let x: Vec<f64> = u_f64.iter().map(|u| (u * n as f64).rem_euclid(1.0)).collect();
            let near_zero = x.iter().all(|v| v.min(1.0 - v) < delta);
            if near_zero && cell_of(&x) == home {
                hs.push(n);
            }
            n += 1;
        }
        if hs.is_empty() {
            if delta > 1.0 / 4096.0 {
                delta /= 2.0;
                continue;
            }
            return Err(TorusError::NoInteriorPiece);
        }
        let mut sampled = Vec::new();
        let mut all_pass = true;
        for &h in &hs {
            let mut good = 0usize;
            for n in 1..=density_horizon {
                let ok = (0..phis.len()).all(|i| {
                    let lhs = phi_f64(i, n + h);
                    let rhs = phi_f64(i, n) + phi_f64(i, h) + c_f64[i];
                    (lhs - rhs).abs() < 1e-6
                });
                if ok {
                    good += 1;
                }
            }
            let density = good as f64 / density_horizon as f64;
            if density <= 1.0 - eps {
                all_pass = false;
            }
            sampled.push((h, density));
        }
        if all_pass || delta <= 1.0 / 4096.0 {
            return Ok(AlmostLinearity {
                constants,
                delta,
                sampled,
                all_pass,
            });
        }
        delta /= 2.0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::number_field::{rat, Session};

    fn s23() -> Session {
        Session::quadratic(&[2, 3])
    }

    fn floor_sqrt2(s: &Session) -> GlfExpr {
        GlfExpr::floor(GlfExpr::linear(s.sqrt(2).unwrap(), s.zero()))
    }

    #[test]
    fn linear_phase_limits() {
        let s = s23();
        // phi(n) = n, beta = 1/2: average of (-1)^n is 0
        let v = char_limit(&GlfExpr::var(&s), &s.ratio(1, 2)).unwrap();
        assert!(v.exact);
        assert!(v.value.norm() < 1e-12);
        // beta integer: limit 1
        let v = char_limit(&GlfExpr::var(&s), &s.integer(2)).unwrap();
        assert!((v.value - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        // irrational slope: 0
        let v = char_limit(&GlfExpr::var(&s), &s.sqrt(2).unwrap()).unwrap();
        assert!(v.exact && v.value.norm() < 1e-12);
    }

    #[test]
    fn bracket_linear_certificates() {
        let s = s23();
        let phi = floor_sqrt2(&s);
        let r2 = s.sqrt(2).unwrap();

        // beta = sqrt2: alpha beta = 2, nonzero with known modulus
        let v = char_limit(&phi, &r2).unwrap();
        assert!(v.exact);
        let expected = (std::f64::consts::PI * std::f64::consts::SQRT_2).sin().abs()
            / (std::f64::consts::PI * std::f64::consts::SQRT_2);
        assert!(
            (v.value.norm() - expected.abs()).abs() < 1e-12,
            "{} vs {}",
            v.value.norm(),
            expected
        );

        // beta = sqrt3: independent, exact zero
        let v = char_limit(&phi, &s.sqrt(3).unwrap()).unwrap();
        assert!(v.exact && v.value.norm() == 0.0);
        assert!(v.certificate.as_deref().unwrap().contains("independent"));

        // beta = sqrt2/4: alpha beta = 1/2 is in Z alpha + Q but the limit
        // still vanishes (translated arcs cancel)
        let v = char_limit(&phi, &r2.scale(&rat(1, 4))).unwrap();
        assert!(v.exact && v.value.norm() == 0.0);
        assert!(v.certificate.as_deref().unwrap().contains("rational-offset"));

        // beta = sqrt2/2: alpha beta = 1, nonzero
        let v = char_limit(&phi, &r2.scale(&rat(1, 2))).unwrap();
        assert!(v.exact);
        assert!(v.value.norm() > 0.3);
    }

    #[test]
    fn numeric_limit_matches_orbit_average() {
        let s = s23();
        let phi = floor_sqrt2(&s);
        let r2 = s.sqrt(2).unwrap();
        let v = char_limit(&phi, &r2).unwrap();
        // direct orbit average at N = 2 * 10^5
        let alpha = std::f64::consts::SQRT_2;
        let beta = std::f64::consts::SQRT_2;
        let n_max = 200_000;
        let mut acc = Complex64::zero();
        for n in 1..=n_max {
            let p = beta * (alpha * n as f64).floor();
            acc += Complex64::from_polar(1.0, TAU * p.rem_euclid(1.0));
        }
        let direct = acc / n_max as f64;
        assert!((v.value - direct).norm() < 0.01, "{:?} vs {direct:?}", v.value);

        // numeric path (mixed phase falls back to integration)
        let mixed = GlfExpr::sum(vec![
            GlfExpr::scale(s.sqrt(3).unwrap(), GlfExpr::frac(GlfExpr::linear(r2, s.zero()))),
        ]);
        let nv = exp_limit_with_samples(&mixed, 1 << 14).unwrap();
        let mut acc = Complex64::zero();
        for n in 1..=n_max {
            let p = 3f64.sqrt() * (alpha * n as f64).rem_euclid(1.0);
            acc += Complex64::from_polar(1.0, TAU * p.rem_euclid(1.0));
        }
        let direct = acc / n_max as f64;
        assert!((nv.value - direct).norm() < 0.02, "{:?} vs {direct:?}", nv.value);
    }

    #[test]
    fn besicovitch_constant_and_periodic() {
        let s = s23();
        let c = GlfExpr::constant(s.ratio(7, 3));
        let q = besicovitch_approx_with(&c, 0.01, 1 << 10, 1000).unwrap();
        assert!(q.mean_error < 1e-9);

        // {n/2}: two-point closure, exact two-term polynomial
        let half = GlfExpr::frac(GlfExpr::linear(s.ratio(1, 2), s.zero()));
        let q = besicovitch_approx_with(&half, 0.01, 1 << 10, 1000).unwrap();
        assert!(q.mean_error < 1e-9);
        assert!(q.terms.len() <= 2);
        for n in 0..10 {
            let expect = if n % 2 == 0 { 0.0 } else { 0.5 };
            assert!((q.eval(n) - expect).abs() < 1e-9);
        }
    }

    #[test]
    fn besicovitch_sawtooth() {
        let s = s23();
        let saw = GlfExpr::frac(GlfExpr::linear(s.sqrt(2).unwrap(), s.zero()));
        let q = besicovitch_approx_with(&saw, 0.1, 1 << 13, 20_000).unwrap();
        assert!(q.mean_error < 0.1, "mean error {}", q.mean_error);
        assert!(q.cutoff >= 1);
    }

    #[test]
    fn besicovitch_cutoff_refusal() {
        let s = s23();
        // a sawtooth cannot be approximated to 1e-6 mean error within the
        // frequency budget: the discontinuity carries too much mass
        let saw = GlfExpr::frac(GlfExpr::linear(s.sqrt(2).unwrap(), s.zero()));
        assert!(matches!(
            besicovitch_approx_with(&saw, 1e-6, 1 << 10, 2_000),
            Err(TorusError::CutoffExceeded { .. })
        ));
    }

    #[test]
    fn almost_linearity_pure_linear() {
        let s = s23();
        let phi = GlfExpr::linear(s.sqrt(2).unwrap(), s.ratio(5, 7));
        let w = almost_linearity_with(&[phi], 0.05, 10_000, 5_000, 3).unwrap();
        assert!(w.all_pass);
        // C = -b
        assert_eq!(w.constants[0], s.ratio(-5, 7));
        for (_, d) in &w.sampled {
            assert!((*d - 1.0).abs() < 1e-12, "density {d}");
        }
    }

    #[test]
    fn almost_linearity_beatty() {
        let s = s23();
        let phi = floor_sqrt2(&s);
        let w = almost_linearity_with(&[phi], 0.1, 200_000, 50_000, 4).unwrap();
        assert!(w.all_pass, "sampled: {:?}", w.sampled);
        for (_, d) in &w.sampled {
            assert!(*d > 0.9);
        }
    }

    #[test]
    fn almost_linearity_joint() {
        let s = s23();
        let phis = vec![
            floor_sqrt2(&s),
            GlfExpr::floor(GlfExpr::linear(s.sqrt(3).unwrap(), s.zero())),
        ];
        let w = almost_linearity_with(&phis, 0.2, 400_000, 50_000, 3).unwrap();
        assert!(w.all_pass, "sampled: {:?}", w.sampled);
        for (_, d) in &w.sampled {
            assert!(*d > 0.8);
        }
    }
}
