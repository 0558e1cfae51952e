//! Finite Cesàro and density averaging over Følner schedules, the van der
//! Corput inequalities, Gowers uniformity norms, prime-weighted averages, and
//! weighted continuous Cesàro means.
//!
//! Every "limit" here is finitary: a schedule exposes indexed finite subsets
//! of the integers and the operations return the average at one index,
//! usually paired with an error proxy. Custom schedules can be checked
//! empirically for the Følner property.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

#[derive(Debug)]
pub enum AveragingError {
    ComplexityRefusal { cost: f64, limit: f64 },
    NonMonotoneWeight,
    EmptySchedule,
}

impl fmt::Display for AveragingError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AveragingError::ComplexityRefusal { cost, limit } => {
                write!(f, "refusing O({cost:.3e}) computation (limit {limit:.0e})")
            }
            AveragingError::NonMonotoneWeight => write!(f, "weight must be positive monotone"),
            AveragingError::EmptySchedule => write!(f, "schedule produced an empty set"),
        }
    }
}

impl std::error::Error for AveragingError {}

/// Indexed Følner sequence in the integers.
#[derive(Clone)]
pub enum FolnerSchedule {
    /// `[1..N]`
    Forward,
    /// `[N+1..2N]` (drifting windows)
    Window,
    /// arbitrary finite-set generator
    Custom(Arc<dyn Fn(u64) -> Vec<i64> + Send + Sync>),
}

impl fmt::Debug for FolnerSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FolnerSchedule::Forward => write!(f, "Forward"),
            FolnerSchedule::Window => write!(f, "Window"),
            FolnerSchedule::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl FolnerSchedule {
    pub fn elements(&self, index: u64) -> Vec<i64> {
        match self {
            FolnerSchedule::Forward => (1..=index as i64).collect(),
            FolnerSchedule::Window => (index as i64 + 1..=2 * index as i64).collect(),
            FolnerSchedule::Custom(g) => g(index),
        }
    }

    /// `|(Phi - h) \ Phi| + |Phi \ (Phi - h)|` over `|Phi|`; tends to zero
    /// along any Følner sequence.
    pub fn shift_defect(&self, index: u64, h: i64) -> f64 {
        let phi = self.elements(index);
        let set: std::collections::HashSet<i64> = phi.iter().copied().collect();
        let mut sym_diff = 0usize;
        for &n in &phi {
            if !set.contains(&(n + h)) {
                sym_diff += 2; // n+h leaves the set and n enters the shifted one
            }
        }
        sym_diff as f64 / phi.len() as f64
    }
}

/// Values a Cesàro average can take: anything with vector-space structure
/// and a norm.
pub trait LinearValue: Clone {
    fn zero() -> Self;
    fn add_assign_value(&mut self, other: &Self);
    fn scale_by(&mut self, c: f64);
    fn norm(&self) -> f64;
}

impl LinearValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn add_assign_value(&mut self, other: &Self) {
        *self += other;
    }
    fn scale_by(&mut self, c: f64) {
        *self *= c;
    }
    fn norm(&self) -> f64 {
        self.abs()
    }
}

impl LinearValue for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn add_assign_value(&mut self, other: &Self) {
        *self += other;
    }
    fn scale_by(&mut self, c: f64) {
        *self *= c;
    }
    fn norm(&self) -> f64 {
        Complex64::norm(*self)
    }
}

impl LinearValue for Vec<f64> {
    fn zero() -> Self {
        Vec::new()
    }
    fn add_assign_value(&mut self, other: &Self) {
        if self.is_empty() {
            *self = other.clone();
            return;
        }
        for (a, b) in self.iter_mut().zip(other) {
            *a += b;
        }
    }
    fn scale_by(&mut self, c: f64) {
        for a in self.iter_mut() {
            *a *= c;
        }
    }
    fn norm(&self) -> f64 {
        self.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// `(1/|Phi_N|) sum_{n in Phi_N} f(n)`.
pub fn cesaro_avg<V: LinearValue>(
    mut f: impl FnMut(i64) -> V,
    schedule: &FolnerSchedule,
    index: u64,
) -> Result<V, AveragingError> {
    let phi = schedule.elements(index);
    if phi.is_empty() {
        return Err(AveragingError::EmptySchedule);
    }
    let mut acc = V::zero();
    for &n in &phi {
        acc.add_assign_value(&f(n));
    }
    acc.scale_by(1.0 / phi.len() as f64);
    Ok(acc)
}

/// Density of `{n in Phi_N : pred(n)}`.
pub fn density_est(
    mut pred: impl FnMut(i64) -> bool,
    schedule: &FolnerSchedule,
    index: u64,
) -> Result<f64, AveragingError> {
    let phi = schedule.elements(index);
    if phi.is_empty() {
        return Err(AveragingError::EmptySchedule);
    }
    let count = phi.iter().filter(|&&n| pred(n)).count();
    Ok(count as f64 / phi.len() as f64)
}

#[derive(Debug, Clone, Copy)]
pub struct DlimOutcome {
    /// density of `{n : ||f(n) - u|| >= eps}`
    pub defect: f64,
    pub passes: bool,
}

/// Tests `D-lim f = u`: the defect set of tolerance `eps` must have small
/// density.
pub fn dlim_test<V: LinearValue>(
    mut f: impl FnMut(i64) -> V,
    u: &V,
    eps: f64,
    defect_tol: f64,
    schedule: &FolnerSchedule,
    index: u64,
) -> Result<DlimOutcome, AveragingError> {
    let defect = density_est(
        |n| {
            let mut d = f(n);
            let mut nu = u.clone();
            nu.scale_by(-1.0);
            d.add_assign_value(&nu);
            d.norm() >= eps
        },
        schedule,
        index,
    )?;
    Ok(DlimOutcome {
        defect,
        passes: defect <= defect_tol,
    })
}

/// Finitary van der Corput inequality: for `u_1..u_N` in an inner-product
/// space,
/// `||(1/N) sum u_n||^2 <= (2/N) sum_h |sum_n <u_n, u_{n+h}>| + (1/N^2) sum ||u_n||^2`.
/// Returns `(lhs, rhs)`.
pub fn vdc_finitary(u: &[Vec<f64>]) -> (f64, f64) {
    let n = u.len();
    assert!(n > 0);
    let dim = u[0].len();
    let mut mean = vec![0.0; dim];
    for v in u {
        for (a, b) in mean.iter_mut().zip(v) {
            *a += b;
        }
    }
    let lhs = mean.iter().map(|x| (x / n as f64).powi(2)).sum::<f64>();
    let mut rhs = 0.0;
    for h in 1..n {
        let mut corr = 0.0;
        for i in 0..n - h {
            corr += dot(&u[i], &u[i + h]);
        }
        rhs += corr.abs();
    }
    rhs *= 2.0 / (n as f64) / (n as f64);
    let sq: f64 = u.iter().map(|v| dot(v, v)).sum();
    rhs += sq / (n as f64).powi(2);
    // the middle term in the statement is (2/N) sum_h |(1/N) sum ...|; the
    // double 1/N is folded in above
    (lhs, rhs)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Exact-rational version of [`vdc_finitary`]: the inequality `lhs <= rhs`
/// holds with no tolerance (float evaluation can flip it by an ulp in the
/// equality cases, e.g. nonnegatively correlated pairs).
pub fn vdc_finitary_exact(
    u: &[Vec<crate::number_field::Rat>],
) -> (crate::number_field::Rat, crate::number_field::Rat) {
    use crate::number_field::Rat;
    use num_traits::{Signed, Zero};
    let n = u.len();
    assert!(n > 0);
    let nn = Rat::from_integer(n.into());
    let dim = u[0].len();
    let mut mean: Vec<Rat> = vec![Rat::zero(); dim];
    for v in u {
        for (a, b) in mean.iter_mut().zip(v) {
            *a += b;
        }
    }
    let lhs: Rat = mean.iter().map(|x| x * x).sum::<Rat>() / (&nn * &nn);
    let rdot = |a: &[Rat], b: &[Rat]| -> Rat { a.iter().zip(b).map(|(x, y)| x * y).sum() };
    let mut corr_sum = Rat::zero();
    for h in 1..n {
        let mut corr = Rat::zero();
        for i in 0..n - h {
            corr += rdot(&u[i], &u[i + h]);
        }
        corr_sum += corr.abs();
    }
    let sq: Rat = u.iter().map(|v| rdot(v, v)).sum();
    let two = Rat::from_integer(2.into());
    let rhs = &two * &corr_sum / &nn + sq / (&nn * &nn);
    (lhs, rhs)
}

/// Finite-`N` proxy of the shift-averaging van der Corput bound with a fixed
/// difference set `D`: `lhs <= rhs + slack` where the slack accounts for the
/// Følner edge terms at finite `N`.
pub fn vdc_shift_average_bound(u: &[Vec<f64>], d_set: &[i64]) -> (f64, f64, f64) {
    assert!(!d_set.is_empty());
    let max_h = *d_set.iter().max().unwrap();
    let min_h = *d_set.iter().min().unwrap();
    assert!(min_h >= 0);
    let n = u.len() as i64 - max_h;
    assert!(n > 0, "need more samples than the largest shift");
    let nn = n as usize;
    let dim = u[0].len();
    let sup = u.iter().map(|v| dot(v, v).sqrt()).fold(0.0f64, f64::max);

    let mut mean = vec![0.0; dim];
    for v in u.iter().take(nn) {
        for (a, b) in mean.iter_mut().zip(v) {
            *a += b;
        }
    }
    let lhs = mean.iter().map(|x| (x / n as f64).powi(2)).sum::<f64>();

    let d = d_set.len() as f64;
    let mut rhs = 0.0;
    for &h1 in d_set {
        for &h2 in d_set {
            let mut corr = 0.0;
            for i in 0..nn {
                corr += dot(&u[(i as i64 + h1) as usize], &u[(i as i64 + h2) as usize]);
            }
            rhs += corr / n as f64;
        }
    }
    rhs /= d * d;

    let edge = 2.0 * max_h as f64 * sup / n as f64;
    let slack = 2.0 * edge * sup + edge * edge;
    (lhs, rhs, slack)
}

/// Gowers uniformity norm `U^k[N]` of `b : {1..N} -> R` by the direct
/// finite formula; cost `O(N^{k+1})`.
pub fn gowers_norm(b: &[f64], k: u32) -> Result<f64, AveragingError> {
    assert!(k >= 1);
    let n = b.len();
    assert!(n >= 1);
    let cost = (n as f64).powi(k as i32 + 1);
    if cost > 1e10 {
        return Err(AveragingError::ComplexityRefusal { cost, limit: 1e10 });
    }
    let kk = k as usize;
    let masks = 1usize << kk;
    let mut hs = vec![1usize; kk];
    let mut outer_sum = 0.0f64;
    loop {
        // inner average over n with the convention: empty sum when the upper
        // limit N - h_1 - ... - h_k is not positive
        let h_total: usize = hs.iter().sum();
        if h_total < n {
            let upper = n - h_total; // number of valid n (1-based)
            let mut offsets = Vec::with_capacity(masks);
            for mask in 0..masks {
                let mut off = 0usize;
                for (bit, h) in hs.iter().enumerate() {
                    if mask & (1 << bit) != 0 {
                        off += h;
                    }
                }
                offsets.push(off);
            }
            let mut inner = 0.0f64;
            for i in 0..upper {
                let mut prod = 1.0f64;
                for &off in &offsets {
                    prod *= b[i + off];
                }
                inner += prod;
            }
            outer_sum += (inner / n as f64).abs();
        }
        // odometer over (h_1..h_k) in [1..N]^k
        let mut carry = true;
        for h in hs.iter_mut() {
            *h += 1;
            if *h <= n {
                carry = false;
                break;
            }
            *h = 1;
        }
        if carry {
            break;
        }
    }
    let avg = outer_sum / (n as f64).powi(k as i32);
    Ok(avg.powf(1.0 / (masks as f64)))
}

/// Plain sieve of Eratosthenes with a cached table; beyond the cache limit
/// primality queries fall back to segmented enumeration.
pub struct PrimeSieve {
    limit: usize,
    composite: Vec<bool>,
}

impl PrimeSieve {
    pub fn new(limit: usize) -> PrimeSieve {
        let limit = limit.max(2);
        let mut composite = vec![false; limit + 1];
        composite[0] = true;
        composite[1] = true;
        let mut p = 2usize;
        while p * p <= limit {
            if !composite[p] {
                let mut q = p * p;
                while q <= limit {
                    composite[q] = true;
                    q += p;
                }
            }
            p += 1;
        }
        PrimeSieve { limit, composite }
    }

    pub fn limit(&self) -> usize {
        self.limit
    }

    pub fn is_prime(&self, n: i64) -> bool {
        if n < 2 {
            return false;
        }
        let n = n as usize;
        assert!(n <= self.limit, "sieve limit exceeded; grow the cache");
        !self.composite[n]
    }

    pub fn primes_up_to(&self, n: usize) -> impl Iterator<Item = usize> + '_ {
        let n = n.min(self.limit);
        (2..=n).filter(move |&i| !self.composite[i])
    }

    pub fn prime_count(&self, n: usize) -> usize {
        self.primes_up_to(n).count()
    }
}

/// Iterates primes in `(lo, hi]` without a full table, for ranges beyond the
/// cache: classic segmented sieve driven by the base primes up to sqrt(hi).
pub fn segmented_primes(lo: usize, hi: usize, mut visit: impl FnMut(usize)) {
    let base = PrimeSieve::new((hi as f64).sqrt() as usize + 2);
    const BLOCK: usize = 1 << 18;
    let mut start = lo.max(2);
    while start <= hi {
        let end = (start + BLOCK - 1).min(hi);
        let mut comp = vec![false; end - start + 1];
        for p in base.primes_up_to(base.limit()) {
            let mut q = p.max(start.div_ceil(p)) * p;
            if q < p * p {
                q = p * p;
            }
            while q <= end {
                comp[q - start] = true;
                q += p;
            }
        }
        for (i, &c) in comp.iter().enumerate() {
            let n = start + i;
            if n >= 2 && !c {
                visit(n);
            }
        }
        start = end + 1;
    }
}

/// Weight sequences for transferred averages.
#[derive(Clone)]
pub enum WeightKind {
    Uniform,
    /// `log n` on primes, 0 elsewhere
    VonMangoldtModified,
    PrimeIndicator,
}

pub struct WeightSeq {
    pub kind: WeightKind,
    sieve: Arc<PrimeSieve>,
}

impl WeightSeq {
    pub fn new(kind: WeightKind, sieve: Arc<PrimeSieve>) -> WeightSeq {
        WeightSeq { kind, sieve }
    }

    pub fn weight(&self, n: i64) -> f64 {
        match self.kind {
            WeightKind::Uniform => 1.0,
            WeightKind::VonMangoldtModified => {
                if self.sieve.is_prime(n) {
                    (n as f64).ln()
                } else {
                    0.0
                }
            }
            WeightKind::PrimeIndicator => {
                if self.sieve.is_prime(n) {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// `(1/pi(N)) sum_{p <= N} f(p)`.
pub fn prime_average<V: LinearValue>(
    mut f: impl FnMut(i64) -> V,
    sieve: &PrimeSieve,
    n_max: usize,
) -> V {
    let mut acc = V::zero();
    let mut count = 0usize;
    for p in sieve.primes_up_to(n_max) {
        acc.add_assign_value(&f(p as i64));
        count += 1;
    }
    acc.scale_by(1.0 / count.max(1) as f64);
    acc
}

/// `(1/N) sum_{n <= N} Lambda'(n) f(n)` with the modified von Mangoldt weight
/// `Lambda'(n) = 1_P(n) log n`.
pub fn lambda_prime_average<V: LinearValue>(
    mut f: impl FnMut(i64) -> V,
    sieve: &PrimeSieve,
    n_max: usize,
) -> V {
    let mut acc = V::zero();
    for p in sieve.primes_up_to(n_max) {
        let mut v = f(p as i64);
        v.scale_by((p as f64).ln());
        acc.add_assign_value(&v);
    }
    acc.scale_by(1.0 / n_max as f64);
    acc
}

/// Weighted uniform Cesàro mean `(int_a^b f w) / (int_a^b w)` by composite
/// trapezoid on a uniform grid. The weight must be positive and monotone.
pub fn weighted_uniform_cesaro(
    mut f: impl FnMut(f64) -> f64,
    mut omega: impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    step: f64,
) -> Result<f64, AveragingError> {
    assert!(b > a && step > 0.0);
    let m = ((b - a) / step).ceil() as usize;
    let mut prev_w = omega(a);
    if prev_w <= 0.0 {
        return Err(AveragingError::NonMonotoneWeight);
    }
    let mut direction: Option<bool> = None; // Some(true) = nondecreasing
    let mut num = 0.0f64;
    let mut den = 0.0f64;
    let mut prev_fw = f(a) * prev_w;
    for i in 1..=m {
        let t = a + (b - a) * i as f64 / m as f64;
        let w = omega(t);
        if w <= 0.0 {
            return Err(AveragingError::NonMonotoneWeight);
        }
        match direction {
            None => {
                if w != prev_w {
                    direction = Some(w > prev_w);
                }
            }
            Some(up) => {
                let tol = 1e-12 * (1.0 + w.abs());
                if (up && w < prev_w - tol) || (!up && w > prev_w + tol) {
                    return Err(AveragingError::NonMonotoneWeight);
                }
            }
        }
        let fw = f(t) * w;
        let h = (b - a) / m as f64;
        num += 0.5 * (prev_fw + fw) * h;
        den += 0.5 * (prev_w + w) * h;
        prev_fw = fw;
        prev_w = w;
    }
    Ok(num / den)
}

/// Compares the plain uniform average of `f(sigma(t))` against the
/// `omega = (sigma^{-1})'`-weighted average of `f`, which should agree for
/// monotone substitutions of regular growth. Returns `(plain, weighted)`.
pub fn substitution_average_pair(
    f: impl Fn(f64) -> f64 + Copy,
    sigma: impl Fn(f64) -> f64,
    omega: impl FnMut(f64) -> f64,
    t_end: f64,
    steps: usize,
) -> Result<(f64, f64), AveragingError> {
    // plain average of f(sigma(t)) over [0, t_end]
    let h = t_end / steps as f64;
    let mut acc = 0.5 * (f(sigma(0.0)) + f(sigma(t_end)));
    for i in 1..steps {
        acc += f(sigma(h * i as f64));
    }
    let plain = acc * h / t_end;

    let s_end = sigma(t_end);
    let a = s_end * 1e-9 + 1e-12;
    let weighted = weighted_uniform_cesaro(f, omega, a, s_end, s_end / (4.0 * steps as f64))?;
    Ok((plain, weighted))
}

#[cfg(test)]
mod tests {
    use super::*;

    const TAU: f64 = std::f64::consts::TAU;

    #[test]
    fn cesaro_basics() {
        let fwd = FolnerSchedule::Forward;
        let c: f64 = cesaro_avg(|_| 2.5, &fwd, 1000).unwrap();
        assert_eq!(c, 2.5);
        let alt: f64 = cesaro_avg(|n| if n % 2 == 0 { 1.0 } else { -1.0 }, &fwd, 2000).unwrap();
        assert!(alt.abs() < 1e-12);
        // geometric sum bound for an irrational rotation
        let sq2 = std::f64::consts::SQRT_2;
        let g: Complex64 = cesaro_avg(
            |n| Complex64::from_polar(1.0, TAU * (sq2 * n as f64).rem_euclid(1.0)),
            &fwd,
            1_000_000,
        )
        .unwrap();
        assert!(g.norm() < 2e-3, "{}", g.norm());
    }

    #[test]
    fn folner_shift_defects_shrink() {
        let fwd = FolnerSchedule::Forward;
        assert!(fwd.shift_defect(100, 3) > fwd.shift_defect(10_000, 3));
        let win = FolnerSchedule::Window;
        assert!(win.shift_defect(10_000, 5) < 0.002);
        let odd = FolnerSchedule::Custom(Arc::new(|n| (0..n as i64).map(|k| 2 * k + 1).collect()));
        // odd integers translated by 2 nearly coincide
        assert!(odd.shift_defect(10_000, 2) < 0.001);
        assert_eq!(odd.elements(3), vec![1, 3, 5]);
    }

    #[test]
    fn densities() {
        let fwd = FolnerSchedule::Forward;
        assert!((density_est(|n| n % 2 == 0, &fwd, 1_000_000).unwrap() - 0.5).abs() < 1e-5);
        assert_eq!(density_est(|_| false, &fwd, 1000).unwrap(), 0.0);
        let sq2 = std::f64::consts::SQRT_2;
        let d = density_est(
            |n| (sq2 * n as f64).rem_euclid(1.0) < 0.25,
            &fwd,
            1_000_000,
        )
        .unwrap();
        assert!((d - 0.25).abs() < 0.005, "{d}");
    }

    #[test]
    fn dlim_outcomes() {
        let fwd = FolnerSchedule::Forward;
        let exact = dlim_test(|_| 3.0f64, &3.0, 0.1, 0.0, &fwd, 10_000).unwrap();
        assert_eq!(exact.defect, 0.0);
        assert!(exact.passes);
        // deviation only on perfect squares: density about 1/sqrt(N)
        let sq = dlim_test(
            |n| {
                let r = (n as f64).sqrt().round() as i64;
                if r * r == n {
                    10.0
                } else {
                    1.0
                }
            },
            &1.0,
            0.5,
            0.02,
            &fwd,
            100_000,
        )
        .unwrap();
        assert!(sq.passes, "defect {}", sq.defect);
        let sq2 = std::f64::consts::SQRT_2;
        let saw = dlim_test(
            |n| (sq2 * n as f64).rem_euclid(1.0),
            &0.0,
            0.1,
            0.5,
            &fwd,
            1_000_000,
        )
        .unwrap();
        assert!((saw.defect - 0.9).abs() < 0.01, "{}", saw.defect);
    }

    #[test]
    fn vdc_structured_cases() {
        // constant unit vectors
        let u: Vec<Vec<f64>> = (0..100).map(|_| vec![1.0, 0.0]).collect();
        let (lhs, rhs) = vdc_finitary(&u);
        assert!((lhs - 1.0).abs() < 1e-12);
        assert!(lhs <= rhs);
        // alternating signs
        let u: Vec<Vec<f64>> = (0..101)
            .map(|i| vec![if i % 2 == 0 { 1.0 } else { -1.0 }])
            .collect();
        let (lhs, rhs) = vdc_finitary(&u);
        assert!(lhs <= rhs);
        assert!(lhs < 1e-3);
    }

    #[test]
    fn vdc_shift_average_proxy() {
        let sq2 = std::f64::consts::SQRT_2;
        let u: Vec<Vec<f64>> = (0..5000)
            .map(|n| {
                let t = TAU * (sq2 * n as f64).rem_euclid(1.0);
                vec![t.cos(), t.sin()]
            })
            .collect();
        let (lhs, rhs, slack) = vdc_shift_average_bound(&u, &[0, 7, 13, 29]);
        assert!(lhs <= rhs + slack, "{lhs} vs {rhs} + {slack}");
    }

    #[test]
    fn gowers_hand_values() {
        assert_eq!(gowers_norm(&[0.0; 10], 2).unwrap(), 0.0);
        // b = 1, k = 1, N = 4: ((1/4)(3/4 + 2/4 + 1/4 + 0))^(1/2) = sqrt(3/8)
        let g = gowers_norm(&[1.0; 4], 1).unwrap();
        assert!((g - (3.0f64 / 8.0).sqrt()).abs() < 1e-14, "{g}");
        assert!(matches!(
            gowers_norm(&vec![1.0; 4000], 3),
            Err(AveragingError::ComplexityRefusal { .. })
        ));
    }

    #[test]
    fn gowers_homogeneous() {
        let b: Vec<f64> = (0..20).map(|i| ((i * i + 3) % 7) as f64 - 3.0).collect();
        let g1 = gowers_norm(&b, 2).unwrap();
        let scaled: Vec<f64> = b.iter().map(|x| -2.5 * x).collect();
        let g2 = gowers_norm(&scaled, 2).unwrap();
        assert!((g2 - 2.5 * g1).abs() < 1e-10);
    }

    #[test]
    fn prime_averages() {
        let sieve = PrimeSieve::new(1_000_000);
        // f = 1: prime average is 1; log-weighted average approaches 1
        let one: f64 = prime_average(|_| 1.0, &sieve, 1_000_000);
        assert_eq!(one, 1.0);
        let lam: f64 = lambda_prime_average(|_| 1.0, &sieve, 1_000_000);
        assert!((lam - 1.0).abs() < 0.02, "{lam}");
        // f(n) = (-1)^n: all primes but 2 are odd
        let pi_n = sieve.prime_count(1_000_000) as f64;
        let par: f64 = prime_average(|p| if p % 2 == 0 { 1.0 } else { -1.0 }, &sieve, 1_000_000);
        assert!((par - (-1.0 + 2.0 / pi_n)).abs() < 1e-12);
        // exponential decay along primes
        let sq2 = std::f64::consts::SQRT_2;
        let e: Complex64 = prime_average(
            |p| Complex64::from_polar(1.0, TAU * (sq2 * p as f64).rem_euclid(1.0)),
            &sieve,
            1_000_000,
        );
        assert!(e.norm() < 0.05, "{}", e.norm());
    }

    #[test]
    fn lambda_weight_values() {
        let sieve = Arc::new(PrimeSieve::new(1000));
        let w = WeightSeq::new(WeightKind::VonMangoldtModified, sieve.clone());
        assert_eq!(w.weight(10), 0.0);
        assert!((w.weight(7) - 7f64.ln()).abs() < 1e-15);
        let ind = WeightSeq::new(WeightKind::PrimeIndicator, sieve);
        assert_eq!(ind.weight(9), 0.0);
        assert_eq!(ind.weight(11), 1.0);
    }

    #[test]
    fn segmented_matches_table() {
        let sieve = PrimeSieve::new(100_000);
        let mut seg = Vec::new();
        segmented_primes(50_000, 60_000, |p| seg.push(p));
        let table: Vec<usize> = sieve
            .primes_up_to(60_000)
            .filter(|&p| p >= 50_000)
            .collect();
        assert_eq!(seg, table);
    }

    #[test]
    fn weighted_cesaro_basics() {
        let c = weighted_uniform_cesaro(|_| 4.0, |t| 1.0 + t, 0.0, 100.0, 0.01).unwrap();
        assert!((c - 4.0).abs() < 1e-9);
        let k = 200.0 * std::f64::consts::PI;
        let s = weighted_uniform_cesaro(|t| t.sin(), |_| 1.0, 0.0, k, 0.001).unwrap();
        assert!(s.abs() < 1e-3, "{s}");
        assert!(matches!(
            weighted_uniform_cesaro(|_| 1.0, |t| (t * 10.0).sin() + 2.0, 0.0, 10.0, 0.01),
            Err(AveragingError::NonMonotoneWeight)
        ));
    }

    #[test]
    fn folner_schedules_agree_on_bracket_sequences() {
        // the Cesàro average of a bracket-driven phase is schedule-independent
        let sq2 = std::f64::consts::SQRT_2;
        let sq3 = 3f64.sqrt();
        let f = |n: i64| {
            Complex64::from_polar(1.0, TAU * (sq2 * (sq3 * n as f64).floor()).rem_euclid(1.0))
        };
        let a: Complex64 = cesaro_avg(f, &FolnerSchedule::Forward, 1_000_000).unwrap();
        let b: Complex64 = cesaro_avg(f, &FolnerSchedule::Window, 1_000_000).unwrap();
        assert!((a - b).norm() < 2e-2, "{a} vs {b}");
    }

    #[test]
    fn substitution_square_root_weight() {
        // f(t) = sin(2 pi {sqrt2 t}), sigma(t) = t^2 on [0, 400]
        let sq2 = std::f64::consts::SQRT_2;
        let f = |s: f64| (TAU * (sq2 * s).rem_euclid(1.0)).sin();
        let (plain, weighted) = substitution_average_pair(
            f,
            |t| t * t,
            |s| 0.5 / s.sqrt(),
            20.0,
            200_000,
        )
        .unwrap();
        assert!(
            (plain - weighted).abs() < 0.02,
            "plain {plain} vs weighted {weighted}"
        );
    }
}
