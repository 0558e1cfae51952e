//! Exact integer linear algebra: kernel lattices and Smith normal form.
//!
//! Everything here works over `BigInt` so the lattice computations behind
//! rational-relation detection and orbit-closure parametrization are exact.
//! Matrices are dense `Vec<Vec<BigInt>>` in row-major order; the sizes that
//! occur in practice are tiny (dimensions below ten).

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

pub type Mat = Vec<Vec<BigInt>>;

pub fn identity(n: usize) -> Mat {
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j { BigInt::one() } else { BigInt::zero() })
                .collect()
        })
        .collect()
}

pub fn mat_mul(a: &Mat, b: &Mat) -> Mat {
    let rows = a.len();
    let inner = b.len();
    let cols = if inner == 0 { 0 } else { b[0].len() };
    (0..rows)
        .map(|i| {
            (0..cols)
                .map(|j| (0..inner).map(|k| &a[i][k] * &b[k][j]).sum())
                .collect()
        })
        .collect()
}

pub fn mat_vec(a: &Mat, v: &[BigInt]) -> Vec<BigInt> {
    a.iter()
        .map(|row| row.iter().zip(v).map(|(r, x)| r * x).sum())
        .collect()
}

/// Extended gcd: returns `(g, s, t)` with `g = gcd(a, b) >= 0` and `s*a + t*b = g`.
pub fn extended_gcd(a: &BigInt, b: &BigInt) -> (BigInt, BigInt, BigInt) {
    let (mut r0, mut r1) = (a.clone(), b.clone());
    let (mut s0, mut s1) = (BigInt::one(), BigInt::zero());
    let (mut t0, mut t1) = (BigInt::zero(), BigInt::one());
    while !r1.is_zero() {
        let q = &r0 / &r1;
        let r2 = &r0 - &q * &r1;
        r0 = std::mem::replace(&mut r1, r2);
        let s2 = &s0 - &q * &s1;
        s0 = std::mem::replace(&mut s1, s2);
        let t2 = &t0 - &q * &t1;
        t0 = std::mem::replace(&mut t1, t2);
    }
    if r0.is_negative() {
        (-r0, -s0, -t0)
    } else {
        (r0, s0, t0)
    }
}

/// Combines columns `p` and `j` of `m` (and of `u`) with the unimodular
/// 2x2 block that sends row `r` to `(gcd, 0)`.
fn gcd_columns(m: &mut Mat, u: &mut Mat, r: usize, p: usize, j: usize) {
    let a = m[r][p].clone();
    let b = m[r][j].clone();
    if b.is_zero() {
        return;
    }
    if a.is_zero() {
        for row in m.iter_mut() {
            row.swap(p, j);
        }
        for row in u.iter_mut() {
            row.swap(p, j);
        }
        return;
    }
    let (g, s, t) = extended_gcd(&a, &b);
    let ag = &a / &g;
    let bg = &b / &g;
    for row in m.iter_mut().chain(u.iter_mut()) {
        let cp = row[p].clone();
        let cj = row[j].clone();
        row[p] = &s * &cp + &t * &cj;
        row[j] = &ag * &cj - &bg * &cp;
    }
}

/// Basis of the integer kernel `{x in Z^cols : A x = 0}`.
///
/// The returned vectors generate the full (saturated) kernel lattice because
/// column reduction by unimodular transforms preserves `Z^cols`.
pub fn integer_kernel(a: &Mat) -> Vec<Vec<BigInt>> {
    let rows = a.len();
    let cols = if rows == 0 { 0 } else { a[0].len() };
    if cols == 0 {
        return Vec::new();
    }
    if rows == 0 {
        return identity(cols);
    }
    let mut m = a.to_vec();
    let mut u = identity(cols);
    let mut pivot = 0usize;
    for r in 0..rows {
        if pivot == cols {
            break;
        }
        for j in pivot + 1..cols {
            gcd_columns(&mut m, &mut u, r, pivot, j);
        }
        if m[r][pivot].is_zero() {
            // row r vanishes on all remaining columns
            continue;
        }
        pivot += 1;
    }
    // columns `pivot..cols` of u span the kernel
    (pivot..cols)
        .map(|j| (0..cols).map(|i| u[i][j].clone()).collect())
        .collect()
}

/// Smith-style diagonalization by unimodular row and column operations.
///
/// Row operations rebase the relation lattice (which leaves the conditions
/// `{x : row . x in Z}` invariant), so only the column transform is tracked:
/// `q` is unimodular with inverse `q_inv`, and the reduced matrix has exactly
/// `diag.len()` nonzero entries `diag[t]` at positions `(t, t)`.
///
/// This puts a relation lattice in the decoupled shape `{y : d_t * y_t in Z}`
/// after the change of coordinates `y = q_inv * x`, `x = q * y`.
pub struct ColumnDiagonalization {
    /// nonzero diagonal entries, one per rank
    pub diag: Vec<BigInt>,
    /// change of basis: `x = q * y`
    pub q: Mat,
    /// inverse change of basis: `y = q_inv * x`
    pub q_inv: Mat,
}

pub fn smith_diagonalize(a: &Mat) -> ColumnDiagonalization {
    let rows = a.len();
    let cols = if rows == 0 { 0 } else { a[0].len() };
    let mut m = a.to_vec();
    let mut q = identity(cols);
    let mut q_inv = identity(cols);
    let mut diag = Vec::new();

    let mut t = 0usize;
    'outer: while t < rows && t < cols {
        // move a nonzero entry of the trailing submatrix to (t, t)
        let mut found = None;
        for i in t..rows {
            for j in t..cols {
                if !m[i][j].is_zero() {
                    found = Some((i, j));
                    break;
                }
            }
            if found.is_some() {
                break;
            }
        }
        let Some((pi, pj)) = found else {
            break 'outer;
        };
        m.swap(t, pi);
        if pj != t {
            for row in m.iter_mut() {
                row.swap(t, pj);
            }
            for row in q.iter_mut() {
                row.swap(t, pj);
            }
            q_inv.swap(t, pj);
        }

        loop {
            // clear column t below the pivot with row operations
            for i in t + 1..rows {
                if m[i][t].is_zero() {
                    continue;
                }
                let a0 = m[t][t].clone();
                let b0 = m[i][t].clone();
                let (g, s, u) = extended_gcd(&a0, &b0);
                let ag = &a0 / &g;
                let bg = &b0 / &g;
                let row_t = m[t].clone();
                let row_i = m[i].clone();
                m[t] = row_t
                    .iter()
                    .zip(row_i.iter())
                    .map(|(x, y)| &s * x + &u * y)
                    .collect();
                m[i] = row_t
                    .iter()
                    .zip(row_i.iter())
                    .map(|(x, y)| &ag * y - &bg * x)
                    .collect();
            }
            // clear row t right of the pivot with tracked column operations
            for j in t + 1..cols {
                if m[t][j].is_zero() {
                    continue;
                }
                gcd_columns_tracked(&mut m, &mut q, &mut q_inv, t, t, j);
            }
            let col_clear = (t + 1..rows).all(|i| m[i][t].is_zero());
            let row_clear = (t + 1..cols).all(|j| m[t][j].is_zero());
            if col_clear && row_clear {
                break;
            }
        }

        let mut d = m[t][t].clone();
        if d.is_negative() {
            d = -d;
            for row in m.iter_mut() {
                row[t] = -row[t].clone();
            }
            for row in q.iter_mut() {
                row[t] = -row[t].clone();
            }
            for x in q_inv[t].iter_mut() {
                *x = -x.clone();
            }
        }
        diag.push(d);
        t += 1;
    }
    ColumnDiagonalization { diag, q, q_inv }
}

/// Same 2x2 unimodular column combination as `gcd_columns`, with the inverse
/// transform applied to `q_inv` on the left.
fn gcd_columns_tracked(m: &mut Mat, q: &mut Mat, q_inv: &mut Mat, r: usize, p: usize, j: usize) {
    let a = m[r][p].clone();
    let b = m[r][j].clone();
    if b.is_zero() {
        return;
    }
    if a.is_zero() {
        for row in m.iter_mut() {
            row.swap(p, j);
        }
        for row in q.iter_mut() {
            row.swap(p, j);
        }
        q_inv.swap(p, j);
        return;
    }
    let (g, s, t) = extended_gcd(&a, &b);
    let ag = &a / &g;
    let bg = &b / &g;
    for row in m.iter_mut().chain(q.iter_mut()) {
        let cp = row[p].clone();
        let cj = row[j].clone();
        row[p] = &s * &cp + &t * &cj;
        row[j] = &ag * &cj - &bg * &cp;
    }
    let rp = q_inv[p].clone();
    let rj = q_inv[j].clone();
    q_inv[p] = rp
        .iter()
        .zip(rj.iter())
        .map(|(x, y)| &ag * x + &bg * y)
        .collect();
    q_inv[j] = rp
        .iter()
        .zip(rj.iter())
        .map(|(x, y)| &s * y - &t * x)
        .collect();
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[i64]]) -> Mat {
        rows.iter()
            .map(|r| r.iter().map(|&x| BigInt::from(x)).collect())
            .collect()
    }

    #[test]
    fn egcd_basics() {
        let (g, s, t) = extended_gcd(&BigInt::from(12), &BigInt::from(18));
        assert_eq!(g, BigInt::from(6));
        assert_eq!(s * 12 + t * 18, BigInt::from(6));
        let (g, _, _) = extended_gcd(&BigInt::from(0), &BigInt::from(-7));
        assert_eq!(g, BigInt::from(7));
    }

    #[test]
    fn kernel_of_dependent_pair() {
        // coefficients of (sqrt2, 2*sqrt2) over the monomial basis {sqrt2}
        let k = integer_kernel(&m(&[&[1, 2]]));
        assert_eq!(k.len(), 1);
        let v = &k[0];
        assert_eq!(&v[0] + 2 * &v[1], BigInt::zero());
        assert_eq!(num_integer::gcd(v[0].clone(), v[1].clone()), BigInt::one());
    }

    #[test]
    fn kernel_trivial_for_independent() {
        let k = integer_kernel(&m(&[&[1, 0], &[0, 1]]));
        assert!(k.is_empty());
    }

    #[test]
    fn kernel_saturated() {
        // 2x + 2y = 0 has primitive solution (1, -1), not just (2, -2)
        let k = integer_kernel(&m(&[&[2, 2]]));
        assert_eq!(k.len(), 1);
        assert_eq!(k[0][0].magnitude(), &num_bigint::BigUint::from(1u32));
    }

    #[test]
    fn diagonalization_is_consistent() {
        let a = m(&[&[3, 0], &[0, 0]]);
        let d = smith_diagonalize(&a);
        assert_eq!(d.diag, vec![BigInt::from(3)]);
        assert_eq!(mat_mul(&d.q, &d.q_inv), identity(2));

        for a in [
            m(&[&[2, 4, 4], &[-6, 6, 12]]),
            m(&[&[1, 2], &[3, 4], &[5, 6]]),
            m(&[&[0, 0, 5], &[0, 7, 0]]),
        ] {
            let d = smith_diagonalize(&a);
            let cols = a[0].len();
            assert_eq!(mat_mul(&d.q, &d.q_inv), identity(cols));
            // {x : a x in Z^rows} must equal {q y : d_t y_t in Z}; equivalently
            // column t of a*q is divisible by d_t and trailing columns vanish
            let aq = mat_mul(&a, &d.q);
            for row in &aq {
                for (t, x) in row.iter().enumerate() {
                    if t < d.diag.len() {
                        assert!((x % &d.diag[t]).is_zero(), "{aq:?} vs {:?}", d.diag);
                    } else {
                        assert!(x.is_zero(), "trailing column {t} nonzero in {aq:?}");
                    }
                }
            }
        }
    }
}
