//! Rank, nullspace, column bases and solves.

use crate::error::LinalgError;
use crate::matrix::Matrix;
use crate::scalar::{Rational, Scalar};

/// Exact rank.
pub fn rank<S: Scalar>(m: &Matrix<S>) -> usize {
    let mut a = m.clone();
    S::echelon(&mut a).len()
}

/// Exact rank of a rational matrix by Bareiss elimination.
pub fn rank_exact(m: &Matrix<Rational>) -> usize {
    crate::elim::bareiss_rank(m)
}

/// Basis of the right kernel, one column per free variable. Pivot variables
/// are expressed through the reduced row echelon form, so the basis is the
/// canonical one for the deterministic pivot order.
pub fn nullspace_basis<S: Scalar>(m: &Matrix<S>) -> Matrix<S> {
    let n = m.cols();
    let mut a = m.clone();
    let pivots = S::rref(&mut a);
    let mut is_pivot = vec![false; n];
    for &p in &pivots {
        is_pivot[p] = true;
    }
    let free: Vec<usize> = (0..n).filter(|&j| !is_pivot[j]).collect();
    let mut out = Matrix::zeros(n, free.len());
    for (k, &f) in free.iter().enumerate() {
        out.set(f, k, S::one());
        for (i, &p) in pivots.iter().enumerate() {
            let v = a.get(i, f);
            if !v.is_zero() {
                out.set(p, k, v.neg());
            }
        }
    }
    out
}

/// Indices of a maximal linearly independent subset of the columns, chosen
/// greedily from the left.
pub fn independent_columns<S: Scalar>(m: &Matrix<S>) -> Vec<usize> {
    let mut a = m.clone();
    S::echelon(&mut a)
}

/// Indices of a maximal linearly independent subset of the rows, chosen
/// greedily from the top.
pub fn independent_rows<S: Scalar>(m: &Matrix<S>) -> Vec<usize> {
    independent_columns(&m.transpose())
}

/// Unique solution of a square nonsingular system.
pub fn solve_exact<S: Scalar>(m: &Matrix<S>, b: &[S]) -> Result<Vec<S>, LinalgError> {
    let lu = Lu::factor(m)?;
    lu.solve(b)
}

/// LU factorization with row pivoting, for repeated solves against one
/// matrix.
#[derive(Clone, Debug)]
pub struct Lu<S: Scalar> {
    n: usize,
    lu: Matrix<S>,
    perm: Vec<usize>,
}

impl<S: Scalar> Lu<S> {
    pub fn factor(m: &Matrix<S>) -> Result<Self, LinalgError> {
        let n = m.rows();
        if m.cols() != n {
            return Err(LinalgError::Shape(format!("{}x{} is not square", n, m.cols())));
        }
        let mut a = m.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for c in 0..n {
            let Some(p) = (c..n).find(|&i| !a.get(i, c).is_zero()) else {
                return Err(LinalgError::Singular { rank: rank(m), size: n });
            };
            a.swap_rows(p, c);
            perm.swap(p, c);
            let inv = a.get(c, c).inv().expect("nonzero pivot");
            let prow: Vec<(usize, S)> = (c + 1..n)
                .filter(|&j| !a.get(c, j).is_zero())
                .map(|j| (j, a.get(c, j).clone()))
                .collect();
            let data = a.data_mut();
            crate::par::for_each_row(&mut data[(c + 1) * n..], n, |_, row| {
                if row[c].is_zero() {
                    return;
                }
                let f = row[c].mul(&inv);
                row[c] = f.clone();
                for (j, v) in &prow {
                    row[*j].sub_mul_assign(&f, v);
                }
            });
        }
        Ok(Lu { n, lu: a, perm })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[S]) -> Result<Vec<S>, LinalgError> {
        let n = self.n;
        if b.len() != n {
            return Err(LinalgError::Shape(format!("rhs length {} for size {}", b.len(), n)));
        }
        let mut y: Vec<S> = self.perm.iter().map(|&p| b[p].clone()).collect();
        for i in 0..n {
            let row = self.lu.row(i);
            let mut acc = y[i].clone();
            for (j, yj) in y.iter().enumerate().take(i) {
                if !row[j].is_zero() {
                    acc.sub_mul_assign(&row[j], yj);
                }
            }
            y[i] = acc;
        }
        for i in (0..n).rev() {
            let row = self.lu.row(i);
            let mut acc = y[i].clone();
            for (j, yj) in y.iter().enumerate().skip(i + 1) {
                if !row[j].is_zero() {
                    acc.sub_mul_assign(&row[j], yj);
                }
            }
            y[i] = acc.mul(&row[i].inv().expect("nonzero pivot"));
        }
        Ok(y)
    }
}

/// Rank of a rational matrix reduced modulo the prime `p`.
///
/// Independent of the Montgomery field type: plain `u128` arithmetic with a
/// runtime modulus, so any prime can be supplied. The result never exceeds
/// the rank over the rationals.
pub fn modular_rank(m: &Matrix<Rational>, p: u64) -> Result<usize, LinalgError> {
    if p < 3 || !is_probable_prime(p) {
        return Err(LinalgError::BadModulus(p));
    }
    use num_bigint::BigInt;
    use num_integer::Integer;
    use num_traits::ToPrimitive;
    let pb = BigInt::from(p);
    let red = |x: &BigInt| x.mod_floor(&pb).to_u64().unwrap();
    let mulm = |a: u64, b: u64| ((a as u128 * b as u128) % p as u128) as u64;
    let (rows, cols) = (m.rows(), m.cols());
    let mut a = vec![0u64; rows * cols];
    for i in 0..rows {
        for j in 0..cols {
            let x = m.get(i, j);
            let d = red(x.denom());
            if d == 0 {
                return Err(LinalgError::DenominatorVanishes { prime: p });
            }
            a[i * cols + j] = mulm(red(x.numer()), pow_mod(d, p - 2, p));
        }
    }
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(piv) = (r..rows).find(|&i| a[i * cols + c] != 0) else {
            continue;
        };
        for j in 0..cols {
            a.swap(piv * cols + j, r * cols + j);
        }
        let inv = pow_mod(a[r * cols + c], p - 2, p);
        for i in r + 1..rows {
            let f = mulm(a[i * cols + c], inv);
            if f == 0 {
                continue;
            }
            for j in c..cols {
                let s = mulm(f, a[r * cols + j]);
                let v = a[i * cols + j];
                a[i * cols + j] = if v >= s { v - s } else { v + p - s };
            }
        }
        r += 1;
    }
    Ok(r)
}

fn pow_mod(mut b: u64, mut e: u64, p: u64) -> u64 {
    let mut acc = 1u64;
    b %= p;
    while e > 0 {
        if e & 1 == 1 {
            acc = ((acc as u128 * b as u128) % p as u128) as u64;
        }
        b = ((b as u128 * b as u128) % p as u128) as u64;
        e >>= 1;
    }
    acc
}

/// Deterministic Miller-Rabin for 64-bit integers.
pub fn is_probable_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for sp in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n % sp == 0 {
            return n == sp;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d % 2 == 0 {
        d /= 2;
        s += 1;
    }
    'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 0..s - 1 {
            x = ((x as u128 * x as u128) % n as u128) as u64;
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// A solution of a possibly rectangular, possibly singular system, with the
/// free variables set to zero, or `None` when `b` is not in the column space.
/// Pivot variables are the least-index independent columns.
pub fn solve_any<S: Scalar>(m: &Matrix<S>, b: &[S]) -> Result<Option<Vec<S>>, LinalgError> {
    if b.len() != m.rows() {
        return Err(LinalgError::Shape(format!("solve: {} rows, rhs of length {}", m.rows(), b.len())));
    }
    let n = m.cols();
    let aug = m.hstack(&Matrix::from_columns(&[b.to_vec()], b.len()))?;
    let mut a = aug;
    let pivots = S::rref(&mut a);
    if pivots.last() == Some(&n) {
        return Ok(None);
    }
    let mut x = vec![S::zero(); n];
    for (i, &p) in pivots.iter().enumerate() {
        x[p] = a.get(i, n).clone();
    }
    Ok(Some(x))
}
