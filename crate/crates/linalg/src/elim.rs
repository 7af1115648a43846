//! Row reduction kernels.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::matrix::Matrix;
use crate::scalar::{Rational, Scalar};

/// Gauss-Jordan over a field. Pivots are the first nonzero entry in column
/// order, so the result is deterministic. With `full` the pivot columns are
/// cleared above as well as below and pivot rows are scaled to 1.
pub fn gauss_jordan<S: Scalar>(m: &mut Matrix<S>, full: bool) -> Vec<usize> {
    let (rows, cols) = (m.rows(), m.cols());
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(p) = (r..rows).find(|&i| !m.get(i, c).is_zero()) else {
            continue;
        };
        m.swap_rows(p, r);
        let inv = m.get(r, c).inv().expect("nonzero pivot");
        let prow: Vec<(usize, S)> = {
            let row = m.row_mut(r);
            row[c] = S::one();
            let mut nz = Vec::new();
            for (j, v) in row.iter_mut().enumerate().skip(c + 1) {
                if !v.is_zero() {
                    *v = v.mul(&inv);
                    nz.push((j, v.clone()));
                }
            }
            nz
        };
        let first = if full { 0 } else { r + 1 };
        let data = m.data_mut();
        crate::par::for_each_row(&mut data[first * cols..], cols, |i, row| {
            if i + first == r {
                return;
            }
            let f = row[c].clone();
            if f.is_zero() {
                return;
            }
            row[c] = S::zero();
            for (j, v) in &prow {
                row[*j].sub_mul_assign(&f, v);
            }
        });
        pivots.push(c);
        r += 1;
    }
    pivots
}

fn lcm_of_denominators(row: &[Rational]) -> BigInt {
    row.iter().fold(BigInt::one(), |acc, x| acc.lcm(x.denom()))
}

fn primitive(row: &mut [BigInt]) {
    let g = row.iter().fold(BigInt::zero(), |acc, x| acc.gcd(x));
    if !g.is_zero() && !g.is_one() {
        for x in row.iter_mut() {
            *x /= &g;
        }
    }
}

/// Fraction-free row reduction over the rationals: rows are scaled to
/// integer vectors, each elimination step is a cross-multiplication, and
/// rows are divided by their content to keep entries small. The result is
/// written back with pivots normalized to 1.
pub fn fraction_free_rref(m: &mut Matrix<Rational>, full: bool) -> Vec<usize> {
    let (rows, cols) = (m.rows(), m.cols());
    let mut a: Vec<Vec<BigInt>> = (0..rows)
        .map(|i| {
            let row = m.row(i);
            let l = lcm_of_denominators(row);
            let mut v: Vec<BigInt> = row.iter().map(|x| x.numer() * (&l / x.denom())).collect();
            primitive(&mut v);
            v
        })
        .collect();
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(p) = (r..rows).find(|&i| !a[i][c].is_zero()) else {
            continue;
        };
        a.swap(p, r);
        let prow = a[r].clone();
        let pv = prow[c].clone();
        let nz: Vec<usize> = (c..cols).filter(|&j| !prow[j].is_zero()).collect();
        let first = if full { 0 } else { r + 1 };
        for (i, row) in a.iter_mut().enumerate().skip(first) {
            if i == r || row[c].is_zero() {
                continue;
            }
            let g = pv.gcd(&row[c]);
            let fp = &pv / &g;
            let fi = &row[c] / &g;
            if !fp.is_one() {
                for x in row.iter_mut() {
                    if !x.is_zero() {
                        *x *= &fp;
                    }
                }
            }
            for &j in &nz {
                row[j] -= &fi * &prow[j];
            }
            primitive(row);
        }
        pivots.push(c);
        r += 1;
    }
    for (i, row) in a.iter().enumerate() {
        let out = m.row_mut(i);
        match pivots.get(i) {
            Some(&c) => {
                let pv = row[c].clone();
                for (o, x) in out.iter_mut().zip(row) {
                    *o = BigRational::new(x.clone(), pv.clone());
                }
            }
            None => {
                for o in out.iter_mut() {
                    *o = <Rational as Zero>::zero();
                }
            }
        }
    }
    pivots
}

/// Rank by Bareiss fraction-free elimination on the integer-scaled rows.
/// Every intermediate entry is a minor of the input, so the divisions are
/// exact and entry growth stays polynomial.
pub fn bareiss_rank(m: &Matrix<Rational>) -> usize {
    let (rows, cols) = (m.rows(), m.cols());
    let mut a: Vec<Vec<BigInt>> = (0..rows)
        .map(|i| {
            let row = m.row(i);
            let l = lcm_of_denominators(row);
            row.iter().map(|x| x.numer() * (&l / x.denom())).collect()
        })
        .collect();
    let mut prev = BigInt::one();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(p) = (r..rows).find(|&i| !a[i][c].is_zero()) else {
            continue;
        };
        a.swap(p, r);
        let (head, tail) = a.split_at_mut(r + 1);
        let prow = &head[r];
        for row in tail.iter_mut() {
            let f = row[c].clone();
            for j in c + 1..cols {
                let v = &prow[c] * &row[j] - &f * &prow[j];
                debug_assert!((&v % &prev).is_zero());
                row[j] = v / &prev;
            }
            row[c] = BigInt::zero();
        }
        prev = head[r][c].clone();
        r += 1;
    }
    r
}
