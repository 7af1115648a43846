//! Homogeneous polynomials in barycentric coordinates.
//!
//! A polynomial of degree `d` on a simplex with `nv` vertices is stored as
//! the coefficient vector of the monomials `lambda^alpha`, `|alpha| = d`, in
//! the order of [`Monomials`]. Lower-degree polynomials are raised by
//! multiplying with `(sum lambda)^k`, which is 1 on the simplex.

use std::sync::OnceLock;

use alfeld_linalg::{Rational, Scalar};
use num_bigint::BigInt;

pub const MAX_DEG: usize = 24;

/// Number of monomials of degree `d` in `nv` variables.
pub fn dim(nv: usize, d: usize) -> usize {
    binom(d + nv - 1, nv - 1)
}

pub fn binom(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let mut r = 1usize;
    for i in 0..k {
        r = r * (n - i) / (i + 1);
    }
    r
}

/// Dimension of P_k in three variables, zero for negative degree.
pub fn dim_p3(k: i64) -> usize {
    if k < 0 {
        0
    } else {
        dim(4, k as usize)
    }
}

/// Dimension of P_k in two variables, zero for negative degree.
pub fn dim_p2(k: i64) -> usize {
    if k < 0 {
        0
    } else {
        dim(3, k as usize)
    }
}

/// Dimension of P_k in one variable, zero for negative degree.
pub fn dim_p1(k: i64) -> usize {
    if k < 0 {
        0
    } else {
        k as usize + 1
    }
}

/// Monomial table for `(nv, deg)`: exponents in descending lexicographic
/// order, so the first monomial is `lambda_0^deg`.
pub struct Monomials {
    pub nv: usize,
    pub deg: usize,
    pub exps: Vec<[u8; 4]>,
    lookup: Vec<u32>,
    raise: OnceLock<Vec<[u32; 4]>>,
}

impl Monomials {
    fn build(nv: usize, deg: usize) -> Self {
        let mut exps = Vec::with_capacity(dim(nv, deg));
        let mut cur = [0u8; 4];
        fn rec(nv: usize, k: usize, left: usize, cur: &mut [u8; 4], out: &mut Vec<[u8; 4]>) {
            if k == nv - 1 {
                cur[k] = left as u8;
                out.push(*cur);
                return;
            }
            for a in (0..=left).rev() {
                cur[k] = a as u8;
                rec(nv, k + 1, left - a, cur, out);
            }
            cur[k] = 0;
        }
        rec(nv, 0, deg, &mut cur, &mut exps);
        let base = deg + 1;
        let size = base.pow(nv as u32 - 1);
        let mut lookup = vec![u32::MAX; size];
        for (i, e) in exps.iter().enumerate() {
            lookup[Self::key(nv, base, e)] = i as u32;
        }
        Monomials {
            nv,
            deg,
            exps,
            lookup,
            raise: OnceLock::new(),
        }
    }

    #[inline]
    fn key(nv: usize, base: usize, e: &[u8; 4]) -> usize {
        let mut k = 0;
        for &x in &e[..nv - 1] {
            k = k * base + x as usize;
        }
        k
    }

    pub fn len(&self) -> usize {
        self.exps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exps.is_empty()
    }

    #[inline]
    pub fn index(&self, e: &[u8; 4]) -> usize {
        self.lookup[Self::key(self.nv, self.deg + 1, e)] as usize
    }

    /// For each monomial `beta` of this table and each variable `j`, the
    /// index of `beta + e_j` in the table of degree `deg + 1`.
    pub fn raise(&self) -> &[[u32; 4]] {
        self.raise.get_or_init(|| {
            let up = monomials(self.nv, self.deg + 1);
            self.exps
                .iter()
                .map(|e| {
                    let mut r = [0u32; 4];
                    for j in 0..self.nv {
                        let mut f = *e;
                        f[j] += 1;
                        r[j] = up.index(&f) as u32;
                    }
                    r
                })
                .collect()
        })
    }
}

/// Cached monomial table.
pub fn monomials(nv: usize, deg: usize) -> &'static Monomials {
    static CACHE: [[OnceLock<Monomials>; MAX_DEG + 2]; 4] =
        [const { [const { OnceLock::new() }; MAX_DEG + 2] }; 4];
    assert!((1..=4).contains(&nv) && deg <= MAX_DEG + 1, "degree {deg} out of range");
    CACHE[nv - 1][deg].get_or_init(|| Monomials::build(nv, deg))
}

fn factorial(n: usize) -> BigInt {
    (1..=n).fold(BigInt::from(1), |acc, k| acc * k)
}

/// Mean value of `lambda^alpha` over a simplex with `nv` vertices:
/// `k! alpha! / (|alpha| + k)!` with `k = nv - 1`.
pub fn mean_weight(nv: usize, e: &[u8; 4]) -> Rational {
    let k = nv - 1;
    let d: usize = e[..nv].iter().map(|&a| a as usize).sum();
    let mut num = factorial(k);
    for &a in &e[..nv] {
        num *= factorial(a as usize);
    }
    Rational::new(num, factorial(d + k))
}

/// Mean-value weights of every monomial of `(nv, deg)`.
pub fn mean_weights(nv: usize, deg: usize) -> Vec<Rational> {
    monomials(nv, deg).exps.iter().map(|e| mean_weight(nv, e)).collect()
}

/// A polynomial on a simplex with `nv` vertices.
#[derive(Clone, Debug, PartialEq)]
pub struct Poly<S> {
    pub nv: usize,
    pub deg: usize,
    pub c: Vec<S>,
}

impl<S: Scalar> Poly<S> {
    pub fn zero(nv: usize, deg: usize) -> Self {
        Poly { nv, deg, c: vec![S::zero(); dim(nv, deg)] }
    }

    pub fn constant(nv: usize, v: S) -> Self {
        Poly { nv, deg: 0, c: vec![v] }
    }

    pub fn monomial(nv: usize, e: [u8; 4]) -> Self {
        let deg = e[..nv].iter().map(|&a| a as usize).sum();
        let mut p = Self::zero(nv, deg);
        let i = monomials(nv, deg).index(&e);
        p.c[i] = S::one();
        p
    }

    /// The barycentric coordinate `lambda_j`.
    pub fn lambda(nv: usize, j: usize) -> Self {
        let mut e = [0u8; 4];
        e[j] = 1;
        Self::monomial(nv, e)
    }

    pub fn linear(coeffs: &[S]) -> Self {
        Poly { nv: coeffs.len(), deg: 1, c: coeffs.to_vec() }
    }

    pub fn is_zero(&self) -> bool {
        self.c.iter().all(|x| x.is_zero())
    }

    pub fn mul(&self, o: &Self) -> Self {
        assert_eq!(self.nv, o.nv);
        let deg = self.deg + o.deg;
        let out_t = monomials(self.nv, deg);
        let (ta, tb) = (monomials(self.nv, self.deg), monomials(o.nv, o.deg));
        let mut c = vec![S::zero(); out_t.len()];
        for (ia, ea) in ta.exps.iter().enumerate() {
            let a = &self.c[ia];
            if a.is_zero() {
                continue;
            }
            for (ib, eb) in tb.exps.iter().enumerate() {
                let b = &o.c[ib];
                if b.is_zero() {
                    continue;
                }
                let mut e = [0u8; 4];
                for k in 0..self.nv {
                    e[k] = ea[k] + eb[k];
                }
                c[out_t.index(&e)].add_mul_assign(a, b);
            }
        }
        Poly { nv: self.nv, deg, c }
    }

    pub fn scale(&self, s: &S) -> Self {
        Poly { nv: self.nv, deg: self.deg, c: self.c.iter().map(|x| x.mul(s)).collect() }
    }

    /// Same polynomial written in degree `deg + k`.
    pub fn elevate(&self, k: usize) -> Self {
        if k == 0 {
            return self.clone();
        }
        let one = Poly::linear(&vec![S::one(); self.nv]);
        let mut p = self.clone();
        for _ in 0..k {
            p = p.mul(&one);
        }
        p
    }

    pub fn to_degree(&self, deg: usize) -> Self {
        assert!(deg >= self.deg, "cannot lower degree {} to {deg}", self.deg);
        self.elevate(deg - self.deg)
    }

    pub fn add(&self, o: &Self) -> Self {
        let d = self.deg.max(o.deg);
        let (a, b) = (self.to_degree(d), o.to_degree(d));
        Poly { nv: self.nv, deg: d, c: a.c.iter().zip(&b.c).map(|(x, y)| x.add(y)).collect() }
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.scale(&S::one().neg()))
    }

    /// Value at a point given in barycentric coordinates.
    pub fn eval(&self, bary: &[S]) -> S {
        let t = monomials(self.nv, self.deg);
        let mut acc = S::zero();
        for (e, c) in t.exps.iter().zip(&self.c) {
            if c.is_zero() {
                continue;
            }
            let mut m = c.clone();
            for k in 0..self.nv {
                for _ in 0..e[k] {
                    m = m.mul(&bary[k]);
                }
            }
            acc = acc.add(&m);
        }
        acc
    }

    /// Substitute `lambda_m = forms[m]`, each form a linear polynomial in
    /// `nv_out` variables.
    pub fn compose_linear(&self, forms: &[Poly<S>]) -> Self {
        assert_eq!(forms.len(), self.nv);
        let nv_out = forms[0].nv;
        let t = monomials(self.nv, self.deg);
        let mut pows: Vec<Vec<Poly<S>>> = Vec::with_capacity(self.nv);
        for f in forms {
            let mut v = vec![Poly::constant(nv_out, S::one())];
            for k in 1..=self.deg {
                let next = v[k - 1].mul(f);
                v.push(next);
            }
            pows.push(v);
        }
        let mut out: Poly<S> = Poly::zero(nv_out, self.deg);
        for (e, c) in t.exps.iter().zip(&self.c) {
            if c.is_zero() {
                continue;
            }
            let mut m = Poly::constant(nv_out, c.clone());
            for k in 0..self.nv {
                if e[k] > 0 {
                    m = m.mul(&pows[k][e[k] as usize]);
                }
            }
            for (o, x) in out.c.iter_mut().zip(&m.c) {
                o.add_assign(x);
            }
        }
        out
    }

    /// Partial derivative in barycentric variable `j` (as a formal
    /// polynomial in independent variables).
    pub fn d_lambda(&self, j: usize) -> Self {
        if self.deg == 0 {
            return Poly::zero(self.nv, 0);
        }
        let lo = monomials(self.nv, self.deg - 1);
        let raise = lo.raise();
        let c = lo
            .exps
            .iter()
            .zip(raise)
            .map(|(e, r)| self.c[r[j] as usize].mul(&S::from_i64(e[j] as i64 + 1)))
            .collect();
        Poly { nv: self.nv, deg: self.deg - 1, c }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alfeld_linalg::q;

    #[test]
    fn table_order_and_lookup() {
        let t = monomials(4, 3);
        assert_eq!(t.len(), 20);
        assert_eq!(t.exps[0], [3, 0, 0, 0]);
        assert_eq!(*t.exps.last().unwrap(), [0, 0, 0, 3]);
        for (i, e) in t.exps.iter().enumerate() {
            assert_eq!(t.index(e), i);
        }
        assert_eq!(monomials(3, 4).len(), 15);
        assert_eq!(monomials(2, 5).len(), 6);
    }

    #[test]
    fn weights_known_values() {
        // int over a tet of lambda0 lambda1 is |T|/20
        assert_eq!(mean_weight(4, &[1, 1, 0, 0]), q(6, 120));
        assert_eq!(mean_weight(3, &[1, 1, 1, 0]), q(2, 120));
        assert_eq!(mean_weight(2, &[2, 0, 0, 0]), q(1, 3));
    }

    #[test]
    fn elevation_preserves_values() {
        let p: Poly<Rational> = Poly::lambda(3, 1).mul(&Poly::lambda(3, 2));
        let e = p.elevate(2);
        let pt = [q(1, 5), q(3, 10), q(1, 2)];
        assert_eq!(p.eval(&pt), e.eval(&pt));
    }
}
