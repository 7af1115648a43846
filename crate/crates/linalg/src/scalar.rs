use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::LinalgError;
use crate::matrix::Matrix;

/// Exact rational number, always in lowest terms with a positive denominator.
pub type Rational = BigRational;

/// A field element usable by every algorithm in this crate.
///
/// Implemented by [`Rational`] (exact) and by [`crate::Fp`] (integers modulo a
/// large prime). Elimination routines are generic over this trait; the
/// rational field overrides the reduction routines with fraction-free ones.
pub trait Scalar: Clone + PartialEq + fmt::Debug + fmt::Display + Send + Sync + 'static {
    fn zero() -> Self;
    fn one() -> Self;
    fn is_zero(&self) -> bool;
    fn from_i64(v: i64) -> Self;
    /// Image of a rational number. Fails when the denominator vanishes in
    /// the field, which callers treat as a request to switch primes.
    fn from_rational(q: &Rational) -> Result<Self, LinalgError>;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn neg(&self) -> Self;
    fn inv(&self) -> Option<Self>;
    /// Short human-readable name of the field, e.g. `QQ` or `GF(p)`.
    fn field_name() -> String;

    fn is_one(&self) -> bool {
        *self == Self::one()
    }

    /// `self -= a * b`
    #[inline]
    fn sub_mul_assign(&mut self, a: &Self, b: &Self) {
        *self = self.sub(&a.mul(b));
    }

    /// `self += a * b`
    #[inline]
    fn add_mul_assign(&mut self, a: &Self, b: &Self) {
        *self = self.add(&a.mul(b));
    }

    #[inline]
    fn add_assign(&mut self, o: &Self) {
        *self = self.add(o);
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        let d = Self::from_i64(den).inv().expect("zero denominator");
        Self::from_i64(num).mul(&d)
    }

    /// Reduced row echelon form in place; returns the pivot columns.
    fn rref(m: &mut Matrix<Self>) -> Vec<usize> {
        crate::elim::gauss_jordan(m, true)
    }

    /// Row echelon form in place (rows below pivots cleared only); returns
    /// the pivot columns.
    fn echelon(m: &mut Matrix<Self>) -> Vec<usize> {
        crate::elim::gauss_jordan(m, false)
    }
}

impl Scalar for Rational {
    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        One::one()
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn from_i64(v: i64) -> Self {
        BigRational::from_integer(BigInt::from(v))
    }
    fn from_rational(q: &Rational) -> Result<Self, LinalgError> {
        Ok(q.clone())
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn neg(&self) -> Self {
        -self
    }
    fn inv(&self) -> Option<Self> {
        if Zero::is_zero(self) {
            None
        } else {
            Some(self.recip())
        }
    }
    fn field_name() -> String {
        "QQ".to_string()
    }
    fn sub_mul_assign(&mut self, a: &Self, b: &Self) {
        if !Zero::is_zero(a) && !Zero::is_zero(b) {
            *self -= a * b;
        }
    }
    fn add_mul_assign(&mut self, a: &Self, b: &Self) {
        if !Zero::is_zero(a) && !Zero::is_zero(b) {
            *self += a * b;
        }
    }
    fn add_assign(&mut self, o: &Self) {
        *self += o;
    }
    fn rref(m: &mut Matrix<Self>) -> Vec<usize> {
        crate::elim::fraction_free_rref(m, true)
    }
    fn echelon(m: &mut Matrix<Self>) -> Vec<usize> {
        crate::elim::fraction_free_rref(m, false)
    }
}

/// Parse a rational from `"a"`, `"-a/b"` or a plain decimal such as `"0.25"`.
pub fn parse_rational(s: &str) -> Result<Rational, LinalgError> {
    let t = s.trim();
    let bad = || LinalgError::Parse(t.to_string());
    if let Some((n, d)) = t.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| bad())?;
        let d: BigInt = d.trim().parse().map_err(|_| bad())?;
        if Zero::is_zero(&d) {
            return Err(bad());
        }
        return Ok(BigRational::new(n, d));
    }
    if let Some((ip, fp)) = t.split_once('.') {
        let neg = ip.trim_start().starts_with('-');
        let digits = format!("{}{}", ip.trim_start_matches(['-', '+']), fp);
        let n: BigInt = digits.parse().map_err(|_| bad())?;
        let d = num_traits::pow(BigInt::from(10), fp.len());
        let q = BigRational::new(n, d);
        return Ok(if neg { -q } else { q });
    }
    let n: BigInt = t.parse().map_err(|_| bad())?;
    Ok(BigRational::from_integer(n))
}

/// Convenience constructor for small rationals.
pub fn q(num: i64, den: i64) -> Rational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Compact string form used in reports: `a` or `a/b`.
pub fn rational_to_string(x: &Rational) -> String {
    if x.denom().is_one() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

/// Sign of a rational as -1, 0 or 1.
pub fn rational_sign(x: &Rational) -> i32 {
    if Zero::is_zero(x) {
        0
    } else if x.is_positive() {
        1
    } else {
        -1
    }
}

/// Lossy conversion used only by floating-point test oracles.
pub fn rational_to_f64(x: &Rational) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}
