use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, ToPrimitive};

use crate::error::LinalgError;
use crate::scalar::{Rational, Scalar};

/// Primes used by the modular fast path. All lie in (2^61, 2^62), so
/// Montgomery products fit in a `u128` without overflow.
pub const PRIMES: [u64; 4] = [
    4_611_686_018_427_387_847,
    4_611_686_018_427_387_817,
    4_611_686_018_427_387_787,
    4_611_686_018_427_387_761,
];

const fn neg_inv(p: u64) -> u64 {
    // Newton iteration for p^{-1} mod 2^64.
    let mut x: u64 = 1;
    let mut i = 0;
    while i < 7 {
        x = x.wrapping_mul(2u64.wrapping_sub(p.wrapping_mul(x)));
        i += 1;
    }
    x.wrapping_neg()
}

const fn r2(p: u64) -> u64 {
    // 2^128 mod p computed as (2^64 mod p)^2 mod p.
    let r = ((1u128 << 64) % (p as u128)) as u128;
    ((r * r) % (p as u128)) as u64
}

/// Element of GF(P) in Montgomery form.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Fp<const P: u64>(u64);

impl<const P: u64> Fp<P> {
    const NINV: u64 = neg_inv(P);
    const R2: u64 = r2(P);

    #[inline(always)]
    fn redc(t: u128) -> u64 {
        let m = (t as u64).wrapping_mul(Self::NINV);
        let u = ((t + (m as u128) * (P as u128)) >> 64) as u64;
        if u >= P {
            u - P
        } else {
            u
        }
    }

    /// Element with canonical residue `v mod P`.
    #[inline]
    pub fn new(v: u64) -> Self {
        Fp(Self::redc((v % P) as u128 * Self::R2 as u128))
    }

    /// Canonical residue in `0..P`.
    #[inline]
    pub fn value(self) -> u64 {
        Self::redc(self.0 as u128)
    }

    pub fn pow(self, mut e: u64) -> Self {
        let mut base = self;
        let mut acc = Self::new(1);
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            base = base.mul(&base);
            e >>= 1;
        }
        acc
    }

    fn from_bigint(n: &BigInt) -> Self {
        let r = n.mod_floor(&BigInt::from(P));
        Self::new(r.to_u64().expect("residue fits in u64"))
    }
}

impl<const P: u64> fmt::Debug for Fp<P> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value())
    }
}

impl<const P: u64> fmt::Display for Fp<P> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value())
    }
}

impl<const P: u64> Scalar for Fp<P> {
    #[inline]
    fn zero() -> Self {
        Fp(0)
    }
    #[inline]
    fn one() -> Self {
        Self::new(1)
    }
    #[inline]
    fn is_zero(&self) -> bool {
        self.0 == 0
    }
    fn from_i64(v: i64) -> Self {
        if v >= 0 {
            Self::new(v as u64)
        } else {
            Self::new(v.unsigned_abs()).neg()
        }
    }
    fn from_rational(q: &Rational) -> Result<Self, LinalgError> {
        let den = Self::from_bigint(q.denom());
        let inv = den.inv().ok_or(LinalgError::DenominatorVanishes { prime: P })?;
        let num = Self::from_bigint(&q.numer().abs());
        let v = num.mul(&inv);
        Ok(if q.numer().is_negative() { v.neg() } else { v })
    }
    #[inline(always)]
    fn add(&self, o: &Self) -> Self {
        let s = self.0 + o.0;
        Fp(if s >= P { s - P } else { s })
    }
    #[inline(always)]
    fn sub(&self, o: &Self) -> Self {
        Fp(if self.0 >= o.0 { self.0 - o.0 } else { self.0 + P - o.0 })
    }
    #[inline(always)]
    fn mul(&self, o: &Self) -> Self {
        Fp(Self::redc(self.0 as u128 * o.0 as u128))
    }
    #[inline(always)]
    fn neg(&self) -> Self {
        Fp(if self.0 == 0 { 0 } else { P - self.0 })
    }
    fn inv(&self) -> Option<Self> {
        if self.0 == 0 {
            None
        } else {
            Some(self.pow(P - 2))
        }
    }
    fn field_name() -> String {
        format!("GF({P})")
    }
    #[inline(always)]
    fn sub_mul_assign(&mut self, a: &Self, b: &Self) {
        *self = self.sub(&a.mul(b));
    }
    #[inline(always)]
    fn add_mul_assign(&mut self, a: &Self, b: &Self) {
        *self = self.add(&a.mul(b));
    }
    #[inline(always)]
    fn add_assign(&mut self, o: &Self) {
        *self = self.add(o);
    }
}

pub type Fp0 = Fp<{ PRIMES[0] }>;
pub type Fp1 = Fp<{ PRIMES[1] }>;
pub type Fp2 = Fp<{ PRIMES[2] }>;
pub type Fp3 = Fp<{ PRIMES[3] }>;
