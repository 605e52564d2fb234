//! Exact coefficient arithmetic: Gaussian rationals and Laurent polynomials
//! in the formal parameter `hbar`.
//!
//! No floating point appears anywhere in this crate; every coefficient is a
//! `GaussRat` (a + b·i with arbitrary-precision rational a, b), optionally
//! weighted by an integer power of `hbar`.

use num::{BigInt, BigRational, One, Signed, Zero};
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

/// A Gaussian rational `re + im·i` with gcd-reduced, positive-denominator parts.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default)]
pub struct GaussRat {
    pub re: BigRational,
    pub im: BigRational,
}

pub fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

impl GaussRat {
    pub fn new(re: BigRational, im: BigRational) -> Self {
        GaussRat { re, im }
    }

    pub fn from_int(n: i64) -> Self {
        GaussRat { re: rat(n, 1), im: BigRational::zero() }
    }

    pub fn from_ratio(n: i64, d: i64) -> Self {
        GaussRat { re: rat(n, d), im: BigRational::zero() }
    }

    pub fn from_rational(q: BigRational) -> Self {
        GaussRat { re: q, im: BigRational::zero() }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::from_int(1)
    }

    /// The imaginary unit.
    pub fn i() -> Self {
        GaussRat { re: BigRational::zero(), im: BigRational::one() }
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.re.is_one() && self.im.is_zero()
    }

    /// Multiply by `i^k`.
    pub fn mul_i_pow(&self, k: u32) -> Self {
        match k % 4 {
            0 => self.clone(),
            1 => GaussRat { re: -self.im.clone(), im: self.re.clone() },
            2 => -self.clone(),
            _ => GaussRat { re: self.im.clone(), im: -self.re.clone() },
        }
    }

    pub fn mul_rat(&self, q: &BigRational) -> Self {
        GaussRat { re: &self.re * q, im: &self.im * q }
    }

    pub fn pow(&self, mut k: u32) -> Self {
        let mut base = self.clone();
        let mut acc = Self::one();
        while k > 0 {
            if k & 1 == 1 {
                acc = &acc * &base;
            }
            base = &base * &base;
            k >>= 1;
        }
        acc
    }

    /// Multiplicative inverse; panics on zero.
    pub fn recip(&self) -> Self {
        let n = &self.re * &self.re + &self.im * &self.im;
        assert!(!n.is_zero(), "division by zero GaussRat");
        GaussRat { re: &self.re / &n, im: -(&self.im / &n) }
    }

    /// Sign used by the canonical printer: negative iff the real part is
    /// negative, or the real part is zero and the imaginary part is negative.
    pub fn print_negative(&self) -> bool {
        if !self.re.is_zero() {
            self.re.is_negative()
        } else {
            self.im.is_negative()
        }
    }
}

impl Add for &GaussRat {
    type Output = GaussRat;
    fn add(self, rhs: &GaussRat) -> GaussRat {
        GaussRat { re: &self.re + &rhs.re, im: &self.im + &rhs.im }
    }
}

impl Sub for &GaussRat {
    type Output = GaussRat;
    fn sub(self, rhs: &GaussRat) -> GaussRat {
        GaussRat { re: &self.re - &rhs.re, im: &self.im - &rhs.im }
    }
}

impl Mul for &GaussRat {
    type Output = GaussRat;
    fn mul(self, rhs: &GaussRat) -> GaussRat {
        GaussRat {
            re: &self.re * &rhs.re - &self.im * &rhs.im,
            im: &self.re * &rhs.im + &self.im * &rhs.re,
        }
    }
}

impl Neg for GaussRat {
    type Output = GaussRat;
    fn neg(self) -> GaussRat {
        GaussRat { re: -self.re, im: -self.im }
    }
}

impl Neg for &GaussRat {
    type Output = GaussRat;
    fn neg(self) -> GaussRat {
        GaussRat { re: -self.re.clone(), im: -self.im.clone() }
    }
}

fn fmt_rat(q: &BigRational) -> String {
    if q.denom().is_one() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

impl fmt::Display for GaussRat {
    /// Magnitude form used inside products: `3`, `3/2`, `i`, `2*i`,
    /// `(1/2)*i`, `(1 + 2*i)`. Signs are the caller's problem.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        if self.im.is_zero() {
            return write!(f, "{}", fmt_rat(&self.re));
        }
        if self.re.is_zero() {
            if self.im.is_one() {
                return write!(f, "i");
            }
            if (-&self.im).is_one() {
                return write!(f, "-i");
            }
            if self.im.denom().is_one() {
                return write!(f, "{}*i", self.im.numer());
            }
            return write!(f, "({})*i", fmt_rat(&self.im));
        }
        let im_mag = self.im.abs();
        let im_str = if im_mag.is_one() { "i".to_string() } else { format!("{}*i", fmt_rat(&im_mag)) };
        let sign = if self.im.is_negative() { "-" } else { "+" };
        write!(f, "({} {} {})", fmt_rat(&self.re), sign, im_str)
    }
}

/// A Laurent polynomial in `hbar` over the Gaussian rationals.
///
/// This is the coefficient ring for graded expressions: operator chains
/// produce weights such as `i*hbar` or `(i/hbar)^2` and the verifications
/// must track them exactly.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default)]
pub struct Scalar {
    terms: BTreeMap<i32, GaussRat>,
}

impl Scalar {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::from_gauss(GaussRat::one())
    }

    pub fn from_gauss(g: GaussRat) -> Self {
        let mut terms = BTreeMap::new();
        if !g.is_zero() {
            terms.insert(0, g);
        }
        Scalar { terms }
    }

    pub fn from_int(n: i64) -> Self {
        Self::from_gauss(GaussRat::from_int(n))
    }

    pub fn from_ratio(n: i64, d: i64) -> Self {
        Self::from_gauss(GaussRat::from_ratio(n, d))
    }

    pub fn i() -> Self {
        Self::from_gauss(GaussRat::i())
    }

    /// `g * hbar^k`.
    pub fn gauss_hbar(g: GaussRat, k: i32) -> Self {
        let mut terms = BTreeMap::new();
        if !g.is_zero() {
            terms.insert(k, g);
        }
        Scalar { terms }
    }

    pub fn hbar(k: i32) -> Self {
        Self::gauss_hbar(GaussRat::one(), k)
    }

    /// `i*hbar`.
    pub fn i_hbar() -> Self {
        Self::gauss_hbar(GaussRat::i(), 1)
    }

    /// `i/hbar`.
    pub fn i_over_hbar() -> Self {
        Self::gauss_hbar(GaussRat::i(), -1)
    }

    /// The deformation parameter `epsilon = i*hbar/2`.
    pub fn epsilon() -> Self {
        Self::gauss_hbar(GaussRat { re: BigRational::zero(), im: rat(1, 2) }, 1)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn neg(&self) -> Self {
        Scalar { terms: self.terms.iter().map(|(k, g)| (*k, -g)).collect() }
    }

    pub fn add(&self, rhs: &Scalar) -> Self {
        let mut terms = self.terms.clone();
        for (k, g) in &rhs.terms {
            let e = terms.entry(*k).or_insert_with(GaussRat::zero);
            *e = &*e + g;
            if e.is_zero() {
                terms.remove(k);
            }
        }
        Scalar { terms }
    }

    pub fn sub(&self, rhs: &Scalar) -> Self {
        self.add(&rhs.neg())
    }

    pub fn mul(&self, rhs: &Scalar) -> Self {
        let mut terms: BTreeMap<i32, GaussRat> = BTreeMap::new();
        for (ka, ga) in &self.terms {
            for (kb, gb) in &rhs.terms {
                let k = ka + kb;
                let e = terms.entry(k).or_insert_with(GaussRat::zero);
                *e = &*e + &(ga * gb);
                if e.is_zero() {
                    terms.remove(&k);
                }
            }
        }
        Scalar { terms }
    }

    pub fn mul_gauss(&self, g: &GaussRat) -> Self {
        if g.is_zero() {
            return Self::zero();
        }
        Scalar { terms: self.terms.iter().map(|(k, a)| (*k, a * g)).collect() }
    }

    pub fn mul_rat(&self, q: &BigRational) -> Self {
        if q.is_zero() {
            return Self::zero();
        }
        Scalar { terms: self.terms.iter().map(|(k, a)| (*k, a.mul_rat(q))).collect() }
    }

    pub fn pow(&self, mut k: u32) -> Self {
        let mut base = self.clone();
        let mut acc = Self::one();
        while k > 0 {
            if k & 1 == 1 {
                acc = acc.mul(&base);
            }
            base = base.mul(&base);
            k >>= 1;
        }
        acc
    }

    /// Drop all parts with hbar-degree above `max`.
    pub fn truncate_hbar(&self, max: i32) -> Self {
        Scalar { terms: self.terms.iter().filter(|(k, _)| **k <= max).map(|(k, g)| (*k, g.clone())).collect() }
    }

    /// The coefficient of `hbar^k`.
    pub fn coeff_of(&self, k: i32) -> GaussRat {
        self.terms.get(&k).cloned().unwrap_or_default()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&i32, &GaussRat)> {
        self.terms.iter()
    }

    /// True when the scalar is a single `hbar^0` part.
    pub fn as_gauss(&self) -> Option<GaussRat> {
        match self.terms.len() {
            0 => Some(GaussRat::zero()),
            1 => self.terms.get(&0).cloned(),
            _ => None,
        }
    }

    /// The exact ratio `self / other` when the two scalars are proportional
    /// by a single Gaussian rational; `None` otherwise or when `other` is
    /// zero.
    pub fn ratio_to(&self, other: &Scalar) -> Option<GaussRat> {
        if other.is_zero() {
            return None;
        }
        if self.is_zero() {
            return Some(GaussRat::zero());
        }
        if self.terms.len() != other.terms.len() {
            return None;
        }
        let (k0, b0) = other.terms.iter().next().unwrap();
        let a0 = self.terms.get(k0)?;
        let r = a0 * &b0.recip();
        for (k, b) in &other.terms {
            let a = self.terms.get(k)?;
            if *a != &r * b {
                return None;
            }
        }
        Some(r)
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, g) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            match k {
                0 => write!(f, "{g}")?,
                1 => write!(f, "{g}*hbar")?,
                _ => write!(f, "{g}*hbar^{k}")?,
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_arith() {
        let i = GaussRat::i();
        assert_eq!(&i * &i, GaussRat::from_int(-1));
        assert_eq!(i.mul_i_pow(3), GaussRat::one());
        let z = GaussRat::new(rat(1, 2), rat(-3, 4));
        assert_eq!(&z * &z.recip(), GaussRat::one());
    }

    #[test]
    fn scalar_laurent() {
        let e = Scalar::epsilon();
        // epsilon^2 = -hbar^2/4
        let e2 = e.mul(&e);
        assert_eq!(e2, Scalar::gauss_hbar(GaussRat::from_ratio(-1, 4), 2));
        // (i/hbar) * (hbar/i) = 1
        let a = Scalar::i_over_hbar();
        let b = Scalar::gauss_hbar(GaussRat::i().mul_i_pow(2), 1); // -i*hbar
        assert_eq!(a.mul(&b), Scalar::one());
        assert!(a.mul(&a).add(&Scalar::hbar(-2)).is_zero());
    }

    #[test]
    fn display_forms() {
        assert_eq!(Scalar::epsilon().to_string(), "(1/2)*i*hbar");
        assert_eq!(Scalar::from_ratio(-3, 2).to_string(), "-3/2");
        assert_eq!(Scalar::i_over_hbar().to_string(), "i*hbar^-1");
    }
}
