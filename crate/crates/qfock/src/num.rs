//! Scalar tower shared by every module: exact complex rationals for oracle
//! work and `f64` complexes for series and spectral work.
//!
//! Conversion is one-way, exact to float. Nothing here ever converts a float
//! back into a rational.

use std::cmp::Ordering;
use std::fmt;
use std::ops::Neg;

use num_bigint::BigInt;
use num_complex::Complex;
use num_rational::BigRational;
use num_traits::{Num, One, Signed, ToPrimitive, Zero};

/// Exact rational number with arbitrary-precision numerator and denominator.
pub type Rat = BigRational;
/// Exact complex rational.
pub type CRat = Complex<Rat>;
/// Double-precision complex.
pub type C64 = Complex<f64>;

/// Real part of a scalar tower: `Rat` (exact) or `f64` (float).
pub trait RealScalar:
    Clone + PartialOrd + fmt::Debug + fmt::Display + Num + Neg<Output = Self> + 'static
{
    const EXACT: bool;

    fn from_u64(v: u64) -> Self;
    fn from_bigint(v: &BigInt) -> Self;
    /// Exact small rational `num/den`; for the float tower this is the
    /// nearest double.
    fn ratio(num: i64, den: u64) -> Self;
    fn to_f64(&self) -> f64;
    /// Always true for rationals; rejects NaN and infinities for doubles.
    fn is_finite(&self) -> bool;
}

impl RealScalar for Rat {
    const EXACT: bool = true;

    fn from_u64(v: u64) -> Self {
        Rat::from_integer(BigInt::from(v))
    }

    fn from_bigint(v: &BigInt) -> Self {
        Rat::from_integer(v.clone())
    }

    fn ratio(num: i64, den: u64) -> Self {
        Rat::new(BigInt::from(num), BigInt::from(den))
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn is_finite(&self) -> bool {
        true
    }
}

impl RealScalar for f64 {
    const EXACT: bool = false;

    fn from_u64(v: u64) -> Self {
        v as f64
    }

    fn from_bigint(v: &BigInt) -> Self {
        v.to_f64().unwrap_or(f64::NAN)
    }

    fn ratio(num: i64, den: u64) -> Self {
        num as f64 / den as f64
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn is_finite(&self) -> bool {
        f64::is_finite(*self)
    }
}

/// Complex scalar of either tower. All cell values, coefficients, and inner
/// products are `Scalar`s; the associated `Real` carries measures and norms.
pub trait Scalar: Clone + PartialEq + fmt::Debug + Num + Neg<Output = Self> + 'static {
    type Real: RealScalar;

    fn from_parts(re: Self::Real, im: Self::Real) -> Self;
    fn real(&self) -> Self::Real;
    fn imag(&self) -> Self::Real;
    fn conj(&self) -> Self;
    /// `|z|^2`, exact in the rational tower.
    fn abs_sq(&self) -> Self::Real;
    fn to_c64(&self) -> C64;

    fn from_real(re: Self::Real) -> Self {
        Self::from_parts(re, Self::Real::zero())
    }

    fn from_bigint(v: &BigInt) -> Self {
        Self::from_real(Self::Real::from_bigint(v))
    }

    fn mul_real(&self, r: &Self::Real) -> Self {
        self.clone() * Self::from_real(r.clone())
    }

    fn div_nat(&self, n: u64) -> Self {
        self.clone() / Self::from_real(Self::Real::from_u64(n))
    }

    /// Nonnegative integer power by repeated squaring.
    fn powu(&self, mut k: u32) -> Self {
        let mut base = self.clone();
        let mut acc = Self::one();
        while k > 0 {
            if k & 1 == 1 {
                acc = acc * base.clone();
            }
            k >>= 1;
            if k > 0 {
                base = base.clone() * base;
            }
        }
        acc
    }
}

impl Scalar for CRat {
    type Real = Rat;

    fn from_parts(re: Rat, im: Rat) -> Self {
        Complex::new(re, im)
    }

    fn real(&self) -> Rat {
        self.re.clone()
    }

    fn imag(&self) -> Rat {
        self.im.clone()
    }

    fn conj(&self) -> Self {
        Complex::new(self.re.clone(), -self.im.clone())
    }

    fn abs_sq(&self) -> Rat {
        &self.re * &self.re + &self.im * &self.im
    }

    fn to_c64(&self) -> C64 {
        Complex::new(RealScalar::to_f64(&self.re), RealScalar::to_f64(&self.im))
    }
}

impl Scalar for C64 {
    type Real = f64;

    fn from_parts(re: f64, im: f64) -> Self {
        Complex::new(re, im)
    }

    fn real(&self) -> f64 {
        self.re
    }

    fn imag(&self) -> f64 {
        self.im
    }

    fn conj(&self) -> Self {
        Complex::new(self.re, -self.im)
    }

    fn abs_sq(&self) -> f64 {
        self.re * self.re + self.im * self.im
    }

    fn to_c64(&self) -> C64 {
        *self
    }
}

/// Total order on exact complex rationals, lexicographic on (re, im).
/// Used for canonical sorting of commuting generator arguments.
pub fn cmp_crat(a: &CRat, b: &CRat) -> Ordering {
    a.re.cmp(&b.re).then_with(|| a.im.cmp(&b.im))
}

/// Parse an exact rational from `"p/q"` or an integer string.
/// Returns `None` for anything else (decimals are the float tower's job).
pub fn parse_rational(s: &str) -> Option<Rat> {
    let t = s.trim();
    if t.is_empty() {
        return None;
    }
    t.parse::<Rat>().ok().filter(|r| !r.denom().is_zero())
}

/// Render an exact rational canonically: `"p"` or `"p/q"` in lowest terms.
pub fn rational_string(r: &Rat) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// `true` if the rational is exactly representable and nonnegative.
pub fn rat_is_nonnegative(r: &Rat) -> bool {
    !r.is_negative()
}

/// Exact rational literal `num/den`. Panics on a zero denominator; meant
/// for fixed values in tests and examples.
pub fn rat(num: i64, den: i64) -> Rat {
    Rat::new(BigInt::from(num), BigInt::from(den))
}

/// Exact complex rational literal from `"p/q"` strings, e.g. `cr("1/4", "0")`.
/// Panics on malformed input; meant for fixed values in tests and examples.
pub fn cr(re: &str, im: &str) -> CRat {
    CRat::new(
        parse_rational(re).expect("rational literal"),
        parse_rational(im).expect("rational literal"),
    )
}
