//! Coefficient rings.
//!
//! Everything in the series machinery is written against [`Scalar`], a field
//! with a handful of by-reference helpers so that big rationals are not cloned
//! in inner convolution loops. Exact rationals drive the correctness-critical
//! recurrences; `f64` is the fast path for large truncation orders.

use std::fmt::{Debug, Display};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Signed, ToPrimitive, Zero};

pub trait Scalar:
    num_traits::Num + Signed + FromPrimitive + Clone + Debug + Display + PartialOrd + Send + Sync + 'static
{
    /// True for rings where equality is exact identity.
    const EXACT: bool;

    /// `self += a * b`
    fn mul_acc(&mut self, a: &Self, b: &Self);

    fn mul_ref(&self, rhs: &Self) -> Self;

    fn add_assign_ref(&mut self, rhs: &Self);

    fn sub_assign_ref(&mut self, rhs: &Self);

    fn to_f64(&self) -> f64;

    fn from_int(n: i64) -> Self {
        Self::from_i64(n).expect("integer fits every coefficient ring")
    }

    fn from_count(n: usize) -> Self {
        Self::from_int(n as i64)
    }

    /// The rational `num / den` in this ring.
    fn ratio(num: i64, den: i64) -> Self {
        Self::from_int(num) / Self::from_int(den)
    }

    fn from_bigint(n: &BigInt) -> Self;

    fn div_usize(&self, n: usize) -> Self {
        self.clone() / Self::from_count(n)
    }

    fn mul_usize(&self, n: usize) -> Self {
        self.mul_ref(&Self::from_count(n))
    }

    fn pow_usize(&self, mut e: usize) -> Self {
        let mut base = self.clone();
        let mut acc = Self::one();
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul_ref(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul_ref(&base);
            }
        }
        acc
    }
}

macro_rules! float_scalar {
    ($t:ty) => {
        impl Scalar for $t {
            const EXACT: bool = false;

            #[inline]
            fn mul_acc(&mut self, a: &Self, b: &Self) {
                *self += a * b;
            }

            #[inline]
            fn mul_ref(&self, rhs: &Self) -> Self {
                self * rhs
            }

            #[inline]
            fn add_assign_ref(&mut self, rhs: &Self) {
                *self += rhs;
            }

            #[inline]
            fn sub_assign_ref(&mut self, rhs: &Self) {
                *self -= rhs;
            }

            fn to_f64(&self) -> f64 {
                *self as f64
            }

            fn from_bigint(n: &BigInt) -> Self {
                n.to_f64().unwrap_or(f64::INFINITY) as $t
            }
        }
    };
}

float_scalar!(f32);
float_scalar!(f64);

impl Scalar for BigRational {
    const EXACT: bool = true;

    fn mul_acc(&mut self, a: &Self, b: &Self) {
        if a.is_zero() || b.is_zero() {
            return;
        }
        *self += a * b;
    }

    fn mul_ref(&self, rhs: &Self) -> Self {
        self * rhs
    }

    fn add_assign_ref(&mut self, rhs: &Self) {
        if !rhs.is_zero() {
            *self += rhs;
        }
    }

    fn sub_assign_ref(&mut self, rhs: &Self) {
        if !rhs.is_zero() {
            *self -= rhs;
        }
    }

    fn to_f64(&self) -> f64 {
        ratio_to_f64(self)
    }

    fn from_bigint(n: &BigInt) -> Self {
        BigRational::from_integer(n.clone())
    }

    fn div_usize(&self, n: usize) -> Self {
        self / BigInt::from(n)
    }

    fn mul_usize(&self, n: usize) -> Self {
        self * BigInt::from(n)
    }
}

/// Converts a big rational to the nearest double, without overflowing on
/// huge numerators and denominators that nearly cancel.
pub fn ratio_to_f64(r: &BigRational) -> f64 {
    if r.is_zero() {
        return 0.0;
    }
    let (n, d) = (r.numer(), r.denom());
    if let (Some(a), Some(b)) = (n.to_f64(), d.to_f64()) {
        if a.is_finite() && b.is_finite() && b != 0.0 {
            return a / b;
        }
    }
    let shift_n = n.bits().saturating_sub(60) as i64;
    let shift_d = d.bits().saturating_sub(60) as i64;
    let a = (n >> shift_n as usize).to_f64().unwrap_or(0.0);
    let b = (d >> shift_d as usize).to_f64().unwrap_or(1.0);
    a / b * 2f64.powi((shift_n - shift_d) as i32)
}
