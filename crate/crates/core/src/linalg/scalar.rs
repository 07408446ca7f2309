use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use rug::float::Round;
use rug::ops::Pow;
use rug::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const LOG2_10: f64 = std::f64::consts::LOG2_10;

/// Working precision expressed in decimal digits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Precision(u32);

impl Precision {
    pub fn digits(digits: u32) -> Self {
        assert!(digits > 0, "precision must be at least one digit");
        Precision(digits)
    }

    pub fn decimal_digits(self) -> u32 {
        self.0
    }

    /// Mantissa bits backing `digits` decimal digits.
    pub fn bits(self) -> u32 {
        (self.0 as f64 * LOG2_10).ceil() as u32
    }

    /// Smallest precision whose bit count is at least `bits`.
    pub fn from_bits(bits: u32) -> Self {
        Precision(((bits as f64) / LOG2_10).floor().max(1.0) as u32)
    }

    pub fn scaled(self, factor: f64) -> Self {
        Precision((self.0 as f64 * factor).ceil() as u32)
    }

    pub fn zero(self) -> Float {
        Float::new(self.bits())
    }

    pub fn one(self) -> Float {
        Float::with_val(self.bits(), 1)
    }

    pub fn float(self, x: f64) -> Float {
        Float::with_val(self.bits(), x)
    }

    /// `10^e` at this precision.
    pub fn pow10(self, e: f64) -> Float {
        let mut x = Float::with_val(self.bits(), e);
        x.exp10_mut();
        x
    }

    /// Unit roundoff bound `10^(1-p)`.
    pub fn epsilon(self) -> Float {
        self.pow10(1.0 - self.0 as f64)
    }

    pub fn pi(self) -> Float {
        Float::with_val(self.bits(), rug::float::Constant::Pi)
    }

    pub fn parse(self, s: &str) -> Result<Float> {
        let parsed = Float::parse(s.trim())
            .map_err(|e| Error::InvalidInput(format!("not a decimal number {s:?}: {e}")))?;
        Ok(Float::with_val(self.bits(), parsed))
    }
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} digits", self.0)
    }
}

/// Decimal string that parses back to the identical value at the same precision.
pub fn to_decimal(x: &Float) -> String {
    x.to_string_radix_round(10, None, Round::Nearest)
}

/// An arbitrary-precision real with its declared working precision.
///
/// Binary operations produce a result at the smaller of the two operand
/// precisions.
#[derive(Clone, Debug)]
pub struct BigReal {
    value: Float,
    precision: Precision,
}

impl BigReal {
    pub fn new(value: Float, precision: Precision) -> Self {
        let value = if value.prec() == precision.bits() {
            value
        } else {
            Float::with_val(precision.bits(), value)
        };
        BigReal { value, precision }
    }

    pub fn from_f64(x: f64, precision: Precision) -> Self {
        BigReal::new(precision.float(x), precision)
    }

    pub fn parse(s: &str, precision: Precision) -> Result<Self> {
        Ok(BigReal::new(precision.parse(s)?, precision))
    }

    pub fn zero(precision: Precision) -> Self {
        BigReal::new(precision.zero(), precision)
    }

    pub fn value(&self) -> &Float {
        &self.value
    }

    pub fn into_value(self) -> Float {
        self.value
    }

    pub fn precision(&self) -> Precision {
        self.precision
    }

    pub fn to_f64(&self) -> f64 {
        self.value.to_f64()
    }

    pub fn to_decimal(&self) -> String {
        to_decimal(&self.value)
    }

    pub fn abs(&self) -> Self {
        BigReal::new(self.value.clone().abs(), self.precision)
    }

    pub fn sqrt(&self) -> Self {
        BigReal::new(self.value.clone().sqrt(), self.precision)
    }

    pub fn exp(&self) -> Self {
        BigReal::new(self.value.clone().exp(), self.precision)
    }

    pub fn ln(&self) -> Self {
        BigReal::new(self.value.clone().ln(), self.precision)
    }

    pub fn powi(&self, n: i32) -> Self {
        BigReal::new(self.value.clone().pow(n), self.precision)
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
    }
}

impl PartialEq for BigReal {
    fn eq(&self, other: &Self) -> bool {
        self.value == other.value
    }
}

impl PartialOrd for BigReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.value.partial_cmp(&other.value)
    }
}

impl fmt::Display for BigReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_decimal())
    }
}

macro_rules! binop {
    ($trait:ident, $method:ident) => {
        impl $trait<&BigReal> for &BigReal {
            type Output = BigReal;
            fn $method(self, rhs: &BigReal) -> BigReal {
                let precision = self.precision.min(rhs.precision);
                BigReal {
                    value: Float::with_val(precision.bits(), (&self.value).$method(&rhs.value)),
                    precision,
                }
            }
        }

        impl $trait<BigReal> for BigReal {
            type Output = BigReal;
            fn $method(self, rhs: BigReal) -> BigReal {
                (&self).$method(&rhs)
            }
        }
    };
}

binop!(Add, add);
binop!(Sub, sub);
binop!(Mul, mul);
binop!(Div, div);

impl Neg for BigReal {
    type Output = BigReal;
    fn neg(self) -> BigReal {
        BigReal {
            value: -self.value,
            precision: self.precision,
        }
    }
}

impl Neg for &BigReal {
    type Output = BigReal;
    fn neg(self) -> BigReal {
        -self.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precision_takes_the_minimum() {
        let a = BigReal::from_f64(1.0, Precision::digits(50));
        let b = BigReal::from_f64(3.0, Precision::digits(20));
        let c = &a / &b;
        assert_eq!(c.precision(), Precision::digits(20));
        assert_eq!(c.value().prec(), Precision::digits(20).bits());
    }

    #[test]
    fn relative_error_within_bound() {
        for digits in [16u32, 40, 100, 300] {
            let p = Precision::digits(digits);
            let one = BigReal::from_f64(1.0, p);
            let three = BigReal::from_f64(3.0, p);
            let third = &one / &three;
            // Reference at doubled precision.
            let q = Precision::digits(2 * digits);
            let exact = Float::with_val(q.bits(), 1) / 3u32;
            let err = Float::with_val(q.bits(), third.value() - &exact).abs() / &exact;
            assert!(err <= p.epsilon(), "digits {digits}: rel err {}", err.to_f64());
        }
    }

    #[test]
    fn decimal_round_trip_is_exact() {
        let p = Precision::digits(77);
        let x = BigReal::new(p.pi() / 7u32, p);
        let back = BigReal::parse(&x.to_decimal(), p).unwrap();
        assert_eq!(x, back);
    }

    #[test]
    fn bits_cover_digits() {
        let p = Precision::digits(96);
        assert_eq!(p.bits(), 319);
        assert!(Precision::from_bits(p.bits()) >= p);
    }
}
