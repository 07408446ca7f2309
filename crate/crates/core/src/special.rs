//! Exponential integral `E1(x) = Gamma(0, x)` for `x > 0`.

use rug::float::Constant;
use rug::{Assign, Float};

use crate::error::{Error, Result};

/// Series below this argument, continued fraction above.
pub const SERIES_LIMIT: f64 = 4.0;

const GUARD_BITS: u32 = 64;

/// `E1(x)` rounded to the precision of `x`.
pub fn e1(x: &Float) -> Result<Float> {
    if !(x.is_finite() && *x > 0) {
        return Err(Error::Domain(format!("E1 needs x > 0, got {}", x.to_f64())));
    }
    let bits = x.prec();
    let value = if *x <= SERIES_LIMIT {
        e1_series(x, bits + GUARD_BITS)
    } else {
        e1_continued_fraction(x, bits + GUARD_BITS)
    };
    Ok(Float::with_val(bits, value))
}

/// `-gamma - ln x - sum_{k>=1} (-x)^k / (k k!)`.
fn e1_series(x: &Float, bits: u32) -> Float {
    let x = Float::with_val(bits, x);
    let eps = Float::with_val(bits, Float::i_exp(1, -(bits as i32)));
    let mut term = Float::with_val(bits, -1i32); // (-x)^k / k! with k = 0
    let mut sum = Float::new(bits);
    let mut k = 1u32;
    loop {
        term *= &x;
        term /= k;
        term = -term;
        let contrib = Float::with_val(bits, &term / k);
        sum += &contrib;
        if contrib.abs() < eps {
            break;
        }
        k += 1;
    }
    // sum now holds sum (-1)^{k+1} x^k / (k k!) with the leading sign folded in.
    let mut out = Float::with_val(bits, Constant::Euler);
    out = -out;
    out -= Float::with_val(bits, x.ln_ref());
    out += sum;
    out
}

/// `E1(x) = e^{-x} / (x + 1 - 1/(x + 3 - 4/(x + 5 - ...)))` by modified Lentz.
fn e1_continued_fraction(x: &Float, bits: u32) -> Float {
    let x = Float::with_val(bits, x);
    let eps = Float::with_val(bits, Float::i_exp(1, -(bits as i32) + 4));
    let tiny = Float::with_val(bits, Float::i_exp(1, -(4 * bits as i32)));
    let mut b = Float::with_val(bits, &x + 1u32);
    let mut c = Float::with_val(bits, tiny.recip_ref());
    let mut d = Float::with_val(bits, b.recip_ref());
    let mut h = d.clone();
    let mut del = Float::new(bits);
    let mut i = 1u64;
    loop {
        let an = -Float::with_val(bits, i * i);
        b += 2u32;
        // d = 1 / (an d + b)
        d *= &an;
        d += &b;
        if d.is_zero() {
            d.assign(&tiny);
        }
        d.recip_mut();
        // c = b + an / c
        c.recip_mut();
        c *= &an;
        c += &b;
        if c.is_zero() {
            c.assign(&tiny);
        }
        del.assign(&c * &d);
        h *= &del;
        del -= 1u32;
        if Float::with_val(bits, del.abs_ref()) < eps {
            break;
        }
        i += 1;
    }
    h * Float::with_val(bits, -x).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Precision;

    /// MPFR's exponential integral: `eint(-x) = -E1(x)` for `x > 0`.
    fn mpfr_e1(x: &Float) -> Float {
        let neg = Float::with_val(x.prec() + 64, -x);
        -neg.eint()
    }

    #[test]
    fn known_value_at_one() {
        let p = Precision::digits(30);
        let v = e1(&p.float(1.0)).unwrap();
        assert!((v.to_f64() - 0.219_383_934_395_520_3).abs() < 1e-15);
    }

    #[test]
    fn matches_mpfr_across_the_split() {
        for digits in [20u32, 112, 448] {
            let p = Precision::digits(digits);
            for x in [1e-6, 0.01, 0.5, 3.999, 4.0, 4.001, 7.5, 24.0, 80.0] {
                let xf = p.float(x);
                let got = e1(&xf).unwrap();
                let want = mpfr_e1(&xf);
                let rel = Float::with_val(p.bits(), (got - &want) / &want).abs();
                assert!(rel < p.epsilon(), "digits {digits} x {x}: rel {}", rel.to_f64());
            }
        }
    }

    #[test]
    fn rejects_nonpositive() {
        let p = Precision::digits(20);
        assert!(e1(&p.float(0.0)).is_err());
        assert!(e1(&p.float(-1.0)).is_err());
    }
}
