//! Spectral functions of symmetric matrices.

use rug::Float;

use super::eigen::{jacobi_eigen_sym, SymmetricEigen};
use super::matrix::BigMatrix;
use super::scalar::{BigReal, Precision};
use crate::error::{Error, Result};

/// Default margin floor `10^(-0.8 p)`.
///
/// Resolved grids put eigenvalues of `B` within `10^(-0.6 p)` of `+-1` while
/// the eigensolver still resolves them to about `10^(-0.9 p)`, so a floor at
/// half precision would reject every run at the prescribed digits.
pub fn default_margin_floor(p: Precision) -> Float {
    p.pow10(-0.8 * p.decimal_digits() as f64)
}

/// `artanh x = (ln(1 + x) - ln(1 - x)) / 2`.
pub fn artanh_scalar(x: &Float) -> Float {
    let bits = x.prec();
    let mut plus = Float::with_val(bits, 1u32 + x);
    plus.ln_mut();
    let mut minus = Float::with_val(bits, 1u32 - x);
    minus.ln_mut();
    plus -= &minus;
    plus /= 2u32;
    plus
}

/// `min_k (1 - |lambda_k|)`.
pub fn spectral_margin(eig: &SymmetricEigen) -> BigReal {
    let p = eig.precision();
    let mut margin = p.one();
    for v in &eig.values {
        let m = Float::with_val(p.bits(), 1u32 - v.value().clone().abs());
        if m < margin {
            margin = m;
        }
    }
    BigReal::new(margin, p)
}

#[derive(Clone, Debug)]
pub struct Artanh {
    pub matrix: BigMatrix,
    pub margin: BigReal,
    pub eigen: SymmetricEigen,
}

/// `Q diag(artanh lambda) Q^T`. Eigenvalues closer than `margin_floor` to
/// `+-1` are an error; they are never clamped.
pub fn artanh_sym(m: &BigMatrix, margin_floor: &Float) -> Result<Artanh> {
    let eig = jacobi_eigen_sym(m, None)?;
    let margin = spectral_margin(&eig);
    if margin.value() <= margin_floor {
        let p = m.precision();
        return Err(Error::SpectrumOutOfRange {
            margin: margin.to_f64(),
            floor: margin_floor.to_f64(),
            digits: p.decimal_digits(),
            suggested: p.scaled(1.5).decimal_digits(),
        });
    }
    let matrix = eig.apply(artanh_scalar);
    Ok(Artanh {
        matrix,
        margin,
        eigen: eig,
    })
}

/// `Q diag(tanh lambda) Q^T`.
pub fn tanh_sym(m: &BigMatrix) -> Result<BigMatrix> {
    let eig = jacobi_eigen_sym(m, None)?;
    Ok(eig.apply(|x| x.clone().tanh()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_maps_to_zero() {
        let p = Precision::digits(30);
        let z = BigMatrix::zeros(3, 3, p);
        let r = artanh_sym(&z, &default_margin_floor(p)).unwrap();
        assert_eq!(r.matrix, z);
        assert_eq!(r.margin.to_f64(), 1.0);
    }

    #[test]
    fn diagonal_half() {
        let p = Precision::digits(40);
        let m = BigMatrix::from_f64(2, 2, &[0.5, 0.0, 0.0, -0.5], p);
        let r = artanh_sym(&m, &default_margin_floor(p)).unwrap();
        // artanh(1/2) = ln(3)/2
        let expected = Float::with_val(p.bits(), 3u32).ln() / 2u32;
        let d = Float::with_val(p.bits(), r.matrix.get(0, 0) - &expected);
        assert!(d.abs() < 1e-38);
        let d = Float::with_val(p.bits(), r.matrix.get(1, 1) + &expected);
        assert!(d.abs() < 1e-38);
        assert!(r.matrix.get(0, 1).is_zero());
    }

    #[test]
    fn eigenvalue_at_one_is_rejected() {
        let p = Precision::digits(60);
        for gap in [-80.0, -55.0] {
            let near_one = Float::with_val(p.bits(), 1u32) - p.pow10(gap);
            let m = BigMatrix::diagonal(&[near_one, p.float(0.2)], p);
            let err = artanh_sym(&m, &default_margin_floor(p)).unwrap_err();
            assert!(matches!(err, Error::SpectrumOutOfRange { digits: 60, suggested: 90, .. }));
        }
        // Above the floor the value is still resolved.
        let near_one = Float::with_val(p.bits(), 1u32) - p.pow10(-40.0);
        let m = BigMatrix::diagonal(&[near_one, p.float(0.2)], p);
        assert!(artanh_sym(&m, &default_margin_floor(p)).is_ok());
    }

    #[test]
    fn round_trip_with_tanh() {
        let p = Precision::digits(40);
        let m = BigMatrix::from_fn(5, 5, p, |i, j| p.float(0.3 * ((i + j) as f64).cos() / (1 + i.abs_diff(j)) as f64));
        let t = tanh_sym(&m).unwrap();
        let back = artanh_sym(&t, &default_margin_floor(p)).unwrap().matrix;
        assert!(back.max_abs_diff(&m).to_f64() < 1e-13);
    }
}
