use rayon::prelude::*;
use rug::ops::NegAssign;
use rug::{Assign, Float};

use super::scalar::{BigReal, Precision};
use crate::error::{Error, Result};

/// Dense row-major matrix of arbitrary-precision reals sharing one precision.
#[derive(Clone, Debug, PartialEq)]
pub struct BigMatrix {
    rows: usize,
    cols: usize,
    precision: Precision,
    data: Vec<Float>,
}

impl BigMatrix {
    pub fn zeros(rows: usize, cols: usize, precision: Precision) -> Self {
        BigMatrix {
            rows,
            cols,
            precision,
            data: vec![precision.zero(); rows * cols],
        }
    }

    pub fn identity(n: usize, precision: Precision) -> Self {
        let mut m = BigMatrix::zeros(n, n, precision);
        for i in 0..n {
            m.data[i * n + i] = precision.one();
        }
        m
    }

    pub fn from_fn(
        rows: usize,
        cols: usize,
        precision: Precision,
        mut f: impl FnMut(usize, usize) -> Float,
    ) -> Self {
        let bits = precision.bits();
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(Float::with_val(bits, f(i, j)));
            }
        }
        BigMatrix {
            rows,
            cols,
            precision,
            data,
        }
    }

    pub fn from_f64(rows: usize, cols: usize, values: &[f64], precision: Precision) -> Self {
        assert_eq!(values.len(), rows * cols);
        BigMatrix::from_fn(rows, cols, precision, |i, j| precision.float(values[i * cols + j]))
    }

    /// Builds a matrix from row-major values, rounding each to `precision`.
    pub fn from_vec(rows: usize, cols: usize, precision: Precision, data: Vec<Float>) -> Self {
        assert_eq!(data.len(), rows * cols);
        let bits = precision.bits();
        let data = data
            .into_iter()
            .map(|x| if x.prec() == bits { x } else { Float::with_val(bits, x) })
            .collect();
        BigMatrix {
            rows,
            cols,
            precision,
            data,
        }
    }

    pub fn diagonal(values: &[Float], precision: Precision) -> Self {
        let n = values.len();
        let mut m = BigMatrix::zeros(n, n, precision);
        for (i, v) in values.iter().enumerate() {
            m.data[i * n + i] = Float::with_val(precision.bits(), v);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn precision(&self) -> Precision {
        self.precision
    }

    pub fn data(&self) -> &[Float] {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize) -> &Float {
        &self.data[i * self.cols + j]
    }

    pub fn get_mut(&mut self, i: usize, j: usize) -> &mut Float {
        &mut self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: &Float) {
        self.data[i * self.cols + j].assign(value);
    }

    pub fn entry(&self, i: usize, j: usize) -> BigReal {
        BigReal::new(self.get(i, j).clone(), self.precision)
    }

    pub fn row(&self, i: usize) -> &[Float] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<Float> {
        (0..self.rows).map(|i| self.get(i, j).clone()).collect()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.data.iter().map(Float::to_f64).collect()
    }

    pub fn with_precision(&self, precision: Precision) -> Self {
        BigMatrix::from_vec(self.rows, self.cols, precision, self.data.clone())
    }

    pub fn transpose(&self) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                data.push(self.get(i, j).clone());
            }
        }
        BigMatrix {
            rows: self.cols,
            cols: self.rows,
            precision: self.precision,
            data,
        }
    }

    /// Matrix product. Rows are computed in parallel; each entry is an
    /// independent fused multiply-add chain in fixed order, so the result
    /// does not depend on the thread count.
    pub fn matmul(&self, rhs: &BigMatrix) -> Self {
        assert_eq!(self.cols, rhs.rows, "matmul dimension mismatch");
        let precision = self.precision.min(rhs.precision);
        let bits = precision.bits();
        let rt = rhs.transpose();
        let (n, k) = (rhs.cols, self.cols);
        let data: Vec<Float> = (0..self.rows)
            .into_par_iter()
            .flat_map_iter(|i| {
                let a = &self.data[i * k..(i + 1) * k];
                let rt = &rt;
                (0..n).map(move |j| {
                    let b = &rt.data[j * k..(j + 1) * k];
                    let mut acc = Float::new(bits);
                    for (x, y) in a.iter().zip(b) {
                        acc += x * y;
                    }
                    acc
                })
            })
            .collect();
        BigMatrix {
            rows: self.rows,
            cols: n,
            precision,
            data,
        }
    }

    pub fn mul_vec(&self, v: &[Float]) -> Vec<Float> {
        assert_eq!(self.cols, v.len());
        let bits = self.precision.bits();
        (0..self.rows)
            .map(|i| {
                let mut acc = Float::new(bits);
                for (x, y) in self.row(i).iter().zip(v) {
                    acc += x * y;
                }
                acc
            })
            .collect()
    }

    fn zip_with(&self, rhs: &BigMatrix, f: impl Fn(&Float, &Float) -> Float) -> Self {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "shape mismatch");
        let precision = self.precision.min(rhs.precision);
        let bits = precision.bits();
        let data = self
            .data
            .iter()
            .zip(&rhs.data)
            .map(|(a, b)| Float::with_val(bits, f(a, b)))
            .collect();
        BigMatrix {
            rows: self.rows,
            cols: self.cols,
            precision,
            data,
        }
    }

    pub fn add(&self, rhs: &BigMatrix) -> Self {
        self.zip_with(rhs, |a, b| Float::with_val(a.prec(), a + b))
    }

    pub fn sub(&self, rhs: &BigMatrix) -> Self {
        self.zip_with(rhs, |a, b| Float::with_val(a.prec(), a - b))
    }

    pub fn scale(&self, s: &Float) -> Self {
        let mut out = self.clone();
        for x in &mut out.data {
            *x *= s;
        }
        out
    }

    pub fn neg(&self) -> Self {
        let mut out = self.clone();
        for x in &mut out.data {
            x.neg_assign();
        }
        out
    }

    pub fn max_norm(&self) -> Float {
        let mut best = self.precision.zero();
        for x in &self.data {
            if x.clone().abs() > best {
                best = x.clone().abs();
            }
        }
        best
    }

    pub fn max_abs_diff(&self, rhs: &BigMatrix) -> Float {
        self.sub(rhs).max_norm()
    }

    /// Largest |a_ij - a_ji|.
    pub fn asymmetry(&self) -> Float {
        assert!(self.is_square());
        let mut best = self.precision.zero();
        for i in 0..self.rows {
            for j in i + 1..self.cols {
                let d = Float::with_val(self.precision.bits(), self.get(i, j) - self.get(j, i)).abs();
                if d > best {
                    best = d;
                }
            }
        }
        best
    }

    /// Largest |a_ij + a_ji| (including the diagonal).
    pub fn skewness_defect(&self) -> Float {
        assert!(self.is_square());
        let mut best = self.precision.zero();
        for i in 0..self.rows {
            for j in i..self.cols {
                let d = Float::with_val(self.precision.bits(), self.get(i, j) + self.get(j, i)).abs();
                if d > best {
                    best = d;
                }
            }
        }
        best
    }

    /// Default flag tolerance for symmetry checks: `10^(-p/2) * ||M||_max`.
    pub fn flag_tolerance(&self) -> Float {
        let p = self.precision;
        p.pow10(-(p.decimal_digits() as f64) / 2.0) * self.max_norm()
    }

    pub fn is_symmetric(&self) -> bool {
        self.is_square() && self.asymmetry() <= self.flag_tolerance()
    }

    pub fn is_skew(&self) -> bool {
        self.is_square() && self.skewness_defect() <= self.flag_tolerance()
    }

    pub fn require_square(&self, what: &str) -> Result<()> {
        if self.is_square() {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "{what} must be square, got {}x{}",
                self.rows, self.cols
            )))
        }
    }

    /// `(M + M^T) / 2` and `(M - M^T) / 2`. Each part has its symmetry exactly;
    /// their sum reproduces `M` to one rounding of the entry sums.
    pub fn split_sym_skew(&self) -> (BigMatrix, BigMatrix) {
        assert!(self.is_square());
        let n = self.rows;
        let bits = self.precision.bits();
        let mut sym = BigMatrix::zeros(n, n, self.precision);
        let mut skew = BigMatrix::zeros(n, n, self.precision);
        for i in 0..n {
            for j in 0..n {
                let a = self.get(i, j);
                let b = self.get(j, i);
                let mut s = Float::with_val(bits, a + b);
                s /= 2u32;
                let mut k = Float::with_val(bits, a - b);
                k /= 2u32;
                sym.data[i * n + j] = s;
                skew.data[i * n + j] = k;
            }
        }
        (sym, skew)
    }

    pub fn symmetrized(&self) -> BigMatrix {
        self.split_sym_skew().0
    }
}

pub(crate) fn dot(a: &[Float], b: &[Float], bits: u32) -> Float {
    let mut acc = Float::new(bits);
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

pub(crate) fn norm(a: &[Float], bits: u32) -> Float {
    dot(a, a, bits).sqrt()
}
