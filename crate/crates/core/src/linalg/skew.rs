//! Real canonical form of skew-symmetric matrices and orthogonal functions of them.
//!
//! `S = Q J Q^T` with `Q` orthogonal and `J` block diagonal: a zero block
//! followed by 2x2 blocks `[[0, theta], [-theta, 0]]`, `theta > 0` ascending.
//!
//! The invariant planes are read off the symmetric matrix `S^T S`, whose
//! eigenvalues are the `theta^2` (each twice). Each plane is fixed by one
//! eigenvector `u` and its partner `v = S u / theta`, so the block structure
//! holds by construction rather than by convergence of off-diagonal entries.

use rug::Float;

use super::eigen::jacobi_eigen_sym;
use super::matrix::{dot, norm, BigMatrix};
use super::scalar::{BigReal, Precision};
use crate::error::{Error, Result};

/// Residual norm below which a candidate direction is considered already spanned.
const SPAN_THRESHOLD: f64 = 0.5;

#[derive(Clone, Debug)]
pub struct SkewCanonical {
    /// Columns: zero-mode vectors, then `(v_k, u_k)` per plane.
    pub q: BigMatrix,
    /// Rotation angles, ascending.
    pub angles: Vec<BigReal>,
    pub zero_dim: usize,
}

impl SkewCanonical {
    pub fn precision(&self) -> Precision {
        self.q.precision()
    }

    pub fn dim(&self) -> usize {
        self.q.rows()
    }

    /// The block-diagonal `J` with `S = Q J Q^T`.
    pub fn block_form(&self) -> BigMatrix {
        let p = self.precision();
        let mut j = BigMatrix::zeros(self.dim(), self.dim(), p);
        for (k, theta) in self.angles.iter().enumerate() {
            let a = self.zero_dim + 2 * k;
            j.set(a, a + 1, theta.value());
            j.set(a + 1, a, &(-theta.value().clone()));
        }
        j
    }

    pub fn reconstruct(&self) -> BigMatrix {
        self.q.matmul(&self.block_form()).matmul(&self.q.transpose())
    }

    /// `Q D Q^T` where `D` is the identity on the zero block and the rotation
    /// `[[cos g, sin g], [-sin g, cos g]]` with `g = g(theta)` on each plane.
    /// `g(theta) = t * theta` gives `exp(t S)`.
    pub fn orthogonal_function(&self, g: impl Fn(&Float) -> Float) -> BigMatrix {
        let p = self.precision();
        let bits = p.bits();
        let n = self.dim();
        let mut qd = self.q.clone();
        for (k, theta) in self.angles.iter().enumerate() {
            let a = self.zero_dim + 2 * k;
            let angle = Float::with_val(bits, g(theta.value()));
            let (s, c) = angle.sin_cos(Float::new(bits));
            for r in 0..n {
                let v = self.q.get(r, a);
                let u = self.q.get(r, a + 1);
                let mut first = Float::with_val(bits, v * &c);
                first -= Float::with_val(bits, u * &s);
                let mut second = Float::with_val(bits, v * &s);
                second += Float::with_val(bits, u * &c);
                qd.set(r, a, &first);
                qd.set(r, a + 1, &second);
            }
        }
        qd.matmul(&self.q.transpose())
    }

    /// `exp(t S)`.
    pub fn exp(&self, t: &Float) -> BigMatrix {
        self.orthogonal_function(|theta| Float::with_val(theta.prec(), theta * t))
    }
}

/// Angles at or below `10^(-0.75 p) * ||S||_max * sqrt(n)` count as zero modes.
pub fn zero_tolerance(s: &BigMatrix) -> Float {
    let p = s.precision();
    let mut tol = p.pow10(-0.75 * p.decimal_digits() as f64) * s.max_norm();
    tol *= Float::with_val(p.bits(), s.rows()).sqrt();
    tol
}

pub fn skew_canonical_form(s: &BigMatrix) -> Result<SkewCanonical> {
    s.require_square("skew_canonical_form input")?;
    if !s.is_skew() {
        return Err(Error::InvalidInput(format!(
            "matrix is not skew-symmetric (defect {:e})",
            s.skewness_defect().to_f64()
        )));
    }
    let p = s.precision();
    let bits = p.bits();
    let n = s.rows();
    let (_, s) = s.split_sym_skew();

    let sts = s.transpose().matmul(&s);
    let eig = jacobi_eigen_sym(&sts, None)?;
    let zero_tol = zero_tolerance(&s);

    let mut chosen: Vec<Vec<Float>> = Vec::with_capacity(n);
    let mut zeros: Vec<Vec<Float>> = Vec::new();
    let mut planes: Vec<(Float, Vec<Float>, Vec<Float>)> = Vec::new();

    for k in (0..n).rev() {
        let mut w = eig.vectors.column(k);
        orthogonalize(&mut w, &chosen, bits);
        let r = norm(&w, bits);
        if r < SPAN_THRESHOLD {
            continue;
        }
        for x in &mut w {
            *x /= &r;
        }
        let su = s.mul_vec(&w);
        let theta = norm(&su, bits);
        if theta <= zero_tol {
            chosen.push(w.clone());
            zeros.push(w);
            continue;
        }
        let mut v = su;
        orthogonalize(&mut v, &chosen, bits);
        let rv = norm(&v, bits);
        for x in &mut v {
            *x /= &rv;
        }
        chosen.push(w.clone());
        chosen.push(v.clone());
        planes.push((theta, v, w));
    }

    if chosen.len() != n {
        return Err(Error::NonConvergence {
            routine: "skew_canonical_form",
            sweeps: 0,
            residual: (n as f64 - chosen.len() as f64).abs(),
        });
    }

    // Eigenvalues were visited in descending order.
    planes.reverse();
    let zero_dim = zeros.len();
    let mut cols: Vec<Vec<Float>> = zeros;
    let mut angles = Vec::with_capacity(planes.len());
    for (theta, v, u) in planes {
        angles.push(BigReal::new(theta, p));
        cols.push(v);
        cols.push(u);
    }
    let q = BigMatrix::from_fn(n, n, p, |r, c| cols[c][r].clone());
    Ok(SkewCanonical { q, angles, zero_dim })
}

/// Two passes of classical Gram-Schmidt against an orthonormal set.
fn orthogonalize(w: &mut [Float], basis: &[Vec<Float>], bits: u32) {
    for _ in 0..2 {
        for b in basis {
            let c = dot(w, b, bits);
            for (x, y) in w.iter_mut().zip(b) {
                *x -= Float::with_val(bits, y * &c);
            }
        }
    }
}
