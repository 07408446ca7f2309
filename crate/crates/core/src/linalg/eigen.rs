//! Cyclic Jacobi eigensolver for dense symmetric matrices.
//!
//! Jacobi is slower than tridiagonal QR by a constant factor but it is simple
//! to get right at arbitrary precision, its accuracy is easy to certify from
//! residuals, and the fixed row-cyclic pivot order makes it deterministic.

use rug::ops::{NegAssign, SubFrom};
use rug::{Assign, Float};

use super::matrix::BigMatrix;
use super::scalar::{BigReal, Precision};
use crate::error::{Error, Result};

pub const DEFAULT_MAX_SWEEPS: usize = 100;

/// `M = Q diag(values) Q^T` with `values` ascending.
#[derive(Clone, Debug)]
pub struct SymmetricEigen {
    pub values: Vec<BigReal>,
    pub vectors: BigMatrix,
}

impl SymmetricEigen {
    pub fn precision(&self) -> Precision {
        self.vectors.precision()
    }

    /// `Q diag(f(lambda)) Q^T`.
    pub fn apply(&self, f: impl Fn(&Float) -> Float) -> BigMatrix {
        let p = self.precision();
        let n = self.values.len();
        let q = &self.vectors;
        let fvals: Vec<Float> = self.values.iter().map(|v| f(v.value())).collect();
        let scaled = BigMatrix::from_fn(n, n, p, |i, k| Float::with_val(p.bits(), q.get(i, k) * &fvals[k]));
        scaled.matmul(&q.transpose())
    }

    pub fn reconstruct(&self) -> BigMatrix {
        self.apply(|x| x.clone())
    }
}

/// `10^(-0.9 p) * ||M||_max`, leaving headroom below the working precision.
pub fn default_tolerance(m: &BigMatrix) -> Float {
    let p = m.precision();
    p.pow10(-0.9 * p.decimal_digits() as f64) * m.max_norm()
}

pub fn jacobi_eigen_sym(m: &BigMatrix, tol: Option<&Float>) -> Result<SymmetricEigen> {
    jacobi_eigen_sym_with(m, tol, DEFAULT_MAX_SWEEPS)
}

pub fn jacobi_eigen_sym_with(
    m: &BigMatrix,
    tol: Option<&Float>,
    max_sweeps: usize,
) -> Result<SymmetricEigen> {
    m.require_square("jacobi_eigen_sym input")?;
    if !m.is_symmetric() {
        return Err(Error::InvalidInput(format!(
            "matrix is not symmetric (asymmetry {:e})",
            m.asymmetry().to_f64()
        )));
    }
    let p = m.precision();
    let bits = p.bits();
    let n = m.rows();

    let tol = match tol {
        Some(t) => Float::with_val(bits, t),
        None => default_tolerance(m),
    };
    if tol <= 0 && m.max_norm() > 0 {
        return Err(Error::InvalidInput("tolerance must be positive".into()));
    }
    let tol2 = Float::with_val(bits, &tol * &tol);
    let skip = Float::with_val(bits, &tol / n.max(1) as u32);

    // Work on the exactly symmetric part.
    let mut a: Vec<Float> = m.symmetrized().data().to_vec();
    let mut v: Vec<Float> = BigMatrix::identity(n, p).data().to_vec();

    let mut scratch = Scratch::new(bits);
    let mut converged = false;
    let mut off2 = Float::new(bits);
    for _sweep in 0..max_sweeps {
        off2.assign(0);
        for i in 0..n {
            for j in i + 1..n {
                off2 += a[i * n + j].clone().square();
            }
        }
        off2 *= 2u32;
        if off2 <= tol2 {
            converged = true;
            break;
        }
        for pi in 0..n {
            for qi in pi + 1..n {
                let apq = &a[pi * n + qi];
                if apq.is_zero() || Float::with_val(bits, apq.abs_ref()) < skip {
                    continue;
                }
                scratch.rotation(&a[pi * n + pi], &a[qi * n + qi], apq);
                rotate(&mut a, &mut v, n, pi, qi, &mut scratch);
            }
        }
    }
    if !converged {
        return Err(Error::NonConvergence {
            routine: "jacobi_eigen_sym",
            sweeps: max_sweeps,
            residual: off2.sqrt().to_f64(),
        });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        a[i * n + i]
            .partial_cmp(&a[j * n + j])
            .expect("eigenvalues are finite")
            .then(i.cmp(&j))
    });
    let values = order
        .iter()
        .map(|&k| BigReal::new(a[k * n + k].clone(), p))
        .collect();
    let vectors = BigMatrix::from_fn(n, n, p, |r, c| v[r * n + order[c]].clone());
    Ok(SymmetricEigen { values, vectors })
}

struct Scratch {
    t: Float,
    c: Float,
    s: Float,
    tau: Float,
    h: Float,
    t1: Float,
    t2: Float,
}

impl Scratch {
    fn new(bits: u32) -> Self {
        let z = Float::new(bits);
        Scratch {
            t: z.clone(),
            c: z.clone(),
            s: z.clone(),
            tau: z.clone(),
            h: z.clone(),
            t1: z.clone(),
            t2: z,
        }
    }

    /// Rotation annihilating a_pq (Rutishauser's formulation).
    fn rotation(&mut self, app: &Float, aqq: &Float, apq: &Float) {
        let bits = self.t.prec();
        // theta = (a_qq - a_pp) / (2 a_pq)
        let mut theta = Float::with_val(bits, aqq - app);
        theta /= apq;
        theta /= 2u32;
        // t = sgn(theta) / (|theta| + sqrt(theta^2 + 1))
        let mut root = Float::with_val(bits, theta.square_ref());
        root += 1u32;
        root.sqrt_mut();
        root += Float::with_val(bits, theta.abs_ref());
        self.t.assign(1u32);
        self.t /= &root;
        if theta.is_sign_negative() {
            self.t.neg_assign();
        }
        // c = 1 / sqrt(t^2 + 1), s = t c, tau = s / (1 + c)
        self.c.assign(self.t.square_ref());
        self.c += 1u32;
        self.c.recip_sqrt_mut();
        self.s.assign(&self.t * &self.c);
        self.tau.assign(&self.c + 1u32);
        self.tau.recip_mut();
        self.tau *= &self.s;
        self.h.assign(&self.t * apq);
    }

    /// g <- g - s (h + g tau), h <- h + s (g - h tau)
    fn apply(&mut self, g: &mut Float, h: &mut Float) {
        self.t1.assign(&*g * &self.tau);
        self.t1 += &*h;
        self.t1 *= &self.s;
        self.t2.assign(&*h * &self.tau);
        self.t2.sub_from(&*g);
        self.t2 *= &self.s;
        *g -= &self.t1;
        *h += &self.t2;
    }
}

fn pair_mut(v: &mut [Float], i: usize, j: usize) -> (&mut Float, &mut Float) {
    debug_assert_ne!(i, j);
    if i < j {
        let (lo, hi) = v.split_at_mut(j);
        (&mut lo[i], &mut hi[0])
    } else {
        let (lo, hi) = v.split_at_mut(i);
        (&mut hi[0], &mut lo[j])
    }
}

fn rotate(a: &mut [Float], v: &mut [Float], n: usize, p: usize, q: usize, sc: &mut Scratch) {
    a[p * n + p] -= &sc.h;
    a[q * n + q] += &sc.h;
    a[p * n + q].assign(0);
    a[q * n + p].assign(0);
    for r in 0..n {
        if r == p || r == q {
            continue;
        }
        let (g, h) = pair_mut(a, r * n + p, r * n + q);
        sc.apply(g, h);
        let (gv, hv) = (a[r * n + p].clone(), a[r * n + q].clone());
        a[p * n + r].assign(&gv);
        a[q * n + r].assign(&hv);
    }
    for r in 0..n {
        let (g, h) = pair_mut(v, r * n + p, r * n + q);
        sc.apply(g, h);
    }
}
