//! The skew-symmetric generator `S` and its box-function discretization.
//!
//! With `f(x - y) = S(x, y)` and `F_k(x) = -int_x^r t^k f(-t) dt`, the matrix
//! element between cells `i < j` is
//!
//! ```text
//! S_ij = n_i n_j (F(b_j - a_i) - F(b_j - b_i) - F(a_j - a_i) + F(a_j - b_i)),
//! F(x) = x F_0(x) - F_1(x).
//! ```
//!
//! All arguments are non-negative. On the cylinder they lie in `[0, l]`, and
//! `F(l - x) = -(-1)^xi F(x)` lets every evaluation happen on `[0, l/2]`,
//! away from the logarithmic singularity of `F_0` at `x = l`.

use rayon::prelude::*;
use rug::float::Constant;
use rug::{Assign, Float};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Ambient, GridSpec};
use crate::linalg::{BigMatrix, Precision};
use crate::quadrature::{integrate, QuadOptions};
use crate::special::e1;

/// Guard bits for integrands that cancel at small mass.
const GUARD_BITS: u32 = 64;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub ambient: Ambient,
    pub mass: f64,
    /// Boundary condition on the cylinder: 0 periodic, 1 antiperiodic.
    #[serde(default)]
    pub xi: u8,
}

impl KernelSpec {
    pub fn new(ambient: Ambient, mass: f64, xi: u8) -> Result<Self> {
        if !(mass.is_finite() && mass >= 0.0) {
            return Err(Error::Config(format!("mass must be finite and non-negative, got {mass}")));
        }
        if xi > 1 {
            return Err(Error::Config(format!("xi must be 0 or 1, got {xi}")));
        }
        if xi == 1 && !ambient.is_cylinder() {
            return Err(Error::ConfigMismatch("xi = 1 only applies to the cylinder".into()));
        }
        Ok(KernelSpec { ambient, mass, xi })
    }

    /// `mu = m l / (2 pi)` on the cylinder.
    pub fn mu(&self) -> Option<f64> {
        match self.ambient {
            Ambient::Cylinder { period } => Some(self.mass * period / (2.0 * std::f64::consts::PI)),
            Ambient::Minkowski { .. } => None,
        }
    }

    pub fn antiderivatives(&self) -> FPair {
        match (self.ambient, self.mass > 0.0) {
            (Ambient::Minkowski { .. }, false) => FPair::MinkowskiMassless { r: 1.0 },
            (Ambient::Minkowski { .. }, true) => FPair::MinkowskiMassive { m: self.mass },
            (Ambient::Cylinder { period }, false) => FPair::CylinderMassless { l: period, xi: self.xi },
            (Ambient::Cylinder { period }, true) => FPair::CylinderMassive {
                l: period,
                xi: self.xi,
                m: self.mass,
            },
        }
    }
}

/// The antiderivatives `F_0`, `F_1` of one kernel regime.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FPair {
    /// `F_0 = log r - log x`, `F_1 = r - x`.
    MinkowskiMassless { r: f64 },
    /// `F_0 = E1(m x)`, `F_1 = e^{-m x} / m`, with `r = infinity`.
    MinkowskiMassive { m: f64 },
    /// `r = l/2`; `F_0` closed form, `F_1` by quadrature.
    CylinderMassless { l: f64, xi: u8 },
    /// Massless part plus an integral over the mass.
    CylinderMassive { l: f64, xi: u8, m: f64 },
}

impl FPair {
    /// The upper integration bound `r`; `None` stands for infinity.
    pub fn upper_bound(&self) -> Option<f64> {
        match *self {
            FPair::MinkowskiMassless { r } => Some(r),
            FPair::MinkowskiMassive { .. } => None,
            FPair::CylinderMassless { l, .. } | FPair::CylinderMassive { l, .. } => Some(l / 2.0),
        }
    }

    fn period(&self) -> Option<f64> {
        match *self {
            FPair::CylinderMassless { l, .. } | FPair::CylinderMassive { l, .. } => Some(l),
            _ => None,
        }
    }

    fn check_domain(&self, x: &Float) -> Result<()> {
        let ok = *x > 0 && self.period().map_or(x.is_finite(), |l| *x < l);
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("antiderivative argument {} outside the open domain", x.to_f64())))
        }
    }

    pub fn f0(&self, x: &Float, opts: &QuadOptions) -> Result<Float> {
        self.check_domain(x)?;
        let p = opts.precision;
        let bits = p.bits();
        match *self {
            FPair::MinkowskiMassless { r } => {
                let mut v = p.float(r).ln();
                v -= Float::with_val(bits, x.ln_ref());
                Ok(v)
            }
            FPair::MinkowskiMassive { m } => e1(&Float::with_val(bits, x * p.float(m))),
            FPair::CylinderMassless { l, xi } => Ok(massless_cylinder_f0(x, l, xi, p)),
            FPair::CylinderMassive { l, xi, m } => {
                let base = massless_cylinder_f0(x, l, xi, p);
                let corr = integrate(|mt| mass_integrand(Part::F0, mt, x, l, xi), &p.zero(), &p.float(m), opts)?;
                Ok(base + corr)
            }
        }
    }

    pub fn f1(&self, x: &Float, opts: &QuadOptions) -> Result<Float> {
        if *x != 0 {
            self.check_domain(x)?;
        }
        let p = opts.precision;
        let bits = p.bits();
        match *self {
            FPair::MinkowskiMassless { r } => Ok(Float::with_val(bits, p.float(r) - x)),
            FPair::MinkowskiMassive { m } => {
                let mf = p.float(m);
                let mut v = Float::with_val(bits, x * &mf);
                v = (-v).exp();
                v /= &mf;
                Ok(v)
            }
            FPair::CylinderMassless { l, xi } => massless_cylinder_f1(x, l, xi, opts),
            FPair::CylinderMassive { l, xi, m } => {
                let base = massless_cylinder_f1(x, l, xi, opts)?;
                let corr = integrate(|mt| mass_integrand(Part::F1, mt, x, l, xi), &p.zero(), &p.float(m), opts)?;
                Ok(base + corr)
            }
        }
    }

    /// `F(x) = x F_0(x) - F_1(x)` for `x >= 0`, with `F(0) = -F_1(0)`.
    pub fn f(&self, x: &Float, opts: &QuadOptions) -> Result<Float> {
        let p = opts.precision;
        let bits = p.bits();
        if *x < 0 {
            return Err(Error::Domain(format!("F needs x >= 0, got {}", x.to_f64())));
        }
        if let Some(l) = self.period() {
            let lf = p.float(l);
            if *x > lf {
                return Err(Error::Domain(format!("F needs x <= l, got {}", x.to_f64())));
            }
            let half = Float::with_val(bits, &lf / 2u32);
            if *x > half {
                let reflected = Float::with_val(bits, &lf - x);
                let v = self.f_direct(&reflected, opts)?;
                return Ok(if self.xi() == 0 { -v } else { v });
            }
        }
        self.f_direct(x, opts)
    }

    fn xi(&self) -> u8 {
        match *self {
            FPair::CylinderMassless { xi, .. } | FPair::CylinderMassive { xi, .. } => xi,
            _ => 0,
        }
    }

    /// `F` without the cylinder reflection; valid on `[0, l)`.
    pub fn f_direct(&self, x: &Float, opts: &QuadOptions) -> Result<Float> {
        let p = opts.precision;
        let bits = p.bits();
        match *self {
            FPair::CylinderMassive { l, xi, m } => {
                // One integral over the combined integrand instead of two.
                let base = FPair::CylinderMassless { l, xi }.f_direct(x, opts)?;
                let corr = integrate(|mt| mass_integrand(Part::F, mt, x, l, xi), &p.zero(), &p.float(m), opts)?;
                Ok(base + corr)
            }
            _ => {
                let f1 = self.f1(x, opts)?;
                if x.is_zero() {
                    return Ok(-f1);
                }
                let mut v = Float::with_val(bits, x * self.f0(x, opts)?);
                v -= &f1;
                Ok(v)
            }
        }
    }
}

fn massless_cylinder_f0(x: &Float, l: f64, xi: u8, p: Precision) -> Float {
    let bits = p.bits();
    let mut arg = Float::with_val(bits, x * p.pi());
    arg /= p.float(l);
    if xi == 0 {
        arg.sin_mut();
    } else {
        arg /= 2u32;
        arg.tan_mut();
    }
    -(arg.abs().ln())
}

/// `(l / pi) int_{pi x / l}^{pi / 2} theta cot(theta) dtheta` (csc for xi = 1).
fn massless_cylinder_f1(x: &Float, l: f64, xi: u8, opts: &QuadOptions) -> Result<Float> {
    let p = opts.precision;
    let bits = p.bits();
    let lf = p.float(l);
    let pi = p.pi();
    let mut lower = Float::with_val(bits, x * &pi);
    lower /= &lf;
    let upper = Float::with_val(bits, &pi / 2u32);
    let integrand = |t: &Float| -> Float {
        let (s, c) = t.clone().sin_cos(Float::new(t.prec()));
        let mut v = Float::with_val(t.prec(), t / &s);
        if xi == 0 {
            v *= &c;
        }
        v
    };
    let v = integrate(integrand, &lower, &upper, opts)?;
    Ok(v * lf / pi)
}

#[derive(Clone, Copy)]
enum Part {
    F0,
    F1,
    F,
}

/// Integrands over the mass `mt` of the corrections to `F_0`, `F_1` and
/// `F = x F_0 - F_1`, with `L = l/2 - x`. Evaluated with guard bits and
/// continued to `mt = 0` by their limits.
fn mass_integrand(part: Part, mt: &Float, x: &Float, l: f64, xi: u8) -> Float {
    let out_bits = mt.prec();
    let bits = out_bits + GUARD_BITS;
    let mt = Float::with_val(bits, mt);
    let lf = Float::with_val(bits, l);
    let half_l = Float::with_val(bits, &lf / 2u32);
    let big_l = Float::with_val(bits, &half_l - x);
    let x = Float::with_val(bits, x);

    let value = if mt.is_zero() {
        // Limits as mt -> 0+.
        let l2 = Float::with_val(bits, big_l.square_ref());
        let f0 = if xi == 0 { -Float::with_val(bits, &l2 / &lf) } else { -big_l.clone() };
        let phi = if xi == 0 {
            Float::with_val(bits, &l2 * &big_l) / Float::with_val(bits, &lf * 3u32)
        } else {
            l2 / 2u32
        };
        combine(part, f0, phi, &x)
    } else {
        let mut ml = Float::with_val(bits, &mt * &big_l);
        let sinh_ml = Float::with_val(bits, ml.sinh_ref());
        ml /= 2u32;
        let sinh_half = ml.sinh();
        let sinh_half_sq = Float::with_val(bits, sinh_half.square_ref());
        let mhalf_l = Float::with_val(bits, &mt * &half_l);
        let (f0, phi) = if xi == 0 {
            let den = Float::with_val(bits, &mt * Float::with_val(bits, mhalf_l.sinh_ref()));
            let f0 = -(Float::with_val(bits, &sinh_half_sq * 2u32) / &den);
            let mut num = Float::with_val(bits, &sinh_ml / &mt);
            num -= &big_l;
            (f0, num / den)
        } else {
            let cosh = Float::with_val(bits, mhalf_l.cosh_ref());
            let f0 = -(Float::with_val(bits, &sinh_ml / &mt) / &cosh);
            let mut den = Float::with_val(bits, mt.square_ref());
            den *= &cosh;
            (f0, Float::with_val(bits, &sinh_half_sq * 2u32) / den)
        };
        combine(part, f0, phi, &x)
    };
    Float::with_val(out_bits, value)
}

/// `f_1 = x f_0 - phi` and `phi = x f_0 - f_1`.
fn combine(part: Part, f0: Float, phi: Float, x: &Float) -> Float {
    match part {
        Part::F0 => f0,
        Part::F => phi,
        Part::F1 => {
            let mut v = Float::with_val(f0.prec(), x * &f0);
            v -= &phi;
            v
        }
    }
}

/// The convolution kernel `S(x, y) = f(u)` at `u = x - y != 0`: used by
/// oracles and references, not by the assembly.
pub fn kernel_value(kernel: &KernelSpec, u: &Float, opts: &QuadOptions) -> Result<Float> {
    let p = opts.precision;
    let bits = p.bits();
    if u.is_zero() {
        return Err(Error::Domain("kernel is singular at u = 0".into()));
    }
    let m = p.float(kernel.mass);
    match kernel.ambient {
        Ambient::Minkowski { .. } => {
            let mut v = Float::with_val(bits, u.abs_ref());
            v *= &m;
            v = (-v).exp();
            v /= u;
            Ok(v)
        }
        Ambient::Cylinder { period } => {
            let lf = p.float(period);
            let mut arg = Float::with_val(bits, u * p.pi());
            arg /= &lf;
            let s0 = if kernel.xi == 0 { arg.cot() } else { arg.csc() } * p.pi() / &lf;
            if kernel.mass == 0.0 {
                return Ok(s0);
            }
            let au = Float::with_val(bits, u.abs_ref());
            let half_l = Float::with_val(bits, &lf / 2u32);
            let xi = kernel.xi;
            let s = |mt: &Float| -> Float {
                if mt.is_zero() {
                    return if xi == 0 {
                        Float::with_val(bits, 1u32) - Float::with_val(bits, &au * 2u32) / &lf
                    } else {
                        Float::with_val(bits, 1u32)
                    };
                }
                let mut num = Float::with_val(bits, &half_l - &au);
                num *= mt;
                let den = Float::with_val(bits, mt * &half_l);
                if xi == 0 {
                    num.sinh() / den.sinh()
                } else {
                    num.cosh() / den.cosh()
                }
            };
            let corr = integrate(s, &p.zero(), &m, opts)?;
            Ok(if *u > 0 { s0 - corr } else { s0 + corr })
        }
    }
}

/// `S^{(n,b)}`, exactly skew-symmetric with zero diagonal.
pub fn assemble_s(grid: &GridSpec, kernel: &KernelSpec) -> Result<BigMatrix> {
    assemble_s_with(grid, &kernel.antiderivatives(), kernel.ambient)
}

pub fn assemble_s_with(grid: &GridSpec, fpair: &FPair, ambient: Ambient) -> Result<BigMatrix> {
    if grid.ambient() != ambient {
        return Err(Error::ConfigMismatch(format!(
            "grid is on the {} slice but the kernel on the {}",
            grid.ambient().name(),
            ambient.name()
        )));
    }
    let p = grid.precision();
    let bits = p.bits();
    let n = grid.n();
    let opts = QuadOptions::for_precision(p);

    let args = |i: usize, j: usize| -> [Float; 4] {
        let (ai, bi, aj, bj) = (grid.lower(i), grid.upper(i), grid.lower(j), grid.upper(j));
        [
            Float::with_val(bits, bj - ai),
            Float::with_val(bits, bj - bi),
            Float::with_val(bits, aj - ai),
            Float::with_val(bits, aj - bi),
        ]
    };

    // Evaluate F once per distinct argument.
    let mut unique: Vec<Float> = Vec::with_capacity(2 * n * n);
    for i in 0..n {
        for j in i + 1..n {
            unique.extend(args(i, j));
        }
    }
    unique.sort_by(|a, b| a.partial_cmp(b).expect("finite grid"));
    unique.dedup();
    let values: Vec<Float> = unique
        .par_iter()
        .map(|x| fpair.f(x, &opts))
        .collect::<Result<_>>()?;
    let lookup = |x: &Float| -> &Float {
        let k = unique
            .binary_search_by(|probe| probe.partial_cmp(x).expect("finite grid"))
            .expect("argument was collected");
        &values[k]
    };

    let norms: Vec<Float> = (0..n).map(|i| grid.normalizer(i)).collect();
    let mut s = BigMatrix::zeros(n, n, p);
    let mut acc = Float::new(bits);
    for i in 0..n {
        for j in i + 1..n {
            let [x1, x2, x3, x4] = args(i, j);
            acc.assign(lookup(&x1));
            acc -= lookup(&x2);
            acc -= lookup(&x3);
            acc += lookup(&x4);
            acc *= &norms[i];
            acc *= &norms[j];
            s.set(i, j, &acc);
            s.set(j, i, &Float::with_val(bits, -&acc));
        }
    }
    Ok(s)
}

/// Catalan's constant, for closed-form checks.
pub fn catalan(p: Precision) -> Float {
    Float::with_val(p.bits(), Constant::Catalan)
}
