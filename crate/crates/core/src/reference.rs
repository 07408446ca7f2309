//! Exact massless (and wedge) modular generators, smeared against the same
//! test functions as the numerics.

use num_complex::Complex64;
use rayon::prelude::*;
use rug::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{BigMatrix, Precision};
use crate::quadrature::{integrate, QuadOptions};
use crate::smearing::{SmearKind, SmearSpec, TestFunctions};

use std::f64::consts::PI;

/// Default working precision for reference quadratures.
pub const REFERENCE_DIGITS: u32 = 30;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReferenceKernel {
    /// Right wedge `[0, inf)` at any mass, in closed form.
    Wedge { mass: f64 },
    /// Massless field on the circle of period `period`, region a union of intervals.
    CylinderCones {
        period: f64,
        intervals: Vec<(f64, f64)>,
        xi: u8,
    },
    /// Massless double cone over `[center - width/2, center + width/2]` without cutoff.
    MinkowskiCone { center: f64, width: f64 },
    /// Profile `min(x - c + w/2, c - x + w/2)` of the two bounding wedges.
    WedgeBound { center: f64, width: f64 },
}

impl ReferenceKernel {
    pub fn name(&self) -> &'static str {
        match self {
            ReferenceKernel::Wedge { .. } => "wedge",
            ReferenceKernel::CylinderCones { .. } => "cylinder_cones",
            ReferenceKernel::MinkowskiCone { .. } => "minkowski_cone",
            ReferenceKernel::WedgeBound { .. } => "wedge_bound",
        }
    }

    fn check(&self, spec: &SmearSpec) -> Result<()> {
        match (self, spec.kind) {
            (ReferenceKernel::CylinderCones { period, intervals, xi }, SmearKind::ThetaGaussian { period: lp, xi: sx }) => {
                if (period - lp).abs() > 1e-12 * period || *xi != sx {
                    return Err(Error::ConfigMismatch(format!(
                        "reference on period {period} with xi {xi} but test functions use period {lp} with xi {sx}"
                    )));
                }
                if *xi == 0 && intervals.len() > 1 {
                    return Err(Error::ConfigMismatch(
                        "the periodic zero mode is only known for a single interval".into(),
                    ));
                }
                if *xi > 1 || intervals.is_empty() {
                    return Err(Error::ConfigMismatch("cylinder reference needs xi in {0, 1} and intervals".into()));
                }
                Ok(())
            }
            (ReferenceKernel::CylinderCones { .. }, SmearKind::Gaussian) => Err(Error::ConfigMismatch(
                "cylinder reference needs theta-Gaussian test functions".into(),
            )),
            (_, SmearKind::ThetaGaussian { .. }) => Err(Error::ConfigMismatch(format!(
                "{} reference needs plain Gaussian test functions",
                self.name()
            ))),
            _ => Ok(()),
        }
    }
}

/// `(l / 2 pi) csc(pi w / l) (cos(2 pi x / l) - cos(pi w / l))` for `[-w/2, w/2]`.
pub fn profile_single_cone_cylinder(l: f64, w: f64, x: f64) -> f64 {
    let a = PI * w / l;
    // cos A - cos B = 2 sin((B + A)/2) sin((B - A)/2), stable for large l.
    let t = PI * x / l;
    l / PI / a.sin() * (0.5 * a + t).sin() * (0.5 * a - t).sin()
}

/// `((w/2)^2 - x^2) / w`.
pub fn profile_minkowski_cone(w: f64, x: f64) -> f64 {
    (0.25 * w * w - x * x) / w
}

/// `min(x + w/2, -x + w/2)`.
pub fn wedge_bound_profile(w: f64, x: f64) -> f64 {
    (x + 0.5 * w).min(-x + 0.5 * w)
}

/// Whether `intervals` is `[-3l/8, -l/8] u [l/8, 3l/8]`.
pub fn is_symmetric_two_cones(l: f64, intervals: &[(f64, f64)]) -> bool {
    let want = [(-0.375 * l, -0.125 * l), (0.125 * l, 0.375 * l)];
    intervals.len() == 2
        && intervals
            .iter()
            .zip(want)
            .all(|(&(a, b), (wa, wb))| (a - wa).abs() <= 1e-12 * l && (b - wb).abs() <= 1e-12 * l)
}

/// `-(l / 4 pi) cos(4 pi x / l)` for the symmetric two-cone layout.
pub fn profile_two_cones_cylinder(l: f64, intervals: &[(f64, f64)], x: f64) -> Result<f64> {
    if !is_symmetric_two_cones(l, intervals) {
        return Err(Error::ConfigMismatch(format!(
            "closed-form two-cone profile needs [-3l/8, -l/8] u [l/8, 3l/8], got {intervals:?}"
        )));
    }
    Ok(-l / (4.0 * PI) * (4.0 * PI * x / l).cos())
}

/// `x + l/2` reduced to `[-l/2, l/2)`.
pub fn v_map(l: f64, x: f64) -> f64 {
    (x + l / 2.0 + l / 2.0).rem_euclid(l) - l / 2.0
}

/// `z'(x) = (pi/l) sum_j [cot(pi (b_j - x)/l) + cot(pi (x - a_j)/l)]`.
pub fn general_z_prime(intervals: &[(f64, f64)], l: f64, x: f64) -> f64 {
    let k = PI / l;
    intervals
        .iter()
        .map(|&(a, b)| k * (1.0 / (k * (b - x)).tan() + 1.0 / (k * (x - a)).tan()))
        .sum()
}

/// `log` of the product defining `e^z` at `x + i eps`.
fn z_at(intervals: &[(f64, f64)], l: f64, x: f64, eps: f64) -> Complex64 {
    let phase = |t: Complex64| (Complex64::i() * 2.0 * PI * t / l).exp();
    let w = phase(Complex64::new(x, eps));
    let n = intervals.len() as f64;
    let mut z = Complex64::new(0.0, PI * (n - 1.0));
    for &(a, b) in intervals {
        let ea = phase(Complex64::new(a, 0.0));
        let eb = phase(Complex64::new(b, 0.0));
        z += (w - ea).ln() - (eb - w).ln();
    }
    z
}

/// Offset used for the `eps -> 0+` limit, relative to `l`.
pub const Z_EPSILON: f64 = 1e-4;

/// `z(x)` as the `eps -> 0+` limit of the product formula, by Richardson
/// extrapolation over `eps, eps/2, eps/4`. The imaginary part is defined
/// modulo `2 pi`.
pub fn general_z(intervals: &[(f64, f64)], l: f64, x: f64) -> Complex64 {
    let e = Z_EPSILON * l;
    let z1 = z_at(intervals, l, x, e);
    let z2 = z_at(intervals, l, x, e / 2.0);
    let z4 = z_at(intervals, l, x, e / 4.0);
    // Eliminate the linear, then the quadratic term.
    let r12 = z2 * 2.0 - z1;
    let r24 = z4 * 2.0 - z2;
    (r24 * 4.0 - r12) / 3.0
}

/// `Re z(x)` in closed form, the limit used for root finding.
fn re_z(intervals: &[(f64, f64)], l: f64, x: f64) -> f64 {
    let k = PI / l;
    intervals
        .iter()
        .map(|&(a, b)| (k * (x - a)).sin().abs().ln() - (k * (b - x)).sin().abs().ln())
        .sum()
}

/// Pieces of the circle `[-l/2, l/2)` as `(start, end, inside)`; the complement
/// piece through `+-l/2` is reported once, with `end > l/2`.
fn circle_pieces(intervals: &[(f64, f64)], l: f64) -> Vec<(f64, f64, bool)> {
    let mut out = Vec::new();
    for (j, &(a, b)) in intervals.iter().enumerate() {
        out.push((a, b, true));
        let next = if j + 1 < intervals.len() {
            intervals[j + 1].0
        } else {
            intervals[0].0 + l
        };
        out.push((b, next, false));
    }
    out
}

fn reduce(x: f64, l: f64) -> f64 {
    (x + l / 2.0).rem_euclid(l) - l / 2.0
}

/// All solutions `y` of `z(y) = z(x)` on the circle: `x` itself first, then
/// one per other region interval (or complement piece), in circle order.
///
/// At an interval endpoint the solutions are taken as the limit from the
/// right, by nudging `x` into the next piece.
pub fn solve_vk(intervals: &[(f64, f64)], l: f64, x: f64) -> Result<Vec<f64>> {
    let mut x = if (-l / 2.0..l / 2.0).contains(&x) { x } else { reduce(x, l) };
    let on_endpoint = intervals
        .iter()
        .any(|&(a, b)| (x - a).abs() <= 1e-14 * l || (x - b).abs() <= 1e-14 * l);
    if on_endpoint {
        x += 1e-12 * l;
    }
    let pieces = circle_pieces(intervals, l);
    let home = pieces
        .iter()
        .position(|&(s, e, _)| (s < x && x < e) || (s < x + l && x + l < e))
        .ok_or(Error::RootNotBracketed { x, lo: x, hi: x })?;
    let inside = pieces[home].2;
    let target = re_z(intervals, l, x);
    let mut out = vec![x];
    for (k, &(s, e, ins)) in pieces.iter().enumerate() {
        if k == home || ins != inside {
            continue;
        }
        let g = |y: f64| re_z(intervals, l, y) - target;
        let nudge = 1e-13 * l;
        let (mut lo, mut hi) = (s + nudge, e - nudge);
        let (glo, ghi) = (g(lo), g(hi));
        if !(glo.is_finite() && ghi.is_finite()) || glo.signum() == ghi.signum() {
            return Err(Error::RootNotBracketed { x, lo, hi });
        }
        let rising = glo < ghi;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if (g(mid) < 0.0) == rising {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 4.0 * f64::EPSILON * l {
                break;
            }
        }
        out.push(reduce(0.5 * (lo + hi), l));
    }
    Ok(out)
}

/// Wedge smeared parts in closed form:
/// `sym = pi m (x_i + x_j) e^{-d^2/4 sigma^2}`,
/// `skew = -pi (x_i^2 - x_j^2) / (2 sigma^2) e^{-d^2/4 sigma^2}`.
pub fn wedge_smeared_elements(mass: f64, peaks: &[f64], sigma: f64, precision: Precision) -> (BigMatrix, BigMatrix) {
    let bits = precision.bits();
    let xs: Vec<Float> = peaks.iter().map(|&x| precision.float(x)).collect();
    let s2 = Float::with_val(bits, precision.float(sigma).square_ref());
    let pi = precision.pi();
    let m = precision.float(mass);
    let gauss = |i: usize, j: usize| {
        let mut d = Float::with_val(bits, &xs[i] - &xs[j]);
        d.square_mut();
        d /= Float::with_val(bits, &s2 * 4u32);
        (-d).exp()
    };
    let n = peaks.len();
    let sym = BigMatrix::from_fn(n, n, precision, |i, j| {
        let mut v = Float::with_val(bits, &xs[i] + &xs[j]);
        v *= &m;
        v *= &pi;
        v * gauss(i, j)
    });
    let skew = BigMatrix::from_fn(n, n, precision, |i, j| {
        let mut v = Float::with_val(bits, xs[i].square_ref());
        v -= Float::with_val(bits, xs[j].square_ref());
        v *= &pi;
        v /= Float::with_val(bits, &s2 * 2u32);
        -v * gauss(i, j)
    });
    (sym, skew)
}

/// Reference matrices split by kernel term.
#[derive(Clone, Debug)]
pub struct ReferenceMatrices {
    /// Skew part: local `delta'` term plus bilocal terms.
    pub skew: BigMatrix,
    /// Symmetric part: wedge mass term or cylinder zero mode.
    pub sym: BigMatrix,
    pub local: BigMatrix,
    pub bilocal: Option<BigMatrix>,
    pub zero_mode: Option<BigMatrix>,
}

impl ReferenceMatrices {
    pub fn total(&self) -> BigMatrix {
        self.sym.add(&self.skew)
    }
}

/// Evaluates kernel pieces at a fixed precision.
struct Evaluator<'a> {
    kernel: &'a ReferenceKernel,
    tf: TestFunctions,
    p: Precision,
    opts: QuadOptions,
}

impl Evaluator<'_> {
    fn bits(&self) -> u32 {
        self.p.bits()
    }

    /// `z'(x)^{-1}` for the local term.
    fn profile(&self, x: &Float) -> Float {
        let bits = self.bits();
        match self.kernel {
            ReferenceKernel::Wedge { .. } => x.clone(),
            ReferenceKernel::MinkowskiCone { center, width } => {
                let y = Float::with_val(bits, x - *center);
                let mut v = self.p.float(0.25 * width * width);
                v -= Float::with_val(bits, y.square_ref());
                v / *width
            }
            ReferenceKernel::WedgeBound { center, width } => {
                let y = Float::with_val(bits, x - *center);
                let half = self.p.float(0.5 * width);
                let up = Float::with_val(bits, &half + &y);
                let down = Float::with_val(bits, &half - &y);
                if up < down {
                    up
                } else {
                    down
                }
            }
            ReferenceKernel::CylinderCones { period, intervals, .. } => {
                cylinder_profile(intervals, &self.p.float(*period), x)
            }
        }
    }

    /// `pi int p (h_i h_j' - h_i' h_j) dx`.
    fn local(&self, i: usize, j: usize, range: &(Float, Float), breaks: &[Float]) -> Result<Float> {
        let bits = self.bits();
        let pi = self.p.pi();
        let f = |x: &Float| {
            let a = self.tf.value(i, x) * self.tf.derivative(j, x);
            let b = self.tf.derivative(i, x) * self.tf.value(j, x);
            let mut v = Float::with_val(bits, a - b);
            v *= self.profile(x);
            v
        };
        Ok(integrate_pieces(&f, range, breaks, &self.opts)? * pi)
    }

    /// `int h_i(x) c(x) h_j(v(x)) dx` over the circle, summed over the
    /// non-trivial solutions `v`, with `c = -(2 pi^2 / l) csc(pi (x - v)/l) p(v)`.
    fn bilocal(&self, i: usize, j: usize, l: f64, intervals: &[(f64, f64)]) -> Result<Float> {
        let bits = self.bits();
        let lf = self.p.float(l);
        let pi = self.p.pi();
        let symmetric = is_symmetric_two_cones(l, intervals);
        let mut coeff = Float::with_val(bits, pi.square_ref());
        coeff *= 2u32;
        coeff /= &lf;
        let failed = std::sync::Mutex::new(None);
        let f = |x: &Float| {
            let vs: Vec<Float> = if symmetric {
                vec![Float::with_val(bits, x + Float::with_val(bits, &lf / 2u32))]
            } else {
                match solve_vk(intervals, l, x.to_f64()) {
                    Ok(v) => v[1..].iter().map(|&y| self.p.float(y)).collect(),
                    Err(e) => {
                        *failed.lock().expect("poisoned") = Some(e);
                        Vec::new()
                    }
                }
            };
            let mut acc = Float::new(bits);
            for v in vs {
                let mut arg = Float::with_val(bits, x - &v);
                arg *= &pi;
                arg /= &lf;
                let csc = arg.sin().recip();
                let mut term = self.tf.value(j, &v);
                term *= cylinder_profile(intervals, &lf, &v);
                term *= csc;
                acc -= term;
            }
            acc * &coeff * self.tf.value(i, x)
        };
        let half = self.p.float(l / 2.0);
        let range = (-half.clone(), half);
        let v = integrate_pieces(&f, &range, &[], &self.opts)?;
        if let Some(e) = failed.into_inner().expect("poisoned") {
            return Err(e);
        }
        Ok(v)
    }

    /// `int h_i(x) c0(x) h_j(s1 - x) dx` with
    /// `c0 = pi csc(pi w/l) (cos(pi (2x - s1)/l) - cos(pi w/l))`.
    fn zero_mode(&self, i: usize, j: usize, l: f64, (a, b): (f64, f64)) -> Result<Float> {
        let bits = self.bits();
        let lf = self.p.float(l);
        let pi = self.p.pi();
        let s1 = self.p.float(a + b);
        let mut theta_w = self.p.float(b - a);
        theta_w *= &pi;
        theta_w /= &lf;
        let csc = Float::with_val(bits, theta_w.sin_ref()).recip();
        let cos_w = Float::with_val(bits, theta_w.cos_ref());
        let f = |x: &Float| {
            let mut arg = Float::with_val(bits, x * 2u32);
            arg -= &s1;
            arg *= &pi;
            arg /= &lf;
            let mut c = arg.cos();
            c -= &cos_w;
            c *= &csc;
            let mirrored = Float::with_val(bits, &s1 - x);
            c * self.tf.value(i, x) * self.tf.value(j, &mirrored)
        };
        let half = self.p.float(l / 2.0);
        let range = (-half.clone(), half);
        Ok(integrate_pieces(&f, &range, &[], &self.opts)? * pi)
    }
}

/// `1 / z'(x)` on the circle; uses the closed forms where they apply.
fn cylinder_profile(intervals: &[(f64, f64)], l: &Float, x: &Float) -> Float {
    let bits = l.prec();
    let pi = Float::with_val(bits, rug::float::Constant::Pi);
    let k = Float::with_val(bits, &pi / l);
    if intervals.len() == 1 {
        let (a, b) = intervals[0];
        let w = Float::with_val(bits, b - a);
        let c = Float::with_val(bits, a + b) / 2u32;
        let theta_w = Float::with_val(bits, &k * &w);
        let half_w = Float::with_val(bits, &theta_w / 2u32);
        let mut t = Float::with_val(bits, x - &c);
        t *= &k;
        let mut v = Float::with_val(bits, &half_w + &t).sin();
        v *= Float::with_val(bits, &half_w - &t).sin();
        v /= theta_w.sin();
        return v / &k;
    }
    let mut zp = Float::new(bits);
    for &(a, b) in intervals {
        let t1 = (Float::with_val(bits, b - x) * &k).tan();
        let t2 = (Float::with_val(bits, x - a) * &k).tan();
        zp += t1.recip();
        zp += t2.recip();
    }
    zp *= &k;
    zp.recip()
}

/// Integral over `range` split at the interior `breaks`.
fn integrate_pieces(f: &impl Fn(&Float) -> Float, range: &(Float, Float), breaks: &[Float], opts: &QuadOptions) -> Result<Float> {
    let mut points = vec![range.0.clone()];
    points.extend(breaks.iter().filter(|b| **b > range.0 && **b < range.1).cloned());
    points.push(range.1.clone());
    let mut acc = Float::new(opts.precision.bits());
    for w in points.windows(2) {
        acc += integrate(f, &w[0], &w[1], opts)?;
    }
    Ok(acc)
}

/// Smeared reference matrices for `kernel` with the test functions of `spec`.
pub fn reference_smeared(kernel: &ReferenceKernel, spec: &SmearSpec, precision: Precision) -> Result<ReferenceMatrices> {
    kernel.check(spec)?;
    let n = spec.len();
    if let ReferenceKernel::Wedge { mass } = kernel {
        let (sym, skew) = wedge_smeared_elements(*mass, &spec.peaks, spec.sigma, precision);
        return Ok(ReferenceMatrices {
            local: skew.clone(),
            skew,
            sym,
            bilocal: None,
            zero_mode: None,
        });
    }
    let ev = Evaluator {
        kernel,
        tf: TestFunctions::new(spec, precision),
        p: precision,
        opts: QuadOptions::for_precision(precision),
    };
    let bits = precision.bits();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).collect();
    let all: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).collect();

    // Gaussian tails beyond this many sigma are below the working precision.
    let reach = (2.0 * precision.decimal_digits() as f64 * std::f64::consts::LN_10).sqrt() + 1.0;
    let (breaks, line_range) = match kernel {
        ReferenceKernel::WedgeBound { center, .. } => (vec![precision.float(*center)], None),
        ReferenceKernel::CylinderCones { period, .. } => {
            let h = precision.float(period / 2.0);
            (Vec::new(), Some((-h.clone(), h)))
        }
        _ => (Vec::new(), None),
    };
    let range_for = |i: usize, j: usize| match &line_range {
        Some(r) => r.clone(),
        None => {
            let lo = spec.peaks[i].min(spec.peaks[j]) - reach * spec.sigma;
            let hi = spec.peaks[i].max(spec.peaks[j]) + reach * spec.sigma;
            (precision.float(lo), precision.float(hi))
        }
    };

    let upper: Vec<Float> = pairs
        .par_iter()
        .map(|&(i, j)| ev.local(i, j, &range_for(i, j), &breaks))
        .collect::<Result<_>>()?;
    let mut local = BigMatrix::zeros(n, n, precision);
    for (&(i, j), v) in pairs.iter().zip(upper) {
        local.set(j, i, &Float::with_val(bits, -&v));
        local.set(i, j, &v);
    }

    let (bilocal, zero_mode) = match kernel {
        ReferenceKernel::CylinderCones { period, intervals, xi } => {
            let bilocal = if intervals.len() > 1 {
                let v: Vec<Float> = all
                    .par_iter()
                    .map(|&(i, j)| ev.bilocal(i, j, *period, intervals))
                    .collect::<Result<_>>()?;
                Some(BigMatrix::from_vec(n, n, precision, v))
            } else {
                None
            };
            let zero = if *xi == 0 {
                let v: Vec<Float> = all
                    .par_iter()
                    .map(|&(i, j)| ev.zero_mode(i, j, *period, intervals[0]))
                    .collect::<Result<_>>()?;
                Some(BigMatrix::from_vec(n, n, precision, v))
            } else {
                None
            };
            (bilocal, zero)
        }
        _ => (None, None),
    };
    let skew = match &bilocal {
        Some(b) => local.add(b),
        None => local.clone(),
    };
    let sym = zero_mode.clone().unwrap_or_else(|| BigMatrix::zeros(n, n, precision));
    Ok(ReferenceMatrices {
        skew,
        sym,
        local,
        bilocal,
        zero_mode,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smearing::{cylinder_lattice, interval_lattice};

    #[test]
    fn single_cone_profile_values() {
        assert!((profile_single_cone_cylinder(4.0, 2.0, 0.0) - 2.0 / PI).abs() < 1e-15);
        assert!(profile_single_cone_cylinder(4.0, 2.0, 1.0).abs() < 1e-15);
        assert!(profile_single_cone_cylinder(4.0, 2.0, -1.0).abs() < 1e-15);
        // Large-period limit is the Minkowski profile.
        for x in [-0.7, 0.0, 0.3] {
            let far = profile_single_cone_cylinder(1e6, 2.0, x);
            assert!((far - profile_minkowski_cone(2.0, x)).abs() < 1e-9);
        }
    }

    #[test]
    fn two_cone_profile_values() {
        let iv = [(-1.5, -0.5), (0.5, 1.5)];
        assert!((profile_two_cones_cylinder(4.0, &iv, 1.0).unwrap() - 1.0 / PI).abs() < 1e-15);
        assert!((profile_two_cones_cylinder(4.0, &iv, 0.0).unwrap() + 1.0 / PI).abs() < 1e-15);
        for k in 0..40 {
            let x = -2.0 + 0.1 * k as f64;
            let p = profile_two_cones_cylinder(4.0, &iv, x).unwrap();
            let pv = profile_two_cones_cylinder(4.0, &iv, v_map(4.0, x)).unwrap();
            assert!((p - pv).abs() < 1e-14);
        }
        assert!(profile_two_cones_cylinder(4.0, &[(-1.5, -0.4), (0.5, 1.5)], 0.0).is_err());
    }

    #[test]
    fn general_profile_matches_closed_forms() {
        let iv = [(-1.5, -0.5), (0.5, 1.5)];
        for x in [-1.2, -0.9, 0.2, 0.7, 1.4, 1.9] {
            let general = 1.0 / general_z_prime(&iv, 4.0, x);
            let closed = profile_two_cones_cylinder(4.0, &iv, x).unwrap();
            assert!((general - closed).abs() < 1e-12, "x = {x}");
            let single = 1.0 / general_z_prime(&[(-1.0, 1.0)], 4.0, x);
            assert!((single - profile_single_cone_cylinder(4.0, 2.0, x)).abs() < 1e-12);
        }
    }

    #[test]
    fn z_derivative_by_finite_differences() {
        let iv = [(-1.5, -0.5), (0.5, 1.5)];
        let h = 1e-4;
        let re = |x: f64| general_z(&iv, 4.0, x).re;
        for x in [-1.1, -0.8, 0.6, 1.3] {
            // Fourth-order central difference.
            let fd = (8.0 * (re(x + h) - re(x - h)) - (re(x + 2.0 * h) - re(x - 2.0 * h))) / (12.0 * h);
            let closed = profile_two_cones_cylinder(4.0, &iv, x).unwrap();
            assert!((fd * closed - 1.0).abs() < 1e-8, "x = {x}: {} vs {closed}", 1.0 / fd);
            assert!((general_z(&iv, 4.0, x).re - re_z(&iv, 4.0, x)).abs() < 1e-9);
        }
    }

    #[test]
    fn nontrivial_solutions() {
        assert_eq!(solve_vk(&[(-1.0, 1.0)], 4.0, 0.3).unwrap(), vec![0.3]);
        let iv = [(-1.5, -0.5), (0.5, 1.5)];
        for x in [-1.3, -0.7, 0.0, 0.8, 1.9] {
            let v = solve_vk(&iv, 4.0, x).unwrap();
            assert_eq!(v.len(), 2);
            assert!((v[1] - v_map(4.0, x)).abs() < 1e-9, "x = {x}: {v:?}");
        }
        // An asymmetric layout still has one partner per other interval.
        let iv = [(-1.8, -1.0), (-0.2, 0.3), (0.9, 1.5)];
        let v = solve_vk(&iv, 4.0, 0.1).unwrap();
        assert_eq!(v.len(), 3);
        assert!(-1.8 < v[1] && v[1] < -1.0 && 0.9 < v[2] && v[2] < 1.5);
    }

    #[test]
    fn wedge_closed_forms() {
        let p = Precision::digits(30);
        let (sym, skew) = wedge_smeared_elements(1.0, &[0.5], 0.2, p);
        assert!((sym.get(0, 0).to_f64() - PI).abs() < 1e-14);
        assert!(skew.get(0, 0).is_zero());
        let (sym, _) = wedge_smeared_elements(0.7, &[-0.4, 0.4], 0.3, p);
        assert!(sym.get(0, 1).is_zero());
        let (_, a) = wedge_smeared_elements(0.5, &[0.6, 1.1], 0.3, p);
        let (_, b) = wedge_smeared_elements(1.0, &[0.6, 1.1], 0.3, p);
        assert_eq!(a, b);
    }

    #[test]
    fn local_pairing_reproduces_the_wedge_skew_part() {
        // The wedge skew part is the local term with profile x.
        let p = Precision::digits(25);
        let spec = SmearSpec::new(interval_lattice(0.5, 3.5, 0.4), 0.4, SmearKind::Gaussian).unwrap();
        let ev = Evaluator {
            kernel: &ReferenceKernel::Wedge { mass: 0.0 },
            tf: TestFunctions::new(&spec, p),
            p,
            opts: QuadOptions::for_precision(p),
        };
        let (_, skew) = wedge_smeared_elements(0.0, &spec.peaks, spec.sigma, p);
        for (i, j) in [(0, 1), (2, 1), (3, 5)] {
            let range = (p.float(-10.0), p.float(15.0));
            let v = ev.local(i, j, &range, &[]).unwrap();
            assert!((v.to_f64() - skew.get(i, j).to_f64()).abs() < 1e-18);
        }
    }

    #[test]
    fn local_pairing_vanishes_on_the_diagonal_for_constant_profile() {
        let p = Precision::digits(20);
        let spec = SmearSpec::new(vec![0.0, 0.5], 0.3, SmearKind::Gaussian).unwrap();
        let r = reference_smeared(&ReferenceKernel::MinkowskiCone { center: 0.0, width: 3.0 }, &spec, p).unwrap();
        assert!(r.local.get(0, 0).is_zero() && r.local.get(1, 1).is_zero());
    }

    #[test]
    fn antiperiodic_single_cone_has_no_symmetric_part() {
        let p = Precision::digits(20);
        let spec = SmearSpec::new(cylinder_lattice(4.0, 0.5), 0.5, SmearKind::ThetaGaussian { period: 4.0, xi: 1 }).unwrap();
        let kernel = ReferenceKernel::CylinderCones {
            period: 4.0,
            intervals: vec![(-1.0, 1.0)],
            xi: 1,
        };
        let r = reference_smeared(&kernel, &spec, p).unwrap();
        assert!(r.sym.max_norm().is_zero());
        assert!(r.skew.is_skew());
    }

    #[test]
    fn zero_mode_is_symmetric_and_antidiagonal() {
        let p = Precision::digits(20);
        let spec = SmearSpec::new(cylinder_lattice(4.0, 0.25), 0.25, SmearKind::ThetaGaussian { period: 4.0, xi: 0 }).unwrap();
        let kernel = ReferenceKernel::CylinderCones {
            period: 4.0,
            intervals: vec![(-1.0, 1.0)],
            xi: 0,
        };
        let r = reference_smeared(&kernel, &spec, p).unwrap();
        let z = r.zero_mode.unwrap();
        assert!(z.asymmetry().to_f64() < 1e-15);
        let n = spec.len();
        let scale = z.max_norm().to_f64();
        // Entries far from x_i + x_j = 0 on the circle are negligible.
        for i in 0..n {
            for j in 0..n {
                if reduce(spec.peaks[i] + spec.peaks[j], 4.0).abs() >= 6.0 * spec.sigma {
                    assert!(z.get(i, j).to_f64().abs() < 1e-3 * scale, "({i}, {j})");
                }
            }
        }
    }

    #[test]
    fn bilocal_term_is_skew_and_localized() {
        let p = Precision::digits(20);
        let sigma = 0.25;
        let spec = SmearSpec::new(cylinder_lattice(4.0, sigma), sigma, SmearKind::ThetaGaussian { period: 4.0, xi: 1 }).unwrap();
        let kernel = ReferenceKernel::CylinderCones {
            period: 4.0,
            intervals: vec![(-1.5, -0.5), (0.5, 1.5)],
            xi: 1,
        };
        let r = reference_smeared(&kernel, &spec, p).unwrap();
        let b = r.bilocal.unwrap();
        let scale = b.max_norm().to_f64();
        let n = spec.len();
        let bt = b.transpose().neg();
        assert!(b.max_abs_diff(&bt).to_f64() < 1e-10 * scale);
        for i in 0..n {
            for j in 0..n {
                // Distance on the circle between v(x_i) and x_j.
                let d = reduce(v_map(4.0, spec.peaks[i]) - spec.peaks[j], 4.0).abs();
                let envelope = 10.0 * scale * (-(d * d) / (4.0 * sigma * sigma)).exp();
                assert!(b.get(i, j).to_f64().abs() <= envelope + 1e-12, "({i}, {j})");
            }
        }
    }

    #[test]
    fn general_solver_agrees_with_closed_form_bilocal() {
        let p = Precision::digits(16);
        let sigma = 0.5;
        let spec = SmearSpec::new(cylinder_lattice(4.0, sigma), sigma, SmearKind::ThetaGaussian { period: 4.0, xi: 1 }).unwrap();
        let tf = TestFunctions::new(&spec, p);
        let kernel = ReferenceKernel::CylinderCones {
            period: 4.0,
            intervals: vec![(-1.5, -0.5), (0.5, 1.5)],
            xi: 1,
        };
        let ev = Evaluator {
            kernel: &kernel,
            tf,
            p,
            opts: QuadOptions::for_precision(p),
        };
        // A slightly perturbed layout forces the solver path.
        let exact = ev.bilocal(1, 5, 4.0, &[(-1.5, -0.5), (0.5, 1.5)]).unwrap();
        let solved = ev.bilocal(1, 5, 4.0, &[(-1.5, -0.5 + 1e-9), (0.5, 1.5)]).unwrap();
        assert!((exact.to_f64() - solved.to_f64()).abs() < 1e-6 * exact.to_f64().abs().max(1e-3));
    }

    #[test]
    fn bound_dominates_the_cone_profile() {
        for k in 0..=200 {
            let x = -1.5 + 3.0 * k as f64 / 200.0;
            assert!(wedge_bound_profile(3.0, x) >= profile_minkowski_cone(3.0, x) - 1e-15);
        }
        assert_eq!(wedge_bound_profile(3.0, 0.0), 1.5);
        assert_eq!(wedge_bound_profile(3.0, 1.5), 0.0);
    }

    #[test]
    fn mismatched_smearing_is_rejected() {
        let p = Precision::digits(16);
        let spec = SmearSpec::new(vec![0.0, 1.0], 0.5, SmearKind::Gaussian).unwrap();
        let kernel = ReferenceKernel::CylinderCones {
            period: 4.0,
            intervals: vec![(-1.0, 1.0)],
            xi: 1,
        };
        assert!(matches!(reference_smeared(&kernel, &spec, p), Err(Error::ConfigMismatch(_))));
        let theta = SmearSpec::new(vec![0.0, 1.0], 0.5, SmearKind::ThetaGaussian { period: 4.0, xi: 0 }).unwrap();
        let two = ReferenceKernel::CylinderCones {
            period: 4.0,
            intervals: vec![(-1.5, -0.5), (0.5, 1.5)],
            xi: 0,
        };
        assert!(matches!(reference_smeared(&two, &theta, p), Err(Error::ConfigMismatch(_))));
    }
}
