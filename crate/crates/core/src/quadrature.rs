//! Adaptive Gauss-Legendre quadrature in working precision.
//!
//! Each panel is integrated with an N-point rule and compared against the
//! sum over its two halves; panels that disagree are bisected. Nodes are
//! computed once per (order, bits) by Newton iteration on `P_N` and cached.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rug::{Assign, Float};

use crate::error::{Error, Result};
use crate::linalg::Precision;

#[derive(Clone, Debug)]
pub struct QuadOptions {
    pub precision: Precision,
    /// Relative tolerance against `int |f|`, so that cancelling integrands
    /// are not driven below their rounding noise.
    pub rel_tol: Float,
    /// Absolute floor so that integrals near zero terminate.
    pub abs_tol: Float,
    pub order: usize,
    pub max_depth: u32,
}

impl QuadOptions {
    /// Relative tolerance `10^(-0.75 p)`, absolute floor `10^(-p)`,
    /// order `20 + p/3`.
    pub fn for_precision(precision: Precision) -> Self {
        let d = precision.decimal_digits() as f64;
        QuadOptions {
            precision,
            rel_tol: precision.pow10(-0.75 * d),
            abs_tol: precision.pow10(-d),
            order: 20 + precision.decimal_digits() as usize / 3,
            max_depth: 48,
        }
    }

    pub fn with_rel_tol(mut self, rel_tol: Float) -> Self {
        self.rel_tol = rel_tol;
        self
    }

    pub fn with_abs_tol(mut self, abs_tol: Float) -> Self {
        self.abs_tol = abs_tol;
        self
    }
}

/// Nodes and weights on [-1, 1].
#[derive(Debug)]
pub struct GaussLegendre {
    pub nodes: Vec<Float>,
    pub weights: Vec<Float>,
}

type RuleCache = Mutex<HashMap<(usize, u32), Arc<GaussLegendre>>>;

fn cache() -> &'static RuleCache {
    static CACHE: OnceLock<RuleCache> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// The full `order`-point rule at `bits` of precision (cached).
pub fn gauss_legendre(order: usize, bits: u32) -> Arc<GaussLegendre> {
    assert!(order >= 1);
    if let Some(rule) = cache().lock().expect("rule cache poisoned").get(&(order, bits)) {
        return rule.clone();
    }
    let rule = Arc::new(compute_rule(order, bits));
    cache()
        .lock()
        .expect("rule cache poisoned")
        .entry((order, bits))
        .or_insert(rule)
        .clone()
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: &Float, bits: u32) -> (Float, Float) {
    let mut p0 = Float::with_val(bits, 1u32);
    let mut p1 = Float::with_val(bits, x);
    for k in 2..=n {
        // k P_k = (2k - 1) x P_{k-1} - (k - 1) P_{k-2}
        let mut p2 = Float::with_val(bits, x * &p1);
        p2 *= (2 * k - 1) as u32;
        p2 -= Float::with_val(bits, &p0 * (k - 1) as u32);
        p2 /= k as u32;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (p0, Float::new(bits));
    }
    // P_n' = n (x P_n - P_{n-1}) / (x^2 - 1)
    let mut d = Float::with_val(bits, x * &p1);
    d -= &p0;
    d *= n as u32;
    let mut den = Float::with_val(bits, x * x);
    den -= 1u32;
    d /= &den;
    (p1, d)
}

fn compute_rule(order: usize, bits: u32) -> GaussLegendre {
    let work = bits + 32;
    let eps = Float::with_val(work, Float::i_exp(1, -(bits as i32) - 8));
    let mut nodes = Vec::with_capacity(order);
    let mut weights = Vec::with_capacity(order);
    for i in 0..order {
        // Tricomi's initial guess for the i-th root (descending).
        let guess = ((i as f64 + 0.75) / (order as f64 + 0.5) * std::f64::consts::PI).cos();
        let mut x = Float::with_val(work, guess);
        let mut dp = Float::new(work);
        for _ in 0..200 {
            let (p, d) = legendre(order, &x, work);
            let step = Float::with_val(work, &p / &d);
            x -= &step;
            dp = d;
            if step.abs() <= eps {
                let (_, d) = legendre(order, &x, work);
                dp = d;
                break;
            }
        }
        // w = 2 / ((1 - x^2) P_n'(x)^2)
        let mut w = Float::with_val(work, &x * &x);
        w = 1u32 - w;
        w *= Float::with_val(work, dp.square_ref());
        w.recip_mut();
        w *= 2u32;
        nodes.push(Float::with_val(bits, &x));
        weights.push(Float::with_val(bits, &w));
    }
    GaussLegendre { nodes, weights }
}

/// One panel with the fixed rule.
fn panel(f: &impl Fn(&Float) -> Float, a: &Float, b: &Float, rule: &GaussLegendre, bits: u32) -> Float {
    panel_with_abs(f, a, b, rule, bits).0
}

/// `(int f, int |f|)` over one panel.
fn panel_with_abs(f: &impl Fn(&Float) -> Float, a: &Float, b: &Float, rule: &GaussLegendre, bits: u32) -> (Float, Float) {
    let mut half = Float::with_val(bits, b - a);
    half /= 2u32;
    let mut mid = Float::with_val(bits, a + b);
    mid /= 2u32;
    let mut acc = Float::new(bits);
    let mut abs = Float::new(bits);
    let mut x = Float::new(bits);
    for (t, w) in rule.nodes.iter().zip(&rule.weights) {
        x.assign(t * &half);
        x += &mid;
        let fx = Float::with_val(bits, f(&x) * w);
        abs += Float::with_val(bits, fx.abs_ref());
        acc += fx;
    }
    (acc * &half, abs * half)
}

/// `int_a^b f(x) dx`. Reversed limits are allowed; `a == b` gives zero.
pub fn integrate(f: impl Fn(&Float) -> Float, a: &Float, b: &Float, opts: &QuadOptions) -> Result<Float> {
    let bits = opts.precision.bits();
    if a == b {
        return Ok(Float::new(bits));
    }
    if b < a {
        return integrate(f, b, a, opts).map(|v| -v);
    }
    let rule = gauss_legendre(opts.order, bits);
    let (whole, mass) = panel_with_abs(&f, a, b, &rule, bits);
    let mut target = mass;
    target *= &opts.rel_tol;
    if target < opts.abs_tol {
        target.assign(&opts.abs_tol);
    }
    let length = Float::with_val(bits, b - a);
    let mut state = Adaptive {
        f: &f,
        rule: &rule,
        bits,
        target,
        length,
        max_depth: opts.max_depth,
    };
    state.recurse(a, b, whole, 0)
}

struct Adaptive<'a, F> {
    f: &'a F,
    rule: &'a GaussLegendre,
    bits: u32,
    target: Float,
    length: Float,
    max_depth: u32,
}

impl<F: Fn(&Float) -> Float> Adaptive<'_, F> {
    fn recurse(&mut self, a: &Float, b: &Float, whole: Float, depth: u32) -> Result<Float> {
        let mut mid = Float::with_val(self.bits, a + b);
        mid /= 2u32;
        let left = panel(self.f, a, &mid, self.rule, self.bits);
        let right = panel(self.f, &mid, b, self.rule, self.bits);
        let halves = Float::with_val(self.bits, &left + &right);
        let err = Float::with_val(self.bits, &halves - &whole).abs();
        // Local share of the global target, proportional to panel length.
        let mut local = Float::with_val(self.bits, b - a);
        local /= &self.length;
        local *= &self.target;
        if !halves.is_finite() {
            return Err(self.failure(a, b, &err));
        }
        if err <= local {
            return Ok(halves);
        }
        if depth >= self.max_depth {
            return Err(self.failure(a, b, &err));
        }
        let l = self.recurse(a, &mid, left, depth + 1)?;
        let r = self.recurse(&mid, b, right, depth + 1)?;
        Ok(l + r)
    }

    fn failure(&self, a: &Float, b: &Float, err: &Float) -> Error {
        Error::QuadratureFailure {
            a: a.to_f64(),
            b: b.to_f64(),
            tol: self.target.to_f64(),
            err: err.to_f64(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_weights_sum_to_two() {
        let p = Precision::digits(60);
        for order in [1usize, 2, 5, 40] {
            let rule = gauss_legendre(order, p.bits());
            let total = rule.weights.iter().fold(p.zero(), |acc, w| acc + w);
            let d = Float::with_val(p.bits(), total - 2u32).abs();
            assert!(d < 1e-55, "order {order}: {}", d.to_f64());
        }
    }

    #[test]
    fn polynomial_exactness() {
        // An N-point rule integrates x^(2N-1) exactly.
        let p = Precision::digits(50);
        let opts = QuadOptions::for_precision(p);
        let rule = gauss_legendre(opts.order, p.bits());
        let deg = (2 * opts.order - 2) as u32;
        let v = panel(&|x: &Float| rug::ops::Pow::pow(x.clone(), deg), &p.float(0.0), &p.float(1.0), &rule, p.bits());
        let exact = p.one() / (deg + 1);
        assert!(Float::with_val(p.bits(), v - exact).abs() < 1e-48);
    }

    #[test]
    fn smooth_integral_at_high_precision() {
        let p = Precision::digits(120);
        let opts = QuadOptions::for_precision(p);
        let v = integrate(|x| x.clone().exp(), &p.float(0.0), &p.float(3.0), &opts).unwrap();
        let exact = p.float(3.0).exp() - 1u32;
        let rel = Float::with_val(p.bits(), (v - &exact) / &exact).abs();
        assert!(rel < p.pow10(-90.0));
    }

    #[test]
    fn reversed_and_empty_limits() {
        let p = Precision::digits(30);
        let opts = QuadOptions::for_precision(p);
        let f = |x: &Float| x.clone();
        let fwd = integrate(f, &p.float(0.0), &p.float(2.0), &opts).unwrap();
        let back = integrate(f, &p.float(2.0), &p.float(0.0), &opts).unwrap();
        assert_eq!(fwd, -back);
        assert!(integrate(f, &p.float(1.0), &p.float(1.0), &opts).unwrap().is_zero());
    }

    #[test]
    fn peaked_integrand_is_refined() {
        // A narrow Gaussian needs bisection.
        let p = Precision::digits(40);
        let opts = QuadOptions::for_precision(p);
        let v = integrate(
            |x| {
                let y = Float::with_val(x.prec(), x * 50u32);
                (-y.square()).exp()
            },
            &p.float(-1.0),
            &p.float(1.0),
            &opts,
        )
        .unwrap();
        let exact = p.pi().sqrt() / 50u32 * p.float(50.0).erf();
        assert!(Float::with_val(p.bits(), v - exact).abs() < 1e-28);
    }

    #[test]
    fn non_integrable_fails() {
        let p = Precision::digits(20);
        let mut opts = QuadOptions::for_precision(p);
        opts.max_depth = 10;
        let err = integrate(|x| x.clone().recip(), &p.float(0.0), &p.float(1.0), &opts).unwrap_err();
        assert!(matches!(err, Error::QuadratureFailure { .. }));
    }
}
