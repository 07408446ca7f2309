//! Direct two-dimensional quadrature of the Minkowski kernel
//! `e^{-m|x-y|} / (x - y)` over pairs of cells.

#![allow(dead_code)]

use modgen::geometry::{Ambient, GridPolicy, GridSpec, RegionSpec};
use modgen::kernel::{assemble_s, KernelSpec};
use modgen::linalg::Precision;

/// Tanh-sinh rule on `[a, b]`; copes with integrable endpoint singularities.
pub fn tanh_sinh(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let h = 1.0 / 64.0;
    let half = 0.5 * (b - a);
    let mut sum = 0.0;
    let kmax = (3.5 / h) as i64;
    for k in -kmax..=kmax {
        let t = k as f64 * h;
        let u = std::f64::consts::FRAC_PI_2 * t.sinh();
        let cosh_u = u.cosh();
        // Distance of the node from the nearer endpoint, without cancellation.
        let gap = 1.0 / (u.abs().exp() * cosh_u);
        if gap == 0.0 {
            continue;
        }
        let x = if t < 0.0 { a + half * gap } else { b - half * gap };
        if x <= a || x >= b {
            continue;
        }
        let w = std::f64::consts::FRAC_PI_2 * t.cosh() / (cosh_u * cosh_u);
        sum += w * f(x);
    }
    sum * half * h
}

/// `n_i n_j int_{cell i} int_{cell j} S(x - y) dy dx`, as a principal value on
/// the diagonal.
pub fn oracle_entry(mass: f64, (a, b): (f64, f64), (c, d): (f64, f64)) -> f64 {
    let kernel = |u: f64| (-mass * u.abs()).exp() / u;
    let norm = 1.0 / ((b - a) * (d - c)).sqrt();
    if (a, b) == (c, d) {
        // Pair y with 2x - y: the odd kernel cancels inside `|x - y| < min(x - a, b - x)`.
        let inner = |x: f64| {
            let r = (x - a).min(b - x);
            let left = if x - r > a { tanh_sinh(|y| kernel(x - y), a, x - r) } else { 0.0 };
            let right = if x + r < b { tanh_sinh(|y| kernel(x - y), x + r, b) } else { 0.0 };
            left + right
        };
        return norm * tanh_sinh(inner, a, b);
    }
    norm * tanh_sinh(|x| tanh_sinh(|y| kernel(x - y), c, d), a, b)
}

/// Worst entry of the assembled Minkowski `S` against the oracle, as
/// `(|got - want| / max(|want|, 1), i, j, got, want)`.
pub fn worst_oracle_deviation(cutoff: f64, interval: (f64, f64), n: usize, mass: f64) -> (f64, usize, usize, f64, f64) {
    let amb = Ambient::Minkowski { cutoff };
    let region = RegionSpec::new(amb, vec![interval]).unwrap();
    let grid = GridSpec::build(&region, n, GridPolicy::Auto, Precision::digits(40)).unwrap();
    let s = assemble_s(&grid, &KernelSpec::new(amb, mass, 0).unwrap()).unwrap();
    let cells: Vec<(f64, f64)> = (0..n).map(|i| (grid.lower(i).to_f64(), grid.upper(i).to_f64())).collect();
    let mut worst = (0.0, 0, 0, 0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            let want = oracle_entry(mass, cells[i], cells[j]);
            let got = s.get(i, j).to_f64();
            let d = (got - want).abs() / want.abs().max(1.0);
            if d >= worst.0 {
                worst = (d, i, j, got, want);
            }
        }
    }
    worst
}
