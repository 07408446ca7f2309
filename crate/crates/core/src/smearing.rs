//! Gaussian test functions, their projection onto the box basis, smeared
//! matrices and slices through them.

use rayon::prelude::*;
use rug::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::GridSpec;
use crate::linalg::{BigMatrix, Precision};
use crate::quadrature::QuadOptions;

/// Below this `sigma / cell width` ratio a warning is logged.
pub const RECOMMENDED_CELLS_PER_SIGMA: f64 = 3.5;
/// Below this ratio the spec is rejected.
pub const MIN_CELLS_PER_SIGMA: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SmearKind {
    Gaussian,
    /// Image sum over the circle, with sign `(-1)^(xi k)` on the `k`-th image.
    ThetaGaussian { period: f64, xi: u8 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmearSpec {
    pub peaks: Vec<f64>,
    pub sigma: f64,
    pub kind: SmearKind,
}

impl SmearSpec {
    pub fn new(peaks: Vec<f64>, sigma: f64, kind: SmearKind) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::Config(format!("sigma must be positive, got {sigma}")));
        }
        if peaks.is_empty() {
            return Err(Error::Config("no peaks given".into()));
        }
        if peaks.iter().any(|x| !x.is_finite()) || peaks.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("peaks must be finite and strictly ascending".into()));
        }
        if let SmearKind::ThetaGaussian { period, xi } = kind {
            if !(period > 0.0) || xi > 1 {
                return Err(Error::Config(format!("bad theta-Gaussian period {period} or xi {xi}")));
            }
        }
        Ok(SmearSpec { peaks, sigma, kind })
    }

    pub fn len(&self) -> usize {
        self.peaks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.peaks.is_empty()
    }

    /// Rejects `sigma` under twice the widest cell near the peaks and warns
    /// under the recommended ratio.
    pub fn check_resolution(&self, grid: &GridSpec) -> Result<()> {
        let lo = self.peaks[0] - self.sigma;
        let hi = self.peaks[self.peaks.len() - 1] + self.sigma;
        let h = grid.max_width_between(lo, hi);
        if self.sigma < MIN_CELLS_PER_SIGMA * h {
            return Err(Error::Config(format!(
                "sigma {} is narrower than {MIN_CELLS_PER_SIGMA} cells of width {h}",
                self.sigma
            )));
        }
        if self.sigma < RECOMMENDED_CELLS_PER_SIGMA * h {
            log::warn!("sigma {} spans fewer than {RECOMMENDED_CELLS_PER_SIGMA} cells of width {h}", self.sigma);
        }
        Ok(())
    }

    /// Uniform peak spacing, if the peaks form a lattice.
    pub fn spacing(&self) -> Option<f64> {
        if self.peaks.len() < 2 {
            return None;
        }
        let d = self.peaks[1] - self.peaks[0];
        let uniform = self
            .peaks
            .windows(2)
            .all(|w| ((w[1] - w[0]) - d).abs() <= 1e-9 * d.abs().max(1.0));
        uniform.then_some(d)
    }

    pub fn period(&self) -> Option<f64> {
        match self.kind {
            SmearKind::Gaussian => None,
            SmearKind::ThetaGaussian { period, .. } => Some(period),
        }
    }
}

/// `N = 2 round(l / 2 sigma)` peaks at `-l/2 + (k + 1/2) l / N`, symmetric
/// about zero and closed under `x -> x + l/2`.
pub fn cylinder_lattice(period: f64, sigma: f64) -> Vec<f64> {
    let count = (2.0 * (period / (2.0 * sigma)).round()).max(2.0) as usize;
    (0..count)
        .map(|k| -period / 2.0 + (k as f64 + 0.5) * period / count as f64)
        .collect()
}

/// Peaks spaced `spacing` strictly inside `(lo, hi)`, centred in the interval.
pub fn interval_lattice(lo: f64, hi: f64, spacing: f64) -> Vec<f64> {
    let count = (((hi - lo) / spacing).ceil() as usize).saturating_sub(1).max(1);
    let start = 0.5 * (lo + hi) - 0.5 * (count - 1) as f64 * spacing;
    (0..count).map(|k| start + k as f64 * spacing).collect()
}

/// `3.5` times the widest grid cell inside the region.
pub fn default_sigma(grid: &GridSpec) -> f64 {
    let widest = (0..grid.n())
        .filter(|&i| grid.mask()[i])
        .map(|i| grid.width(i).to_f64())
        .fold(0.0, f64::max);
    RECOMMENDED_CELLS_PER_SIGMA * widest
}

/// Test functions evaluated at a fixed precision.
#[derive(Clone, Debug)]
pub struct TestFunctions {
    spec: SmearSpec,
    precision: Precision,
    peaks: Vec<Float>,
    /// `2 sigma^2`.
    two_var: Float,
    sigma_sq: Float,
    /// `(pi sigma^2)^(-1/4)`.
    norm: Float,
    period: Option<Float>,
}

impl TestFunctions {
    pub fn new(spec: &SmearSpec, precision: Precision) -> Self {
        let bits = precision.bits();
        let sigma = precision.float(spec.sigma);
        let sigma_sq = Float::with_val(bits, sigma.square_ref());
        let two_var = Float::with_val(bits, &sigma_sq * 2u32);
        let mut norm = Float::with_val(bits, &sigma_sq * &precision.pi());
        norm = norm.recip_sqrt().sqrt();
        TestFunctions {
            peaks: spec.peaks.iter().map(|&x| precision.float(x)).collect(),
            spec: spec.clone(),
            precision,
            two_var,
            sigma_sq,
            norm,
            period: spec.period().map(|l| precision.float(l)),
        }
    }

    pub fn spec(&self) -> &SmearSpec {
        &self.spec
    }

    pub fn precision(&self) -> Precision {
        self.precision
    }

    pub fn len(&self) -> usize {
        self.peaks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.peaks.is_empty()
    }

    /// `exp(-y^2 / 2 sigma^2)`.
    fn bump(&self, y: &Float) -> Float {
        let mut e = Float::with_val(self.precision.bits(), y.square_ref());
        e /= &self.two_var;
        (-e).exp()
    }

    /// Images `k` with `|k| <= K` around the nearest one reach every term
    /// above `10^(-p-3)` of the peak.
    fn image_count(&self) -> i64 {
        let (Some(l), d) = (self.spec.period(), self.precision.decimal_digits() as f64) else {
            return 0;
        };
        let reach = (2.0 * (d + 3.0) * std::f64::consts::LN_10).sqrt() * self.spec.sigma;
        (reach / l).ceil() as i64 + 1
    }

    /// Sum over images of `weight(y) exp(-y^2 / 2 sigma^2)` with `y = x - x_i - k l`.
    ///
    /// `x - x_i` is first reduced to the nearest image, so the same fixed set
    /// of terms is summed everywhere and the result is smooth in `x` up to a
    /// tail below the working precision.
    fn image_sum(&self, i: usize, x: &Float, weight: impl Fn(&Float) -> Float) -> Float {
        let bits = self.precision.bits();
        let mut y0 = Float::with_val(bits, x - &self.peaks[i]);
        let Some(l) = &self.period else {
            return weight(&y0) * self.bump(&y0);
        };
        let xi = match self.spec.kind {
            SmearKind::ThetaGaussian { xi, .. } => xi,
            SmearKind::Gaussian => 0,
        };
        let k0 = Float::with_val(bits, &y0 / l).round().to_f64() as i64;
        y0 -= Float::with_val(bits, l * k0);
        let mut acc = Float::new(bits);
        for k in -self.image_count()..=self.image_count() {
            let y = Float::with_val(bits, &y0 - Float::with_val(bits, l * k));
            let term = weight(&y) * self.bump(&y);
            if xi == 1 && (k + k0).rem_euclid(2) == 1 {
                acc -= term;
            } else {
                acc += term;
            }
        }
        acc
    }

    /// `h_i(x)`.
    pub fn value(&self, i: usize, x: &Float) -> Float {
        let bits = self.precision.bits();
        self.image_sum(i, x, |_| Float::with_val(bits, 1u32)) * &self.norm
    }

    /// `h_i'(x)`.
    pub fn derivative(&self, i: usize, x: &Float) -> Float {
        let bits = self.precision.bits();
        let s = self.image_sum(i, x, |y| -Float::with_val(bits, y / &self.sigma_sq));
        s * &self.norm
    }

    /// `<e_k, h_i>` for every cell, as an `n x peaks` matrix.
    pub fn project(&self, grid: &GridSpec) -> Result<BigMatrix> {
        let opts = QuadOptions::for_precision(self.precision);
        let grid = if grid.precision() == self.precision {
            grid.clone()
        } else {
            grid.with_precision(self.precision)?
        };
        let columns: Vec<Vec<Float>> = (0..self.len())
            .into_par_iter()
            .map(|i| grid.project(|x| self.value(i, x), &opts))
            .collect::<Result<_>>()?;
        let (n, p) = (grid.n(), self.len());
        Ok(BigMatrix::from_fn(n, p, self.precision, |k, i| columns[i][k].clone()))
    }
}

/// `H^T M H`, entry `(i, j)` pairing peak `i` with peak `j`.
pub fn smeared_matrix(m: &BigMatrix, projections: &BigMatrix) -> BigMatrix {
    projections.transpose().matmul(m).matmul(projections)
}

/// Projects the test functions and smears `m` in one step.
pub fn smear(m: &BigMatrix, grid: &GridSpec, spec: &SmearSpec) -> Result<BigMatrix> {
    let tf = TestFunctions::new(spec, m.precision());
    Ok(smeared_matrix(m, &tf.project(grid)?))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LineKind {
    /// Entries `(j + offset, j)`.
    DiagonalOffset { offset: i64 },
    /// Entries with `x_i + x_j = 2 center`.
    Antidiagonal { center: f64 },
    /// Entries with `x_j = x_i + offset`, wrapped around the circle if periodic.
    CrossDiagonal { offset: f64 },
}

impl LineKind {
    pub fn label(&self) -> String {
        match self {
            LineKind::DiagonalOffset { offset } => format!("diagonal{offset:+}"),
            LineKind::Antidiagonal { center } => format!("antidiagonal@{center}"),
            LineKind::CrossDiagonal { offset } => format!("cross{offset:+}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Part {
    #[default]
    Full,
    Sym,
    Skew,
}

impl Part {
    pub fn name(&self) -> &'static str {
        match self {
            Part::Full => "full",
            Part::Sym => "sym",
            Part::Skew => "skew",
        }
    }

    /// The requested part of a square matrix.
    pub fn of(&self, m: &BigMatrix) -> BigMatrix {
        match self {
            Part::Full => m.clone(),
            Part::Sym => m.split_sym_skew().0,
            Part::Skew => m.split_sym_skew().1,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SliceSeries {
    pub line: LineKind,
    pub part: Part,
    /// Peak-index pairs `(i, j)` sampled, in abscissa order.
    pub indices: Vec<(usize, usize)>,
    pub abscissa: Vec<f64>,
    pub values: Vec<Float>,
}

impl SliceSeries {
    pub fn values_f64(&self) -> Vec<f64> {
        self.values.iter().map(Float::to_f64).collect()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `sqrt(sum v^2)`.
    pub fn norm(&self) -> f64 {
        self.values_f64().iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values_f64().iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// The same index pairs read from another matrix.
    pub fn resample(&self, smeared: &BigMatrix) -> SliceSeries {
        SliceSeries {
            values: self.indices.iter().map(|&(i, j)| smeared.get(i, j).clone()).collect(),
            ..self.clone()
        }
    }
}

fn index_error(msg: String) -> Error {
    Error::Index(msg)
}

/// Index pairs along `line` on the peak lattice, with the abscissa of each.
pub fn slice_indices(spec: &SmearSpec, line: LineKind) -> Result<Vec<(usize, usize, f64)>> {
    let peaks = &spec.peaks;
    let count = peaks.len();
    let mut out = Vec::new();
    match line {
        LineKind::DiagonalOffset { offset } => {
            if offset.unsigned_abs() as usize >= count {
                return Err(index_error(format!("diagonal offset {offset} leaves a {count}-peak lattice")));
            }
            for j in 0..count {
                let i = j as i64 + offset;
                if (0..count as i64).contains(&i) {
                    let i = i as usize;
                    out.push((i, j, 0.5 * (peaks[i] + peaks[j])));
                }
            }
        }
        LineKind::Antidiagonal { center } => {
            let d = lattice_spacing(spec)?;
            let s = (2.0 * (center - peaks[0])) / d;
            let sum = lattice_steps(s, "antidiagonal centre")?;
            for i in 0..count {
                let j = sum - i as i64;
                if (0..count as i64).contains(&j) {
                    out.push((i, j as usize, peaks[i]));
                }
            }
        }
        LineKind::CrossDiagonal { offset } => {
            let d = lattice_spacing(spec)?;
            let shift = lattice_steps(offset / d, "cross-diagonal offset")?;
            let periodic = match spec.period() {
                Some(l) => ((count as f64 * d) - l).abs() <= 1e-9 * l,
                None => false,
            };
            for i in 0..count {
                let j = i as i64 + shift;
                let j = if periodic { j.rem_euclid(count as i64) } else { j };
                if (0..count as i64).contains(&j) {
                    out.push((i, j as usize, peaks[i]));
                }
            }
        }
    }
    if out.is_empty() {
        return Err(index_error(format!("line {} misses the peak lattice", line.label())));
    }
    Ok(out)
}

fn lattice_spacing(spec: &SmearSpec) -> Result<f64> {
    spec.spacing()
        .ok_or_else(|| index_error("line needs a uniform peak lattice with at least two peaks".into()))
}

fn lattice_steps(s: f64, what: &str) -> Result<i64> {
    let r = s.round();
    if (s - r).abs() > 1e-6 {
        return Err(index_error(format!("{what} is not on the peak lattice ({s} steps)")));
    }
    Ok(r as i64)
}

/// Samples the chosen part of a smeared matrix along `line`.
pub fn extract_slice(smeared: &BigMatrix, spec: &SmearSpec, line: LineKind, part: Part) -> Result<SliceSeries> {
    if smeared.rows() != spec.len() || smeared.cols() != spec.len() {
        return Err(Error::ConfigMismatch(format!(
            "smeared matrix is {}x{} but there are {} peaks",
            smeared.rows(),
            smeared.cols(),
            spec.len()
        )));
    }
    let m = part.of(smeared);
    let picks = slice_indices(spec, line)?;
    Ok(SliceSeries {
        line,
        part,
        indices: picks.iter().map(|&(i, j, _)| (i, j)).collect(),
        abscissa: picks.iter().map(|&(_, _, x)| x).collect(),
        values: picks.iter().map(|&(i, j, _)| m.get(i, j).clone()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Ambient, GridPolicy, RegionSpec};

    fn gaussian(peaks: Vec<f64>, sigma: f64) -> SmearSpec {
        SmearSpec::new(peaks, sigma, SmearKind::Gaussian).unwrap()
    }

    #[test]
    fn peak_value() {
        let p = Precision::digits(40);
        let tf = TestFunctions::new(&gaussian(vec![0.3], 0.2), p);
        let want = (std::f64::consts::PI * 0.04).powf(-0.25);
        assert!((tf.value(0, &p.float(0.3)).to_f64() - want).abs() < 1e-14);
    }

    #[test]
    fn theta_gaussian_is_antiperiodic_for_xi_one() {
        let p = Precision::digits(40);
        let spec = SmearSpec::new(vec![0.4], 0.7, SmearKind::ThetaGaussian { period: 2.0, xi: 1 }).unwrap();
        let tf = TestFunctions::new(&spec, p);
        for x in [0.4, -0.9, 1.3] {
            let x = p.float(x);
            let shifted = Float::with_val(p.bits(), &x + 2u32);
            let a = tf.value(0, &x);
            let b = tf.value(0, &shifted);
            assert!(Float::with_val(p.bits(), &a + &b).abs() < 1e-35, "x = {x}");
            let da = tf.derivative(0, &x);
            let db = tf.derivative(0, &shifted);
            assert!(Float::with_val(p.bits(), &da + &db).abs() < 1e-35);
        }
    }

    #[test]
    fn wide_circle_reduces_to_the_gaussian() {
        let p = Precision::digits(30);
        let theta = SmearSpec::new(vec![0.0], 0.1, SmearKind::ThetaGaussian { period: 4.0, xi: 0 }).unwrap();
        let tt = TestFunctions::new(&theta, p);
        let tg = TestFunctions::new(&gaussian(vec![0.0], 0.1), p);
        let d = Float::with_val(p.bits(), tt.value(0, &p.float(0.0)) - tg.value(0, &p.float(0.0)));
        assert!(d.abs() < 1e-28);
    }

    #[test]
    fn derivative_matches_central_difference() {
        let p = Precision::digits(40);
        let spec = SmearSpec::new(vec![-0.5], 0.6, SmearKind::ThetaGaussian { period: 3.0, xi: 1 }).unwrap();
        let tf = TestFunctions::new(&spec, p);
        let h = p.pow10(-12.0);
        for x in [-1.4, 0.0, 1.2] {
            let x = p.float(x);
            let up = tf.value(0, &Float::with_val(p.bits(), &x + &h));
            let down = tf.value(0, &Float::with_val(p.bits(), &x - &h));
            let fd = Float::with_val(p.bits(), up - down) / Float::with_val(p.bits(), &h * 2u32);
            let d = Float::with_val(p.bits(), fd - tf.derivative(0, &x));
            assert!(d.abs() < 1e-18);
        }
    }

    #[test]
    fn projection_matches_erf_closed_form() {
        let p = Precision::digits(40);
        let amb = Ambient::Minkowski { cutoff: 6.0 };
        let region = RegionSpec::new(amb, vec![(0.0, 6.0)]).unwrap();
        let grid = GridSpec::build(&region, 256, GridPolicy::Uniform, p).unwrap();
        let k = 140;
        let centre = grid.midpoint(k).to_f64();
        let sigma = 0.163;
        let tf = TestFunctions::new(&gaussian(vec![centre], sigma), p);
        let h = tf.project(&grid).unwrap();
        for cell in [k - 3, k, k + 1, k + 5] {
            let (a, b) = (grid.lower(cell).to_f64(), grid.upper(cell).to_f64());
            let s2 = sigma * std::f64::consts::SQRT_2;
            let erf = |x: f64| Float::with_val(64, x).erf().to_f64();
            let want = (std::f64::consts::PI * sigma * sigma).powf(-0.25)
                * sigma
                * (std::f64::consts::PI / 2.0).sqrt()
                * (erf((b - centre) / s2) - erf((a - centre) / s2))
                / (b - a).sqrt();
            let got = h.get(cell, 0).to_f64();
            assert!((got - want).abs() <= 1e-10 * want.abs(), "cell {cell}: {got} vs {want}");
        }
    }

    #[test]
    fn wide_gaussian_keeps_its_norm() {
        let p = Precision::digits(30);
        let amb = Ambient::Cylinder { period: 4.0 };
        let region = RegionSpec::new(amb, vec![(-1.0, 1.0)]).unwrap();
        let grid = GridSpec::build(&region, 64, GridPolicy::Uniform, p).unwrap();
        let spec = SmearSpec::new(vec![0.0], 0.6, SmearKind::ThetaGaussian { period: 4.0, xi: 1 }).unwrap();
        let h = TestFunctions::new(&spec, p).project(&grid).unwrap();
        let gram = smeared_matrix(&BigMatrix::identity(64, p), &h);
        assert!((gram.get(0, 0).to_f64() - 1.0).abs() < 1e-3);
    }

    #[test]
    fn lattices() {
        let peaks = cylinder_lattice(4.0, 0.21875);
        assert_eq!(peaks.len(), 18);
        for (a, b) in peaks.iter().zip(peaks.iter().rev()) {
            assert!((a + b).abs() < 1e-12);
        }
        let wedge = interval_lattice(0.5, 4.5, 0.65625);
        assert!(wedge[0] > 0.5 && *wedge.last().unwrap() < 4.5);
        assert!((wedge[0] + wedge.last().unwrap() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn slices_on_a_small_lattice() {
        let p = Precision::digits(20);
        let spec = SmearSpec::new(vec![-1.5, -0.5, 0.5, 1.5], 0.5, SmearKind::ThetaGaussian { period: 4.0, xi: 1 }).unwrap();
        let m = BigMatrix::from_fn(4, 4, p, |i, j| p.float((10 * i + j) as f64));
        let d = extract_slice(&m, &spec, LineKind::DiagonalOffset { offset: 1 }, Part::Full).unwrap();
        assert_eq!(d.indices, vec![(1, 0), (2, 1), (3, 2)]);
        assert_eq!(d.values_f64(), vec![10.0, 21.0, 32.0]);
        let a = extract_slice(&m, &spec, LineKind::Antidiagonal { center: 0.0 }, Part::Full).unwrap();
        assert_eq!(a.indices, vec![(0, 3), (1, 2), (2, 1), (3, 0)]);
        let c = extract_slice(&m, &spec, LineKind::CrossDiagonal { offset: 2.0 }, Part::Full).unwrap();
        assert_eq!(c.indices, vec![(0, 2), (1, 3), (2, 0), (3, 1)]);
        assert!(extract_slice(&m, &spec, LineKind::DiagonalOffset { offset: 4 }, Part::Full).is_err());
        assert!(extract_slice(&m, &spec, LineKind::Antidiagonal { center: 0.3 }, Part::Full).is_err());
    }

    #[test]
    fn diagonal_of_a_diagonal_matrix() {
        let p = Precision::digits(20);
        let spec = gaussian(vec![0.0, 1.0, 2.0], 0.5);
        let m = BigMatrix::diagonal(&[p.float(1.0), p.float(2.0), p.float(3.0)], p);
        let d = extract_slice(&m, &spec, LineKind::DiagonalOffset { offset: 0 }, Part::Full).unwrap();
        assert_eq!(d.values_f64(), vec![1.0, 2.0, 3.0]);
    }
}
