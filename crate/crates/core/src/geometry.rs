//! Spatial grids of box functions, the region projector and function projection.

use rug::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{BigMatrix, Precision};
use crate::quadrature::{integrate, QuadOptions};

/// The spatial slice: `[-b, b]` with a large-distance cutoff, or the circle
/// `[-l/2, l/2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Ambient {
    Minkowski { cutoff: f64 },
    Cylinder { period: f64 },
}

impl Ambient {
    pub fn lower(&self) -> f64 {
        -self.half_width()
    }

    pub fn upper(&self) -> f64 {
        self.half_width()
    }

    pub fn half_width(&self) -> f64 {
        match *self {
            Ambient::Minkowski { cutoff } => cutoff,
            Ambient::Cylinder { period } => period / 2.0,
        }
    }

    pub fn is_cylinder(&self) -> bool {
        matches!(self, Ambient::Cylinder { .. })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Ambient::Minkowski { .. } => "minkowski",
            Ambient::Cylinder { .. } => "cylinder",
        }
    }

    fn validate(&self) -> Result<()> {
        let w = self.half_width();
        if !(w.is_finite() && w > 0.0) {
            return Err(Error::InvalidRegion(format!("{} size must be positive, got {}", self.name(), 2.0 * w)));
        }
        Ok(())
    }
}

/// A finite union of disjoint closed intervals in the spatial slice.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionSpec {
    pub ambient: Ambient,
    pub intervals: Vec<(f64, f64)>,
}

impl RegionSpec {
    /// Validates and sorts the intervals.
    pub fn new(ambient: Ambient, mut intervals: Vec<(f64, f64)>) -> Result<Self> {
        ambient.validate()?;
        if intervals.is_empty() {
            return Err(Error::InvalidRegion("region has no intervals".into()));
        }
        intervals.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (lo, hi) = (ambient.lower(), ambient.upper());
        for &(a, b) in &intervals {
            if !(a.is_finite() && b.is_finite() && a < b) {
                return Err(Error::InvalidRegion(format!("degenerate interval [{a}, {b}]")));
            }
            if a < lo || b > hi {
                return Err(Error::InvalidRegion(format!(
                    "interval [{a}, {b}] leaves the {} domain [{lo}, {hi}]",
                    ambient.name()
                )));
            }
        }
        for w in intervals.windows(2) {
            if w[0].1 >= w[1].0 {
                return Err(Error::InvalidRegion(format!(
                    "intervals [{}, {}] and [{}, {}] overlap or touch",
                    w[0].0, w[0].1, w[1].0, w[1].1
                )));
            }
        }
        let region = RegionSpec { ambient, intervals };
        if region.width() >= hi - lo {
            return Err(Error::InvalidRegion("region has an empty complement".into()));
        }
        Ok(region)
    }

    pub fn width(&self) -> f64 {
        self.intervals.iter().map(|(a, b)| b - a).sum()
    }

    /// The complement within the same slice, as a region of its own.
    pub fn complement(&self) -> Result<RegionSpec> {
        let intervals = self.pieces().into_iter().filter(|p| !p.inside).map(|p| (p.start, p.end)).collect();
        RegionSpec::new(self.ambient, intervals)
    }

    /// The region and complement pieces tiling the slice, left to right.
    pub fn pieces(&self) -> Vec<Piece> {
        let (lo, hi) = (self.ambient.lower(), self.ambient.upper());
        let mut out = Vec::new();
        let mut cursor = lo;
        for &(a, b) in &self.intervals {
            if a > cursor {
                out.push(Piece { start: cursor, end: a, inside: false });
            }
            out.push(Piece { start: a, end: b, inside: true });
            cursor = b;
        }
        if hi > cursor {
            out.push(Piece { start: cursor, end: hi, inside: false });
        }
        out
    }

    pub fn contains(&self, x: f64) -> bool {
        self.intervals.iter().any(|&(a, b)| a <= x && x <= b)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Piece {
    pub start: f64,
    pub end: f64,
    pub inside: bool,
}

impl Piece {
    pub fn width(&self) -> f64 {
        self.end - self.start
    }
}

/// How complement cells are laid out in the Minkowski slice. Cylinder grids
/// and complement pieces between two region intervals are always uniform.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GridPolicy {
    Uniform,
    /// End pieces start with the width of the adjacent region cells and grow
    /// by the ratio that reaches the cutoff exactly; uniform if uniform cells
    /// would be no wider than the region cells.
    #[default]
    Auto,
    /// End pieces have widths proportional to `growth^j` away from the region,
    /// rescaled to tile the piece; uniform if uniform cells would be no wider
    /// than the region cells.
    Geometric { growth: f64 },
}

#[derive(Clone, Debug)]
pub struct GridSpec {
    pub region: RegionSpec,
    pub policy: GridPolicy,
    precision: Precision,
    /// Set when the mask was flipped after building from `region`.
    complemented: bool,
    /// `n + 1` ascending boundaries; cell `i` is `[boundaries[i], boundaries[i + 1]]`.
    boundaries: Vec<Float>,
    mask: Vec<bool>,
}

/// Splits `total` cells over `widths` proportionally, at least one each,
/// with the remainder going to the widest entry.
pub fn allocate(total: usize, widths: &[f64]) -> Result<Vec<usize>> {
    if widths.is_empty() {
        return Ok(Vec::new());
    }
    if total < widths.len() {
        return Err(Error::InvalidRegion(format!(
            "{total} cells cannot cover {} intervals",
            widths.len()
        )));
    }
    let sum: f64 = widths.iter().sum();
    let mut counts: Vec<usize> = widths
        .iter()
        .map(|w| ((total as f64 * w / sum).floor() as usize).max(1))
        .collect();
    let widest = widths
        .iter()
        .enumerate()
        .fold(0, |best, (i, w)| if *w > widths[best] { i } else { best });
    let assigned: usize = counts.iter().sum();
    if assigned <= total {
        counts[widest] += total - assigned;
    } else {
        // Only possible when the minimum of one cell kicked in.
        let excess = assigned - total;
        if counts[widest] <= excess {
            return Err(Error::InvalidRegion("too few cells for the interval layout".into()));
        }
        counts[widest] -= excess;
    }
    Ok(counts)
}

impl GridSpec {
    /// `n / 2` cells in the region, `n / 2` in the complement.
    pub fn build(region: &RegionSpec, n: usize, policy: GridPolicy, precision: Precision) -> Result<Self> {
        if n < 2 || n % 2 != 0 {
            return Err(Error::InvalidRegion(format!("resolution must be even and at least 2, got {n}")));
        }
        let pieces = region.pieces();
        let inside: Vec<&Piece> = pieces.iter().filter(|p| p.inside).collect();
        let outside: Vec<&Piece> = pieces.iter().filter(|p| !p.inside).collect();
        let in_counts = allocate(n / 2, &inside.iter().map(|p| p.width()).collect::<Vec<_>>())?;
        let out_counts = allocate(n / 2, &outside.iter().map(|p| p.width()).collect::<Vec<_>>())?;

        let bits = precision.bits();
        let lo = region.ambient.lower();
        let mut boundaries = vec![precision.float(lo)];
        let mut mask = Vec::with_capacity(n);
        let (mut ii, mut oi) = (0, 0);
        for (k, piece) in pieces.iter().enumerate() {
            let count = if piece.inside {
                ii += 1;
                in_counts[ii - 1]
            } else {
                oi += 1;
                out_counts[oi - 1]
            };
            let start = precision.float(piece.start);
            let end = precision.float(piece.end);
            let widths = if piece.inside || region.ambient.is_cylinder() {
                None
            } else {
                growth_widths(&pieces, k, &in_counts, count, policy, precision)?
            };
            match widths {
                None => {
                    let step = Float::with_val(bits, &end - &start) / count as u32;
                    for j in 1..count {
                        boundaries.push(Float::with_val(bits, &start + Float::with_val(bits, &step * j as u32)));
                    }
                }
                Some((widths, grows_right)) => {
                    // Widths are ordered away from the region.
                    let ordered: Vec<&Float> = if grows_right { widths.iter().collect() } else { widths.iter().rev().collect() };
                    let mut x = start.clone();
                    for w in ordered.iter().take(count - 1) {
                        x += *w;
                        boundaries.push(x.clone());
                    }
                }
            }
            boundaries.push(end);
            mask.extend(std::iter::repeat(piece.inside).take(count));
        }
        debug_assert_eq!(boundaries.len(), n + 1);
        for w in boundaries.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::InvalidRegion("grid boundaries are not strictly ascending".into()));
            }
        }
        Ok(GridSpec {
            region: region.clone(),
            policy,
            precision,
            complemented: false,
            boundaries,
            mask,
        })
    }

    /// The same grid recomputed at a different precision.
    pub fn with_precision(&self, precision: Precision) -> Result<Self> {
        let grid = GridSpec::build(&self.region, self.n(), self.policy, precision)?;
        Ok(if self.complemented { grid.complement() } else { grid })
    }

    /// Same cells with the mask flipped, so `chi -> I - chi`.
    pub fn complement(&self) -> Self {
        let mut grid = self.clone();
        grid.complemented = !grid.complemented;
        for m in &mut grid.mask {
            *m = !*m;
        }
        grid
    }

    pub fn is_complemented(&self) -> bool {
        self.complemented
    }

    pub fn n(&self) -> usize {
        self.mask.len()
    }

    pub fn precision(&self) -> Precision {
        self.precision
    }

    pub fn ambient(&self) -> Ambient {
        self.region.ambient
    }

    pub fn boundaries(&self) -> &[Float] {
        &self.boundaries
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn lower(&self, i: usize) -> &Float {
        &self.boundaries[i]
    }

    pub fn upper(&self, i: usize) -> &Float {
        &self.boundaries[i + 1]
    }

    pub fn width(&self, i: usize) -> Float {
        Float::with_val(self.precision.bits(), self.upper(i) - self.lower(i))
    }

    pub fn midpoint(&self, i: usize) -> Float {
        let mut m = Float::with_val(self.precision.bits(), self.upper(i) + self.lower(i));
        m /= 2u32;
        m
    }

    /// `n_i = (b_i - a_i)^(-1/2)`.
    pub fn normalizer(&self, i: usize) -> Float {
        self.width(i).recip_sqrt()
    }

    pub fn max_width_between(&self, lo: f64, hi: f64) -> f64 {
        (0..self.n())
            .filter(|&i| self.upper(i).to_f64() > lo && self.lower(i).to_f64() < hi)
            .map(|i| self.width(i).to_f64())
            .fold(0.0, f64::max)
    }

    /// Diagonal 0/1 projector onto the region cells.
    pub fn chi(&self) -> BigMatrix {
        let p = self.precision;
        let values: Vec<Float> = self.mask.iter().map(|&m| if m { p.one() } else { p.zero() }).collect();
        BigMatrix::diagonal(&values, p)
    }

    /// `<e_k, h> = n_k int_{a_k}^{b_k} h(x) dx` for every cell.
    pub fn project(&self, h: impl Fn(&Float) -> Float + Sync, opts: &QuadOptions) -> Result<Vec<Float>> {
        (0..self.n())
            .map(|k| {
                let v = integrate(&h, self.lower(k), self.upper(k), opts)?;
                Ok(v * self.normalizer(k))
            })
            .collect()
    }
}

/// Growing widths for a Minkowski complement piece touching the cutoff, as
/// `(widths ordered away from the region, grows towards +x)`. `None` means
/// uniform.
fn growth_widths(
    pieces: &[Piece],
    k: usize,
    in_counts: &[usize],
    count: usize,
    policy: GridPolicy,
    precision: Precision,
) -> Result<Option<(Vec<Float>, bool)>> {
    let piece = pieces[k];
    let at_left_end = k == 0;
    let at_right_end = k + 1 == pieces.len();
    if !(at_left_end ^ at_right_end) || matches!(policy, GridPolicy::Uniform) || count == 1 {
        return Ok(None);
    }
    // The region interval adjacent to this end piece.
    let (adjacent, grows_right) = if at_left_end { (k + 1, false) } else { (k - 1, true) };
    let interval_index = pieces[..adjacent].iter().filter(|p| p.inside).count();
    let h = pieces[adjacent].width() / in_counts[interval_index] as f64;
    if piece.width() / count as f64 <= h * (1.0 + 1e-12) {
        return Ok(None);
    }
    let bits = precision.bits();
    let length = precision.float(piece.width());
    let ratio = match policy {
        GridPolicy::Uniform => unreachable!(),
        GridPolicy::Geometric { growth } => {
            if !(growth.is_finite() && growth >= 1.0) {
                return Err(Error::InvalidRegion(format!("growth factor must be at least 1, got {growth}")));
            }
            precision.float(growth)
        }
        GridPolicy::Auto => solve_ratio(&precision.float(h), &length, count, bits),
    };
    // w_j = c r^j with sum_j w_j = length.
    let mut raw = Vec::with_capacity(count);
    let mut w = precision.one();
    let mut total = precision.zero();
    for _ in 0..count {
        total += &w;
        raw.push(w.clone());
        w *= &ratio;
    }
    let scale = length / total;
    let widths = raw.into_iter().map(|w| w * &scale).collect();
    Ok(Some((widths, grows_right)))
}

/// Ratio `r > 1` with `h (r^K - 1) / (r - 1) = length`, by bisection.
fn solve_ratio(h: &Float, length: &Float, count: usize, bits: u32) -> Float {
    let total = |r: &Float| -> Float {
        let mut acc = Float::new(bits);
        let mut w = Float::with_val(bits, h);
        for _ in 0..count {
            acc += &w;
            w *= r;
        }
        acc
    };
    let mut lo = Float::with_val(bits, 1u32);
    let mut hi = Float::with_val(bits, 2u32);
    while total(&hi) < *length {
        hi *= 2u32;
    }
    for _ in 0..bits {
        let mid = Float::with_val(bits, &lo + &hi) / 2u32;
        if total(&mid) < *length {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cyl(l: f64, iv: Vec<(f64, f64)>) -> RegionSpec {
        RegionSpec::new(Ambient::Cylinder { period: l }, iv).unwrap()
    }

    #[test]
    fn equal_halves_on_the_cylinder() {
        let p = Precision::digits(30);
        let g = GridSpec::build(&cyl(4.0, vec![(-1.0, 1.0)]), 4, GridPolicy::Uniform, p).unwrap();
        let b: Vec<f64> = g.boundaries().iter().map(Float::to_f64).collect();
        assert_eq!(b, vec![-2.0, -1.0, 0.0, 1.0, 2.0]);
        assert_eq!(g.mask(), &[false, true, true, false]);
        assert!((0..4).all(|i| g.normalizer(i) == 1));
    }

    #[test]
    fn wedge_grid_is_uniform() {
        let p = Precision::digits(30);
        let r = RegionSpec::new(Ambient::Minkowski { cutoff: 6.0 }, vec![(0.0, 6.0)]).unwrap();
        let g = GridSpec::build(&r, 256, GridPolicy::Auto, p).unwrap();
        assert_eq!(g.mask().iter().filter(|&&m| m).count(), 128);
        for i in 0..256 {
            assert!((g.width(i).to_f64() - 12.0 / 256.0).abs() < 1e-25);
        }
    }

    #[test]
    fn geometric_growth_tiles_exactly() {
        let p = Precision::digits(40);
        let r = RegionSpec::new(Ambient::Minkowski { cutoff: 32.0 }, vec![(-1.0, 1.0)]).unwrap();
        for policy in [GridPolicy::Geometric { growth: 1.2 }, GridPolicy::Auto] {
            let g = GridSpec::build(&r, 64, policy, p).unwrap();
            assert_eq!(g.boundaries()[0], -32);
            assert_eq!(g.boundaries()[64], 32);
            let total = (0..64).fold(p.zero(), |acc, i| acc + g.width(i));
            assert!(Float::with_val(p.bits(), total - 64u32).abs() < 1e-35);
            // Nondecreasing away from the region on the right.
            let right: Vec<f64> = (48..64).map(|i| g.width(i).to_f64()).collect();
            assert!(right.windows(2).all(|w| w[1] >= w[0]));
            let left: Vec<f64> = (0..16).map(|i| g.width(i).to_f64()).collect();
            assert!(left.windows(2).all(|w| w[1] <= w[0]));
        }
        let g = GridSpec::build(&r, 64, GridPolicy::Auto, p).unwrap();
        // Auto starts at the region cell width.
        assert!((g.width(48).to_f64() - 2.0 / 32.0).abs() < 1e-30);
    }

    #[test]
    fn single_cell_end_pieces_fill_the_piece() {
        let p = Precision::digits(30);
        let r = RegionSpec::new(Ambient::Minkowski { cutoff: 2.0 }, vec![(-0.5, 0.5)]).unwrap();
        for policy in [GridPolicy::Auto, GridPolicy::Geometric { growth: 1.5 }] {
            let g = GridSpec::build(&r, 4, policy, p).unwrap();
            let b: Vec<f64> = g.boundaries().iter().map(Float::to_f64).collect();
            assert_eq!(b, vec![-2.0, -0.5, 0.0, 0.5, 2.0]);
        }
    }

    #[test]
    fn proportional_allocation() {
        assert_eq!(allocate(32, &[1.0, 1.0]).unwrap(), vec![16, 16]);
        assert_eq!(allocate(10, &[1.0, 2.0]).unwrap(), vec![3, 7]);
        assert_eq!(allocate(3, &[100.0, 0.001]).unwrap(), vec![2, 1]);
        assert!(allocate(1, &[1.0, 1.0]).is_err());
    }

    #[test]
    fn region_validation() {
        let amb = Ambient::Cylinder { period: 4.0 };
        assert!(RegionSpec::new(amb, vec![]).is_err());
        assert!(RegionSpec::new(amb, vec![(1.0, 0.0)]).is_err());
        assert!(RegionSpec::new(amb, vec![(-2.0, 2.0)]).is_err());
        assert!(RegionSpec::new(amb, vec![(0.0, 1.0), (0.5, 1.5)]).is_err());
        assert!(RegionSpec::new(amb, vec![(0.0, 3.0)]).is_err());
        let r = RegionSpec::new(amb, vec![(0.5, 1.5), (-1.5, -0.5)]).unwrap();
        assert_eq!(r.intervals[0], (-1.5, -0.5));
        assert_eq!(r.complement().unwrap().intervals.len(), 3);
    }

    #[test]
    fn chi_is_idempotent() {
        let p = Precision::digits(20);
        let g = GridSpec::build(&cyl(4.0, vec![(-1.5, -0.5), (0.5, 1.5)]), 16, GridPolicy::Uniform, p).unwrap();
        let chi = g.chi();
        assert_eq!(chi.matmul(&chi), chi);
        assert_eq!(chi.transpose(), chi);
    }

    #[test]
    fn projection_of_constants_and_indicators() {
        let p = Precision::digits(30);
        let opts = QuadOptions::for_precision(p);
        let g = GridSpec::build(&cyl(4.0, vec![(-1.0, 1.0)]), 4, GridPolicy::Uniform, p).unwrap();
        let ones = g.project(|_| p.one(), &opts).unwrap();
        assert!(ones.iter().all(|v| Float::with_val(p.bits(), v - 1u32).abs() < 1e-28));
        let ind = g.project(|x| if *x > 0 && *x < 1 { p.one() } else { p.zero() }, &opts).unwrap();
        assert!(ind[0].is_zero() && ind[1].is_zero() && ind[3].is_zero());
        assert!(Float::with_val(p.bits(), &ind[2] - 1u32).abs() < 1e-28);
    }
}
