//! `S -> A^{+-1/4} -> B -> artanh(B) -> M_-, M_+`.

use std::time::{Duration, Instant};

use rug::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Ambient, GridSpec};
use crate::kernel::{assemble_s, KernelSpec};
use crate::linalg::spectral::{artanh_sym, default_margin_floor};
use crate::linalg::{skew_canonical_form, BigMatrix, BigReal, Precision};

/// Decimal digits per grid cell needed to resolve `B` near `+-1`.
pub const CYLINDER_DIGITS_PER_CELL: f64 = 1.5;
pub const MINKOWSKI_DIGITS_PER_CELL: f64 = 1.75;

pub fn required_digits(n: usize, ambient: &Ambient) -> u32 {
    let factor = if ambient.is_cylinder() {
        CYLINDER_DIGITS_PER_CELL
    } else {
        MINKOWSKI_DIGITS_PER_CELL
    };
    (factor * n as f64).ceil() as u32
}

#[derive(Clone, Debug, Default)]
pub struct PipelineOptions {
    /// Overrides the default margin floor `10^(-0.8 p)`.
    pub margin_floor: Option<Float>,
    /// Retry once at 1.5x digits on `SpectrumOutOfRange`.
    pub retry_on_spectrum: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub assemble_s: f64,
    pub exp_s: f64,
    pub build_b: f64,
    pub artanh: f64,
    pub blocks: f64,
}

#[derive(Clone, Debug)]
pub struct ModularResult {
    pub s: BigMatrix,
    pub aq: BigMatrix,
    pub aq_inv: BigMatrix,
    pub b: BigMatrix,
    pub m_minus: BigMatrix,
    pub m_plus: BigMatrix,
    pub spectral_margin: BigReal,
    /// Size of the explicit `(B + B^T)/2` correction.
    pub symmetrization_defect: Float,
    pub precision: Precision,
    pub timings: StageTimings,
}

impl ModularResult {
    /// `(M_-)_sym`, `(M_-)_skew`.
    pub fn split(&self) -> (BigMatrix, BigMatrix) {
        self.m_minus.split_sym_skew()
    }

    /// `A^{1/2} = A^{1/4} A^{1/4}`.
    pub fn a_half(&self) -> BigMatrix {
        self.aq.matmul(&self.aq)
    }
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

pub fn compute_modular(grid: &GridSpec, kernel: &KernelSpec, opts: &PipelineOptions) -> Result<ModularResult> {
    match compute_once(grid, kernel, opts) {
        Err(Error::SpectrumOutOfRange { .. }) if opts.retry_on_spectrum => {
            let higher = grid.precision().scaled(1.5);
            log::warn!(
                "spectrum of B too close to +-1 at {}; retrying at {}",
                grid.precision(),
                higher
            );
            let regrid = grid.with_precision(higher)?;
            let retry = PipelineOptions {
                retry_on_spectrum: false,
                ..opts.clone()
            };
            compute_once(&regrid, kernel, &retry)
        }
        other => other,
    }
}

fn compute_once(grid: &GridSpec, kernel: &KernelSpec, opts: &PipelineOptions) -> Result<ModularResult> {
    let p = grid.precision();
    let bits = p.bits();
    let mut timings = StageTimings::default();

    let t = Instant::now();
    let s = assemble_s(grid, kernel)?;
    timings.assemble_s = secs(t.elapsed());

    let t = Instant::now();
    let canonical = skew_canonical_form(&s)?;
    let quarter = Float::with_val(bits, 0.25);
    let aq = canonical.exp(&quarter);
    let aq_inv = canonical.exp(&(-quarter));
    timings.exp_s = secs(t.elapsed());

    let t = Instant::now();
    let chi = grid.chi();
    let left = aq.matmul(&chi).matmul(&aq_inv);
    let right = aq_inv.matmul(&chi).matmul(&aq);
    let raw_b = left.add(&right).sub(&BigMatrix::identity(grid.n(), p));
    let b = raw_b.symmetrized();
    let symmetrization_defect = raw_b.max_abs_diff(&b);
    timings.build_b = secs(t.elapsed());

    let t = Instant::now();
    let floor = opts.margin_floor.clone().unwrap_or_else(|| default_margin_floor(p));
    let artanh = artanh_sym(&b, &floor)?;
    timings.artanh = secs(t.elapsed());

    let t = Instant::now();
    let two = Float::with_val(bits, 2u32);
    let m_minus = aq_inv.matmul(&artanh.matrix).matmul(&aq_inv).scale(&two);
    let m_plus = aq.matmul(&artanh.matrix).matmul(&aq).scale(&two);
    timings.blocks = secs(t.elapsed());

    Ok(ModularResult {
        s,
        aq,
        aq_inv,
        b,
        m_minus,
        m_plus,
        spectral_margin: artanh.margin,
        symmetrization_defect,
        precision: p,
        timings,
    })
}

/// Diagnostics of the pipeline invariants, as measured quantities.
#[derive(Clone, Debug, Serialize)]
pub struct Invariants {
    pub skew_defect: f64,
    pub orthogonality_defect: f64,
    pub symmetrization_defect: f64,
    pub spectral_margin: f64,
    /// `||M_+ - A^{1/2} M_- A^{1/2}||_max / ||M_-||_max`.
    pub intertwining_defect: f64,
    /// log10 of the bounds the defects are held to.
    pub half_precision_bound: f64,
    pub third_precision_bound: f64,
}

impl Invariants {
    pub fn measure(r: &ModularResult) -> Self {
        let p = r.precision;
        let n = r.s.rows();
        let skew_defect = r.s.skewness_defect().to_f64();
        let orth = r
            .aq
            .transpose()
            .matmul(&r.aq)
            .max_abs_diff(&BigMatrix::identity(n, p))
            .to_f64();
        let a_half = r.a_half();
        let inter = r.m_plus.max_abs_diff(&a_half.matmul(&r.m_minus).matmul(&a_half));
        let inter = (inter / r.m_minus.max_norm()).to_f64();
        let d = p.decimal_digits() as f64;
        Invariants {
            skew_defect,
            orthogonality_defect: orth,
            symmetrization_defect: r.symmetrization_defect.to_f64(),
            spectral_margin: r.spectral_margin.to_f64(),
            intertwining_defect: inter,
            half_precision_bound: -d / 2.0,
            third_precision_bound: -d / 3.0,
        }
    }

    pub fn hold(&self) -> bool {
        let half = 10f64.powf(self.half_precision_bound);
        let third = 10f64.powf(self.third_precision_bound);
        self.skew_defect == 0.0
            && self.orthogonality_defect <= half
            && self.symmetrization_defect <= half
            && self.spectral_margin > 0.0
            && self.intertwining_defect <= third
    }
}
