//! Run configuration: a sectioned key-value (TOML) file.
//!
//! ```toml
//! name = "cyl_cone_xi1"
//!
//! [geometry]
//! ambient = "cylinder"     # or "minkowski" with `cutoff = b`
//! period = 4.0
//! intervals = [[-1.0, 1.0]]
//!
//! [kernel]
//! xi = 1
//! masses = [0.0, 0.5, 1.0]
//!
//! [grid]
//! n = 64
//! policy = "auto"          # "uniform", "auto" or "geometric" (with `growth`)
//! # digits = 96           # default: required_digits(n)
//!
//! [smear]
//! # sigma = 0.21875       # default: 3.5 widest region cells
//! # peaks = [..]          # default: lattice spaced sigma
//! # lattice = [0.5, 4.5]  # Minkowski lattice range, default: region hull
//!
//! [[slices]]
//! line = "diagonal"        # "antidiagonal" with `center`, "cross" with `offset`
//! offset = 1
//! parts = ["sym", "skew"]
//!
//! [references]
//! kinds = ["cylinder_cones"]
//!
//! [output]
//! out = "runs"
//! cache = ".modgen-cache"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Ambient, GridPolicy, GridSpec, RegionSpec};
use crate::kernel::KernelSpec;
use crate::linalg::Precision;
use crate::pipeline::required_digits;
use crate::reference::{ReferenceKernel, REFERENCE_DIGITS};
use crate::smearing::{cylinder_lattice, default_sigma, interval_lattice, LineKind, Part, SmearKind, SmearSpec};

/// Mass sweep used when a config lists none.
pub const DEFAULT_MASSES: [f64; 5] = [0.0, 0.2, 0.5, 1.0, 2.0];
pub const DEFAULT_CACHE_DIR: &str = ".modgen-cache";
pub const DEFAULT_OUT_DIR: &str = "runs";
pub const CACHE_ENV: &str = "MODGEN_CACHE";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub name: String,
    pub geometry: RawGeometry,
    #[serde(default)]
    pub kernel: RawKernel,
    pub grid: RawGrid,
    #[serde(default)]
    pub smear: RawSmear,
    #[serde(default)]
    pub slices: Vec<RawSlice>,
    #[serde(default)]
    pub references: RawReferences,
    #[serde(default)]
    pub output: RawOutput,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawGeometry {
    pub ambient: String,
    pub period: Option<f64>,
    pub cutoff: Option<f64>,
    pub intervals: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawKernel {
    #[serde(default)]
    pub xi: u8,
    pub masses: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawGrid {
    pub n: usize,
    pub policy: Option<String>,
    pub growth: Option<f64>,
    pub digits: Option<u32>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSmear {
    pub sigma: Option<f64>,
    pub peaks: Option<Vec<f64>>,
    pub lattice: Option<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSlice {
    pub line: String,
    pub offset: Option<f64>,
    pub center: Option<f64>,
    pub parts: Option<Vec<Part>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawReferences {
    #[serde(default)]
    pub kinds: Vec<String>,
    pub digits: Option<u32>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawOutput {
    pub out: Option<PathBuf>,
    pub cache: Option<PathBuf>,
    /// Pipeline matrices exported besides `m_minus`: any of `s`, `b`, `m_plus`.
    #[serde(default)]
    pub matrices: Vec<String>,
    /// Retry once at 1.5x digits if the spectrum of `B` is too close to `+-1`.
    #[serde(default)]
    pub retry_on_spectrum: bool,
}

/// A slice request: one line, one or more parts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SliceRequest {
    pub line: LineKind,
    pub parts: Vec<Part>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceKind {
    Wedge,
    CylinderCones,
    MinkowskiCone,
    WedgeBound,
}

impl ReferenceKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "wedge" => Ok(ReferenceKind::Wedge),
            "cylinder_cones" => Ok(ReferenceKind::CylinderCones),
            "minkowski_cone" => Ok(ReferenceKind::MinkowskiCone),
            "wedge_bound" => Ok(ReferenceKind::WedgeBound),
            other => Err(Error::Config(format!(
                "unknown reference kind {other:?} (expected wedge, cylinder_cones, minkowski_cone or wedge_bound)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ReferenceKind::Wedge => "wedge",
            ReferenceKind::CylinderCones => "cylinder_cones",
            ReferenceKind::MinkowskiCone => "minkowski_cone",
            ReferenceKind::WedgeBound => "wedge_bound",
        }
    }

    /// Whether the reference changes with the mass of the run.
    pub fn depends_on_mass(&self) -> bool {
        matches!(self, ReferenceKind::Wedge)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExportMatrix {
    S,
    B,
    MPlus,
}

impl ExportMatrix {
    fn parse(s: &str) -> Result<Self> {
        match s {
            "s" => Ok(ExportMatrix::S),
            "b" => Ok(ExportMatrix::B),
            "m_plus" => Ok(ExportMatrix::MPlus),
            "m_minus" => Err(Error::Config("m_minus is always exported".into())),
            other => Err(Error::Config(format!("unknown matrix {other:?} (expected s, b or m_plus)"))),
        }
    }

    pub fn file_stem(&self) -> &'static str {
        match self {
            ExportMatrix::S => "s",
            ExportMatrix::B => "b",
            ExportMatrix::MPlus => "m_plus",
        }
    }
}

/// How the smearing lattice is chosen before the grid is known.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmearSetup {
    pub sigma: Option<f64>,
    pub peaks: Option<Vec<f64>>,
    pub lattice: Option<(f64, f64)>,
}

/// A validated run configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub name: String,
    pub region: RegionSpec,
    pub xi: u8,
    pub masses: Vec<f64>,
    pub n: usize,
    pub digits: Option<u32>,
    pub policy: GridPolicy,
    pub smear: SmearSetup,
    pub slices: Vec<SliceRequest>,
    pub references: Vec<ReferenceKind>,
    pub reference_digits: u32,
    pub out_dir: PathBuf,
    pub cache_dir: PathBuf,
    pub matrices: Vec<ExportMatrix>,
    pub retry_on_spectrum: bool,
}

fn parse_line(s: &RawSlice) -> Result<LineKind> {
    let need = |v: Option<f64>, key: &str| {
        v.ok_or_else(|| Error::Config(format!("slice line {:?} needs `{key}`", s.line)))
    };
    match s.line.as_str() {
        "diagonal" => {
            let offset = s.offset.unwrap_or(0.0);
            if offset.fract() != 0.0 {
                return Err(Error::Config(format!("diagonal offset must be an integer, got {offset}")));
            }
            Ok(LineKind::DiagonalOffset { offset: offset as i64 })
        }
        "antidiagonal" => Ok(LineKind::Antidiagonal { center: need(s.center, "center")? }),
        "cross" => Ok(LineKind::CrossDiagonal { offset: need(s.offset, "offset")? }),
        other => Err(Error::Config(format!(
            "unknown slice line {other:?} (expected diagonal, antidiagonal or cross)"
        ))),
    }
}

/// Parses `diagonal:1`, `antidiagonal:0.5` or `cross:2`.
pub fn parse_line_arg(s: &str) -> Result<LineKind> {
    let (kind, value) = s
        .split_once(':')
        .ok_or_else(|| Error::Config(format!("line {s:?} must look like kind:value")))?;
    let value: f64 = value
        .parse()
        .map_err(|_| Error::Config(format!("line {s:?} has a non-numeric value")))?;
    let raw = RawSlice {
        line: kind.to_string(),
        offset: Some(value),
        center: Some(value),
        parts: None,
    };
    parse_line(&raw)
}

fn parse_policy(g: &RawGrid) -> Result<GridPolicy> {
    match g.policy.as_deref().unwrap_or("auto") {
        "uniform" => Ok(GridPolicy::Uniform),
        "auto" => Ok(GridPolicy::Auto),
        "geometric" => {
            let growth = g
                .growth
                .ok_or_else(|| Error::Config("geometric grid policy needs `growth`".into()))?;
            if !(growth.is_finite() && growth >= 1.0) {
                return Err(Error::Config(format!("growth must be at least 1, got {growth}")));
            }
            Ok(GridPolicy::Geometric { growth })
        }
        other => Err(Error::Config(format!(
            "unknown grid policy {other:?} (expected uniform, auto or geometric)"
        ))),
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        RunConfig::from_raw(&raw)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        RunConfig::from_toml_str(&text)
    }

    pub fn from_raw(raw: &RawConfig) -> Result<Self> {
        if raw.name.is_empty() || raw.name.contains(['/', '\\']) || raw.name.starts_with('.') {
            return Err(Error::Config(format!("name {:?} is not a plain directory name", raw.name)));
        }
        let g = &raw.geometry;
        let ambient = match g.ambient.as_str() {
            "cylinder" => {
                if g.cutoff.is_some() {
                    return Err(Error::Config("cylinder geometry takes `period`, not `cutoff`".into()));
                }
                Ambient::Cylinder {
                    period: g.period.ok_or_else(|| Error::Config("cylinder geometry needs `period`".into()))?,
                }
            }
            "minkowski" => {
                if g.period.is_some() {
                    return Err(Error::Config("minkowski geometry takes `cutoff`, not `period`".into()));
                }
                Ambient::Minkowski {
                    cutoff: g.cutoff.ok_or_else(|| Error::Config("minkowski geometry needs `cutoff`".into()))?,
                }
            }
            other => return Err(Error::Config(format!("unknown ambient {other:?} (expected cylinder or minkowski)"))),
        };
        let region = RegionSpec::new(ambient, g.intervals.iter().map(|iv| (iv[0], iv[1])).collect())?;

        let xi = raw.kernel.xi;
        let masses = raw.kernel.masses.clone().unwrap_or_else(|| DEFAULT_MASSES.to_vec());
        if masses.is_empty() {
            return Err(Error::Config("mass list is empty".into()));
        }
        for &m in &masses {
            KernelSpec::new(ambient, m, xi)?;
        }
        let mut sorted = masses.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("mass list has duplicates".into()));
        }

        if raw.grid.digits == Some(0) {
            return Err(Error::Config("digits must be positive".into()));
        }
        let policy = parse_policy(&raw.grid)?;

        let s = &raw.smear;
        if s.peaks.is_some() && s.lattice.is_some() {
            return Err(Error::Config("give either smear.peaks or smear.lattice, not both".into()));
        }
        if s.lattice.is_some() && ambient.is_cylinder() {
            return Err(Error::Config("smear.lattice applies to minkowski only; the circle lattice is fixed".into()));
        }
        let smear = SmearSetup {
            sigma: s.sigma,
            peaks: s.peaks.clone(),
            lattice: s.lattice.map(|l| (l[0], l[1])),
        };

        let slices = raw
            .slices
            .iter()
            .map(|sl| {
                let parts = sl.parts.clone().unwrap_or_else(|| vec![Part::Full]);
                if parts.is_empty() {
                    return Err(Error::Config(format!("slice {:?} lists no parts", sl.line)));
                }
                Ok(SliceRequest { line: parse_line(sl)?, parts })
            })
            .collect::<Result<Vec<_>>>()?;

        let references = raw
            .references
            .kinds
            .iter()
            .map(|k| ReferenceKind::parse(k))
            .collect::<Result<Vec<_>>>()?;

        let cache_dir = std::env::var_os(CACHE_ENV)
            .map(PathBuf::from)
            .or_else(|| raw.output.cache.clone())
            .unwrap_or_else(|| PathBuf::from(DEFAULT_CACHE_DIR));
        let config = RunConfig {
            name: raw.name.clone(),
            region,
            xi,
            masses,
            n: raw.grid.n,
            digits: raw.grid.digits,
            policy,
            smear,
            slices,
            references,
            reference_digits: raw.references.digits.unwrap_or(REFERENCE_DIGITS),
            out_dir: raw.output.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR)),
            cache_dir,
            matrices: raw
                .output
                .matrices
                .iter()
                .map(|m| ExportMatrix::parse(m))
                .collect::<Result<_>>()?,
            retry_on_spectrum: raw.output.retry_on_spectrum,
        };
        for kind in &config.references {
            config.reference_kernel(*kind, config.masses[0])?;
        }
        Ok(config)
    }

    pub fn ambient(&self) -> Ambient {
        self.region.ambient
    }

    pub fn precision(&self) -> Precision {
        Precision::digits(self.digits.unwrap_or_else(|| required_digits(self.n, &self.ambient())))
    }

    pub fn kernel(&self, mass: f64) -> Result<KernelSpec> {
        KernelSpec::new(self.ambient(), mass, self.xi)
    }

    pub fn grid(&self) -> Result<GridSpec> {
        GridSpec::build(&self.region, self.n, self.policy, self.precision())
    }

    /// The test functions for `grid`, checked against its resolution.
    pub fn smear_spec(&self, grid: &GridSpec) -> Result<SmearSpec> {
        let sigma = self.smear.sigma.unwrap_or_else(|| default_sigma(grid));
        let kind = match self.ambient() {
            Ambient::Cylinder { period } => SmearKind::ThetaGaussian { period, xi: self.xi },
            Ambient::Minkowski { .. } => SmearKind::Gaussian,
        };
        let peaks = match (&self.smear.peaks, self.ambient()) {
            (Some(p), _) => p.clone(),
            (None, Ambient::Cylinder { period }) => cylinder_lattice(period, sigma),
            (None, Ambient::Minkowski { .. }) => {
                let (lo, hi) = self.smear.lattice.unwrap_or_else(|| {
                    let iv = &self.region.intervals;
                    (iv[0].0, iv[iv.len() - 1].1)
                });
                interval_lattice(lo, hi, sigma)
            }
        };
        let spec = SmearSpec::new(peaks, sigma, kind)?;
        spec.check_resolution(grid)?;
        Ok(spec)
    }

    pub fn reference_precision(&self) -> Precision {
        Precision::digits(self.reference_digits)
    }

    /// The reference kernel of `kind` for this geometry at `mass`.
    pub fn reference_kernel(&self, kind: ReferenceKind, mass: f64) -> Result<ReferenceKernel> {
        let iv = &self.region.intervals;
        let single = || {
            if iv.len() != 1 {
                return Err(Error::ConfigMismatch(format!("{} reference needs a single interval", kind.name())));
            }
            Ok(iv[0])
        };
        match (kind, self.ambient()) {
            (ReferenceKind::Wedge, Ambient::Minkowski { cutoff }) => {
                let (a, b) = single()?;
                if a != 0.0 || b != cutoff {
                    return Err(Error::ConfigMismatch(format!(
                        "wedge reference needs the region [0, {cutoff}], got [{a}, {b}]"
                    )));
                }
                Ok(ReferenceKernel::Wedge { mass })
            }
            (ReferenceKind::MinkowskiCone, Ambient::Minkowski { .. }) => {
                let (a, b) = single()?;
                Ok(ReferenceKernel::MinkowskiCone {
                    center: 0.5 * (a + b),
                    width: b - a,
                })
            }
            (ReferenceKind::WedgeBound, Ambient::Minkowski { .. }) => {
                let (a, b) = single()?;
                Ok(ReferenceKernel::WedgeBound {
                    center: 0.5 * (a + b),
                    width: b - a,
                })
            }
            (ReferenceKind::CylinderCones, Ambient::Cylinder { period }) => {
                if self.xi == 0 && iv.len() > 1 {
                    return Err(Error::ConfigMismatch(
                        "the periodic zero mode is only known for a single interval".into(),
                    ));
                }
                Ok(ReferenceKernel::CylinderCones {
                    period,
                    intervals: iv.clone(),
                    xi: self.xi,
                })
            }
            (kind, ambient) => Err(Error::ConfigMismatch(format!(
                "{} reference does not apply to the {} slice",
                kind.name(),
                ambient.name()
            ))),
        }
    }
}
