//! Run orchestration behind the `run`, `compare`, `slice` and `info` commands.
//!
//! Layout of one run, per mass:
//!
//! ```text
//! <out>/<name>/config.json
//! <out>/<name>/m<mass>/run.json, manifest.json, m_minus.csv, smeared.csv
//!                     slices/<line>_<part>.csv
//!                     reference/<kind>/smeared.csv, <line>_<part>.csv
//!                     compare/<kind>/<line>_<part>.csv, summary.json
//! ```

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cache::{cache_key, Cache};
use crate::compare::{compare_series, SliceSummary, MAGNITUDE_FILTER};
use crate::config::{ReferenceKind, RunConfig, SliceRequest};
use crate::error::{Error, Result};
use crate::export::{
    comparison_csv, inventory, read_json, read_matrix, read_slice, slice_csv, slice_stem, write_file, write_json,
    write_matrix, FileEntry,
};
use crate::geometry::GridSpec;
use crate::kernel::KernelSpec;
use crate::linalg::{BigMatrix, Precision};
use crate::pipeline::{compute_modular, Invariants, ModularResult, PipelineOptions, StageTimings};
use crate::reference::{reference_smeared, ReferenceMatrices};
use crate::smearing::{extract_slice, smear, smeared_matrix, LineKind, Part, SliceSeries, SmearSpec, TestFunctions};

pub const TOOL: &str = env!("CARGO_PKG_NAME");
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Recompute even if the cache has an entry.
    pub force: bool,
}

/// What a mass directory was computed from; read back by `compare` and `slice`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub name: String,
    pub mass: f64,
    pub digits: u32,
    pub reference_digits: u32,
    pub smear: SmearSpec,
    pub slices: Vec<SliceRequest>,
    pub references: Vec<ReferenceKind>,
    pub cache_key: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunTimings {
    pub pipeline: StageTimings,
    pub pipeline_total: f64,
    pub smear: f64,
    pub references: f64,
    pub export: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub config: RunConfig,
    pub kernel: KernelSpec,
    pub cache_key: String,
    pub cache_hit: bool,
    pub digits: u32,
    pub spectral_margin: String,
    pub invariants: InvariantReport,
    pub timings: RunTimings,
    pub files: Vec<FileEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvariantReport {
    pub skew_defect: f64,
    pub orthogonality_defect: f64,
    pub symmetrization_defect: f64,
    pub spectral_margin: f64,
    pub intertwining_defect: f64,
    pub hold: bool,
}

impl From<&Invariants> for InvariantReport {
    fn from(i: &Invariants) -> Self {
        InvariantReport {
            skew_defect: i.skew_defect,
            orthogonality_defect: i.orthogonality_defect,
            symmetrization_defect: i.symmetrization_defect,
            spectral_margin: i.spectral_margin,
            intertwining_defect: i.intertwining_defect,
            hold: i.hold(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct MassRun {
    pub mass: f64,
    pub dir: PathBuf,
    pub manifest: RunManifest,
}

pub fn mass_dir_name(mass: f64) -> String {
    format!("m{mass}")
}

pub fn run_dir(config: &RunConfig) -> PathBuf {
    config.out_dir.join(&config.name)
}

/// Computes `M_-` for `kernel` on `grid`, through the cache unless `force`.
pub fn modular_cached(
    grid: &GridSpec,
    kernel: &KernelSpec,
    cache: &Cache,
    force: bool,
    retry_on_spectrum: bool,
) -> Result<(ModularResult, String, bool)> {
    let key = cache_key(kernel, grid);
    if !force {
        if let Some(r) = cache.load(&key)? {
            log::info!("cache hit {key} for mass {}", kernel.mass);
            return Ok((r, key, true));
        }
    }
    let opts = PipelineOptions {
        retry_on_spectrum,
        ..PipelineOptions::default()
    };
    let r = compute_modular(grid, kernel, &opts)?;
    cache.store(&key, &r)?;
    Ok((r, key, false))
}

struct Shared<'a> {
    config: &'a RunConfig,
    grid: GridSpec,
    spec: SmearSpec,
    projections: BigMatrix,
    fixed_refs: HashMap<ReferenceKind, ReferenceMatrices>,
    fixed_ref_time: f64,
    cache: Cache,
    root: PathBuf,
}

/// Runs every mass of `config`; masses run concurrently on the current rayon pool.
pub fn run(config: &RunConfig, opts: &RunOptions) -> Result<Vec<MassRun>> {
    let grid = config.grid()?;
    let spec = config.smear_spec(&grid)?;
    log::info!(
        "{}: n = {}, {}, {} peaks, sigma = {}",
        config.name,
        grid.n(),
        grid.precision(),
        spec.len(),
        spec.sigma
    );
    let projections = TestFunctions::new(&spec, grid.precision()).project(&grid)?;

    let t = Instant::now();
    let rp = config.reference_precision();
    let mut fixed_refs = HashMap::new();
    for &kind in config.references.iter().filter(|k| !k.depends_on_mass()) {
        let kernel = config.reference_kernel(kind, 0.0)?;
        log::info!("reference {}", kind.name());
        fixed_refs.insert(kind, reference_smeared(&kernel, &spec, rp)?);
    }
    let fixed_ref_time = t.elapsed().as_secs_f64();

    let root = run_dir(config);
    write_json(&root.join("config.json"), config)?;
    let shared = Shared {
        config,
        grid,
        spec,
        projections,
        fixed_refs,
        fixed_ref_time,
        cache: Cache::new(&config.cache_dir),
        root,
    };
    config
        .masses
        .par_iter()
        .map(|&mass| run_mass(&shared, mass, opts))
        .collect()
}

fn run_mass(sh: &Shared, mass: f64, opts: &RunOptions) -> Result<MassRun> {
    let config = sh.config;
    let kernel = config.kernel(mass)?;
    let dir = sh.root.join(mass_dir_name(mass));
    let mut timings = RunTimings::default();

    let t = Instant::now();
    let (r, key, hit) = modular_cached(&sh.grid, &kernel, &sh.cache, opts.force, config.retry_on_spectrum)?;
    timings.pipeline_total = if hit { 0.0 } else { t.elapsed().as_secs_f64() };
    timings.pipeline = r.timings.clone();
    let invariants = Invariants::measure(&r);
    if !invariants.hold() {
        log::warn!("mass {mass}: pipeline invariants fail: {invariants:?}");
    }

    let t = Instant::now();
    let smeared = if r.precision == sh.grid.precision() {
        smeared_matrix(&r.m_minus, &sh.projections)
    } else {
        smear(&r.m_minus, &sh.grid.with_precision(r.precision)?, &sh.spec)?
    };
    timings.smear = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let mut refs: Vec<(ReferenceKind, ReferenceMatrices)> = Vec::new();
    for &kind in &config.references {
        let m = match sh.fixed_refs.get(&kind) {
            Some(m) => m.clone(),
            None => reference_smeared(&config.reference_kernel(kind, mass)?, &sh.spec, config.reference_precision())?,
        };
        refs.push((kind, m));
    }
    timings.references = t.elapsed().as_secs_f64() + sh.fixed_ref_time;

    let t = Instant::now();
    let record = RunRecord {
        name: config.name.clone(),
        mass,
        digits: r.precision.decimal_digits(),
        reference_digits: config.reference_digits,
        smear: sh.spec.clone(),
        slices: config.slices.clone(),
        references: config.references.clone(),
        cache_key: key.clone(),
    };
    let meta = vec![
        ("ambient", config.ambient().name().to_string()),
        ("n", sh.grid.n().to_string()),
        ("mass", mass.to_string()),
        ("xi", config.xi.to_string()),
        ("key", key.clone()),
    ];
    let mut files: Vec<PathBuf> = Vec::new();
    let put_matrix = |rel: PathBuf, m: &BigMatrix, files: &mut Vec<PathBuf>| -> Result<()> {
        write_matrix(&dir.join(&rel), m, &meta)?;
        files.push(rel);
        Ok(())
    };
    put_matrix("m_minus.csv".into(), &r.m_minus, &mut files)?;
    for m in &config.matrices {
        let mat = match m {
            crate::config::ExportMatrix::S => &r.s,
            crate::config::ExportMatrix::B => &r.b,
            crate::config::ExportMatrix::MPlus => &r.m_plus,
        };
        put_matrix(format!("{}.csv", m.file_stem()).into(), mat, &mut files)?;
    }
    put_matrix("smeared.csv".into(), &smeared, &mut files)?;
    for (kind, m) in &refs {
        put_matrix(Path::new("reference").join(kind.name()).join("smeared.csv"), &m.total(), &mut files)?;
    }

    for req in &config.slices {
        for &part in &req.parts {
            let numeric = extract_slice(&smeared, &sh.spec, req.line, part)?;
            let stem = slice_stem(&req.line.label(), part.name());
            let rel = Path::new("slices").join(format!("{stem}.csv"));
            write_file(&dir.join(&rel), slice_csv(&numeric).as_bytes())?;
            files.push(rel);
            for (kind, m) in &refs {
                let reference = extract_slice(&m.total(), &sh.spec, req.line, part)?;
                let rel = Path::new("reference").join(kind.name()).join(format!("{stem}.csv"));
                write_file(&dir.join(&rel), slice_csv(&reference).as_bytes())?;
                files.push(rel);
            }
        }
    }
    write_json(&dir.join("run.json"), &record)?;
    files.push("run.json".into());
    for (kind, _) in &refs {
        files.extend(compare_mass_dir(&dir, *kind)?.1);
    }
    timings.export = t.elapsed().as_secs_f64();

    let manifest = RunManifest {
        tool: TOOL.to_string(),
        version: VERSION.to_string(),
        config: config.clone(),
        kernel,
        cache_key: key,
        cache_hit: hit,
        digits: r.precision.decimal_digits(),
        spectral_margin: r.spectral_margin.to_decimal(),
        invariants: (&invariants).into(),
        timings,
        files: inventory(&dir, &files)?,
    };
    write_json(&dir.join("manifest.json"), &manifest)?;
    log::info!("mass {mass}: wrote {}", dir.display());
    Ok(MassRun { mass, dir, manifest })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub reference: ReferenceKind,
    pub mass: f64,
    pub magnitude_filter: f64,
    pub slices: Vec<SliceSummary>,
}

/// Compares every slice of one mass directory against the `kind` reference,
/// writing the per-point CSVs and `summary.json` under `compare/<kind>/`.
/// Returns the report and the written files relative to `dir`.
pub fn compare_mass_dir(dir: &Path, kind: ReferenceKind) -> Result<(ComparisonReport, Vec<PathBuf>)> {
    let record: RunRecord = read_json(&dir.join("run.json"))?;
    let p = Precision::digits(record.digits);
    let rp = Precision::digits(record.reference_digits);
    let out = Path::new("compare").join(kind.name());
    let mut files = Vec::new();
    let mut slices = Vec::new();
    for req in &record.slices {
        for part in &req.parts {
            let stem = slice_stem(&req.line.label(), part.name());
            let numeric = read_slice(&dir.join("slices").join(format!("{stem}.csv")), p)?;
            let reference = read_slice(&dir.join("reference").join(kind.name()).join(format!("{stem}.csv")), rp)?;
            if numeric.abscissa != reference.abscissa {
                return Err(Error::Malformed {
                    path: dir.join("reference").join(kind.name()),
                    msg: format!("slice {stem} is sampled at different abscissae"),
                });
            }
            let c = compare_series(
                &numeric.line,
                &numeric.part,
                &numeric.abscissa,
                &numeric.values_f64(),
                &reference.values_f64(),
                MAGNITUDE_FILTER,
            )?;
            let rel = out.join(format!("{stem}.csv"));
            write_file(&dir.join(&rel), comparison_csv(&c).as_bytes())?;
            files.push(rel);
            slices.push(c.summary);
        }
    }
    let report = ComparisonReport {
        reference: kind,
        mass: record.mass,
        magnitude_filter: MAGNITUDE_FILTER,
        slices,
    };
    let rel = out.join("summary.json");
    write_json(&dir.join(&rel), &report)?;
    files.push(rel);
    Ok((report, files))
}

/// `path` itself if it is a mass directory, else its mass subdirectories.
pub fn mass_dirs(path: &Path) -> Result<Vec<PathBuf>> {
    if path.join("run.json").is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut dirs: Vec<PathBuf> = std::fs::read_dir(path)
        .map_err(|_| Error::MissingArtifact(path.join("run.json")))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join("run.json").is_file())
        .collect();
    if dirs.is_empty() {
        return Err(Error::MissingArtifact(path.join("run.json")));
    }
    dirs.sort();
    Ok(dirs)
}

pub fn compare(path: &Path, kind: ReferenceKind) -> Result<Vec<ComparisonReport>> {
    mass_dirs(path)?
        .iter()
        .map(|d| compare_mass_dir(d, kind).map(|(report, _)| report))
        .collect()
}

/// A new slice of the smeared matrix stored in mass directory `dir`.
pub fn slice_from_run(dir: &Path, line: LineKind, part: Part) -> Result<SliceSeries> {
    let record: RunRecord = read_json(&dir.join("run.json"))?;
    let smeared = read_matrix(&dir.join("smeared.csv"))?;
    extract_slice(&smeared, &record.smear, line, part)
}

#[derive(Clone, Debug, Serialize)]
pub struct MassInfo {
    pub mass: f64,
    pub cache_key: String,
    pub cached: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConfigInfo {
    pub name: String,
    pub ambient: String,
    pub n: usize,
    pub digits: u32,
    pub region_cells: usize,
    pub min_cell_width: f64,
    pub max_cell_width: f64,
    pub sigma: f64,
    pub peaks: usize,
    pub reference_digits: u32,
    pub out_dir: PathBuf,
    pub cache_dir: PathBuf,
    pub masses: Vec<MassInfo>,
}

/// Resolved settings of `config` without running anything.
pub fn info(config: &RunConfig) -> Result<ConfigInfo> {
    let grid = config.grid()?;
    let spec = config.smear_spec(&grid)?;
    let widths: Vec<f64> = (0..grid.n()).map(|i| grid.width(i).to_f64()).collect();
    let cache = Cache::new(&config.cache_dir);
    let masses = config
        .masses
        .iter()
        .map(|&mass| {
            let key = cache_key(&config.kernel(mass)?, &grid);
            Ok(MassInfo {
                mass,
                cached: cache.entry_dir(&key).join("meta.json").is_file(),
                cache_key: key,
            })
        })
        .collect::<Result<_>>()?;
    Ok(ConfigInfo {
        name: config.name.clone(),
        ambient: config.ambient().name().to_string(),
        n: grid.n(),
        digits: grid.precision().decimal_digits(),
        region_cells: grid.mask().iter().filter(|&&m| m).count(),
        min_cell_width: widths.iter().copied().fold(f64::INFINITY, f64::min),
        max_cell_width: widths.iter().copied().fold(0.0, f64::max),
        sigma: spec.sigma,
        peaks: spec.len(),
        reference_digits: config.reference_digits,
        out_dir: run_dir(config),
        cache_dir: config.cache_dir.clone(),
        masses,
    })
}
