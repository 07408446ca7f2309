//! C ABI for the modgen library.
//!
//! Every fallible call returns a `ModgenStatus`; on failure the message is
//! available from `modgen_last_error` on the same thread. Handles are opaque
//! and owned by the caller until passed to their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use modgen::config::RunConfig;
use modgen::geometry::{Ambient, GridPolicy, GridSpec, RegionSpec};
use modgen::kernel::KernelSpec;
use modgen::linalg::{to_decimal, BigMatrix, Precision};
use modgen::pipeline::{compute_modular, required_digits, Invariants, ModularResult, PipelineOptions};
use modgen::runner::{run, RunOptions};
use modgen::smearing::{smear, SmearKind, SmearSpec};
use modgen::Error;

/// Status codes; the nonzero values other than `NULL_ARGUMENT` and `PANIC`
/// equal the CLI exit codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModgenStatus {
    Ok = 0,
    NullArgument = 1,
    Config = 2,
    SpectrumOutOfRange = 3,
    Numerical = 4,
    MissingArtifact = 5,
    Io = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModgenAmbient {
    /// `size` is the cutoff `b` of `[-b, b]`.
    Minkowski = 0,
    /// `size` is the period `l`.
    Cylinder = 1,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModgenMatrixKind {
    S = 0,
    B = 1,
    MMinus = 2,
    MPlus = 3,
}

/// A computed modular generator with the grid it lives on.
pub struct ModgenResult {
    grid: GridSpec,
    kernel: KernelSpec,
    result: ModularResult,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> ModgenStatus {
    match e.exit_code() {
        2 => ModgenStatus::Config,
        3 => ModgenStatus::SpectrumOutOfRange,
        4 => ModgenStatus::Numerical,
        5 => ModgenStatus::MissingArtifact,
        _ => ModgenStatus::Io,
    }
}

fn guard(f: impl FnOnce() -> Result<(), ModgenStatus>) -> ModgenStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ModgenStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic");
            ModgenStatus::Panic
        }
    }
}

fn fail(e: Error) -> ModgenStatus {
    set_error(&e.to_string());
    status_of(&e)
}

fn null(what: &str) -> ModgenStatus {
    set_error(&format!("{what} is null"));
    ModgenStatus::NullArgument
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, ModgenStatus> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error(&format!("{what} is not UTF-8"));
        ModgenStatus::Config
    })
}

/// Message of the last failed call on this thread; valid until the next call.
#[no_mangle]
pub extern "C" fn modgen_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Working digits for `n` cells: `ceil(1.5 n)` on the cylinder, `ceil(1.75 n)` on Minkowski.
#[no_mangle]
pub extern "C" fn modgen_required_digits(n: usize, ambient: ModgenAmbient) -> u32 {
    let amb = match ambient {
        ModgenAmbient::Minkowski => Ambient::Minkowski { cutoff: 1.0 },
        ModgenAmbient::Cylinder => Ambient::Cylinder { period: 1.0 },
    };
    required_digits(n, &amb)
}

/// Computes `M_-` and `M_+` for the region given as `n_intervals` pairs
/// `(a, b)` in `intervals`. `digits = 0` selects `modgen_required_digits`.
///
/// # Safety
/// `intervals` must point to `2 * n_intervals` doubles and `out` to writable storage.
#[no_mangle]
pub unsafe extern "C" fn modgen_compute(
    ambient: ModgenAmbient,
    size: f64,
    intervals: *const f64,
    n_intervals: usize,
    mass: f64,
    xi: u8,
    n: usize,
    digits: u32,
    out: *mut *mut ModgenResult,
) -> ModgenStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = std::ptr::null_mut();
        if intervals.is_null() && n_intervals > 0 {
            return Err(null("intervals"));
        }
        let flat = if n_intervals == 0 {
            &[][..]
        } else {
            std::slice::from_raw_parts(intervals, 2 * n_intervals)
        };
        let amb = match ambient {
            ModgenAmbient::Minkowski => Ambient::Minkowski { cutoff: size },
            ModgenAmbient::Cylinder => Ambient::Cylinder { period: size },
        };
        let region = RegionSpec::new(amb, flat.chunks(2).map(|c| (c[0], c[1])).collect()).map_err(fail)?;
        let kernel = KernelSpec::new(amb, mass, xi).map_err(fail)?;
        let digits = if digits == 0 { required_digits(n, &amb) } else { digits };
        let grid = GridSpec::build(&region, n, GridPolicy::Auto, Precision::digits(digits)).map_err(fail)?;
        let result = compute_modular(&grid, &kernel, &PipelineOptions::default()).map_err(fail)?;
        *out = Box::into_raw(Box::new(ModgenResult { grid, kernel, result }));
        Ok(())
    })
}

/// # Safety
/// `result` must come from `modgen_compute` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn modgen_result_free(result: *mut ModgenResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// Number of grid cells, or 0 for a null handle.
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn modgen_result_dim(result: *const ModgenResult) -> usize {
    result.as_ref().map_or(0, |r| r.grid.n())
}

fn matrix_of(r: &ModgenResult, kind: ModgenMatrixKind) -> &BigMatrix {
    match kind {
        ModgenMatrixKind::S => &r.result.s,
        ModgenMatrixKind::B => &r.result.b,
        ModgenMatrixKind::MMinus => &r.result.m_minus,
        ModgenMatrixKind::MPlus => &r.result.m_plus,
    }
}

/// Copies a matrix row-major into `out` as doubles; `len` must be `dim * dim`.
///
/// # Safety
/// `result` must be a live handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn modgen_result_matrix(
    result: *const ModgenResult,
    kind: ModgenMatrixKind,
    out: *mut f64,
    len: usize,
) -> ModgenStatus {
    guard(|| {
        let r = result.as_ref().ok_or_else(|| null("result"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let m = matrix_of(r, kind);
        if len != m.rows() * m.cols() {
            set_error(&format!("buffer holds {len} values, matrix has {}", m.rows() * m.cols()));
            return Err(ModgenStatus::Config);
        }
        std::slice::from_raw_parts_mut(out, len).copy_from_slice(&m.to_f64());
        Ok(())
    })
}

/// Full-precision decimal string of entry `(i, j)`, released with `modgen_string_free`.
///
/// # Safety
/// `result` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn modgen_result_entry_decimal(
    result: *const ModgenResult,
    kind: ModgenMatrixKind,
    i: usize,
    j: usize,
    out: *mut *mut c_char,
) -> ModgenStatus {
    guard(|| {
        let r = result.as_ref().ok_or_else(|| null("result"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let m = matrix_of(r, kind);
        if i >= m.rows() || j >= m.cols() {
            set_error(&format!("entry ({i}, {j}) outside a {0}x{0} matrix", m.rows()));
            return Err(ModgenStatus::Config);
        }
        let s = CString::new(to_decimal(m.get(i, j))).expect("decimal strings have no nul");
        *out = s.into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn modgen_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// `min(1 - |lambda|)` over the spectrum of `B`, and whether every pipeline invariant holds.
///
/// # Safety
/// `result` must be a live handle; `margin` and `invariants_hold` writable or null.
#[no_mangle]
pub unsafe extern "C" fn modgen_result_diagnostics(
    result: *const ModgenResult,
    margin: *mut f64,
    invariants_hold: *mut bool,
) -> ModgenStatus {
    guard(|| {
        let r = result.as_ref().ok_or_else(|| null("result"))?;
        if let Some(m) = margin.as_mut() {
            *m = r.result.spectral_margin.to_f64();
        }
        if let Some(h) = invariants_hold.as_mut() {
            *h = Invariants::measure(&r.result).hold();
        }
        Ok(())
    })
}

/// Smeared `M_-` for Gaussians (Minkowski) or theta-Gaussians (cylinder) of
/// width `sigma` at the ascending `peaks`; writes `n_peaks^2` doubles row-major.
///
/// # Safety
/// `result` must be a live handle, `peaks` hold `n_peaks` doubles, `out` `n_peaks^2`.
#[no_mangle]
pub unsafe extern "C" fn modgen_result_smeared(
    result: *const ModgenResult,
    peaks: *const f64,
    n_peaks: usize,
    sigma: f64,
    out: *mut f64,
) -> ModgenStatus {
    guard(|| {
        let r = result.as_ref().ok_or_else(|| null("result"))?;
        if peaks.is_null() || out.is_null() {
            return Err(null("peaks or out"));
        }
        let kind = match r.kernel.ambient {
            Ambient::Cylinder { period } => SmearKind::ThetaGaussian { period, xi: r.kernel.xi },
            Ambient::Minkowski { .. } => SmearKind::Gaussian,
        };
        let peaks = std::slice::from_raw_parts(peaks, n_peaks).to_vec();
        let spec = SmearSpec::new(peaks, sigma, kind).map_err(fail)?;
        let grid = r.grid.with_precision(r.result.precision).map_err(fail)?;
        let sm = smear(&r.result.m_minus, &grid, &spec).map_err(fail)?;
        std::slice::from_raw_parts_mut(out, n_peaks * n_peaks).copy_from_slice(&sm.to_f64());
        Ok(())
    })
}

/// Runs a config file as the `run` command does. `out_dir` and `cache_dir`
/// override the config when non-null.
///
/// # Safety
/// String arguments must be null or nul-terminated.
#[no_mangle]
pub unsafe extern "C" fn modgen_run_config(
    config_path: *const c_char,
    out_dir: *const c_char,
    cache_dir: *const c_char,
    force: bool,
) -> ModgenStatus {
    guard(|| {
        let path = c_str(config_path, "config_path")?;
        let mut config = RunConfig::load(std::path::Path::new(path)).map_err(fail)?;
        if !out_dir.is_null() {
            config.out_dir = PathBuf::from(c_str(out_dir, "out_dir")?);
        }
        if !cache_dir.is_null() {
            config.cache_dir = PathBuf::from(c_str(cache_dir, "cache_dir")?);
        }
        run(&config, &RunOptions { force }).map_err(fail)?;
        Ok(())
    })
}
