//! On-disk cache of pipeline matrices, keyed by a hash of the mathematical inputs.
//!
//! An entry is a directory `<root>/<key>/` written under a temporary name and
//! renamed into place, so readers never see a partial entry.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::export::{read_json, read_matrix, sha256_hex, write_json, write_matrix};
use crate::geometry::{GridPolicy, GridSpec, RegionSpec};
use crate::kernel::KernelSpec;
use crate::linalg::{to_decimal, BigReal, Precision};
use crate::pipeline::{ModularResult, StageTimings};

/// Bumped whenever the cached representation or the pipeline numerics change.
pub const CACHE_FORMAT: u32 = 1;

const MATRICES: [&str; 6] = ["s", "aq", "aq_inv", "b", "m_minus", "m_plus"];

#[derive(Serialize)]
struct KeyInputs<'a> {
    format: u32,
    kernel: &'a KernelSpec,
    region: &'a RegionSpec,
    n: usize,
    policy: GridPolicy,
    complemented: bool,
    digits: u32,
}

/// SHA-256 over the kernel, the grid and the working precision.
pub fn cache_key(kernel: &KernelSpec, grid: &GridSpec) -> String {
    let inputs = KeyInputs {
        format: CACHE_FORMAT,
        kernel,
        region: &grid.region,
        n: grid.n(),
        policy: grid.policy,
        complemented: grid.is_complemented(),
        digits: grid.precision().decimal_digits(),
    };
    sha256_hex(serde_json::to_string(&inputs).expect("key inputs serialize").as_bytes())
}

#[derive(Serialize, Deserialize)]
struct EntryMeta {
    digits: u32,
    spectral_margin: String,
    symmetrization_defect: String,
}

#[derive(Clone, Debug)]
pub struct Cache {
    root: PathBuf,
}

impl Cache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Cache { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn entry_dir(&self, key: &str) -> PathBuf {
        self.root.join(key)
    }

    /// The cached result for `key`, or `None` if there is no complete entry.
    pub fn load(&self, key: &str) -> Result<Option<ModularResult>> {
        let dir = self.entry_dir(key);
        let meta_path = dir.join("meta.json");
        if !meta_path.is_file() {
            return Ok(None);
        }
        let meta: EntryMeta = read_json(&meta_path)?;
        let p = Precision::digits(meta.digits);
        let mut mats = MATRICES
            .iter()
            .map(|name| read_matrix(&dir.join(format!("{name}.csv"))))
            .collect::<Result<Vec<_>>>()?;
        if mats.iter().any(|m| m.precision() != p) {
            return Err(Error::Malformed {
                path: dir,
                msg: "matrix precision differs from the entry".into(),
            });
        }
        let mut next = || mats.remove(0);
        Ok(Some(ModularResult {
            s: next(),
            aq: next(),
            aq_inv: next(),
            b: next(),
            m_minus: next(),
            m_plus: next(),
            spectral_margin: BigReal::new(p.parse(&meta.spectral_margin)?, p),
            symmetrization_defect: p.parse(&meta.symmetrization_defect)?,
            precision: p,
            timings: StageTimings::default(),
        }))
    }

    /// Stores `result` under `key`; an existing entry is left as is.
    pub fn store(&self, key: &str, result: &ModularResult) -> Result<()> {
        let target = self.entry_dir(key);
        if target.join("meta.json").is_file() {
            return Ok(());
        }
        fs::create_dir_all(&self.root).map_err(|e| Error::io(&self.root, e))?;
        let nanos = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_nanos()).unwrap_or(0);
        let tmp = self.root.join(format!(".{key}.{}.{nanos}.tmp", std::process::id()));
        let written = (|| {
            let mats = [&result.s, &result.aq, &result.aq_inv, &result.b, &result.m_minus, &result.m_plus];
            for (name, m) in MATRICES.iter().zip(mats) {
                write_matrix(&tmp.join(format!("{name}.csv")), m, &[("key", key.to_string())])?;
            }
            write_json(
                &tmp.join("meta.json"),
                &EntryMeta {
                    digits: result.precision.decimal_digits(),
                    spectral_margin: result.spectral_margin.to_decimal(),
                    symmetrization_defect: to_decimal(&result.symmetrization_defect),
                },
            )
        })();
        if let Err(e) = written {
            let _ = fs::remove_dir_all(&tmp);
            return Err(e);
        }
        if fs::rename(&tmp, &target).is_err() {
            // Lost a race to a concurrent writer of the same key, or a stale
            // incomplete entry is in the way.
            let _ = fs::remove_dir_all(&tmp);
            if !target.join("meta.json").is_file() {
                return Err(Error::io(
                    &target,
                    std::io::Error::new(std::io::ErrorKind::AlreadyExists, "incomplete cache entry in the way"),
                ));
            }
        }
        Ok(())
    }
}
