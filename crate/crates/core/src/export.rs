//! Artifact files: full-precision decimal CSVs and JSON manifests.
//!
//! Matrix CSV: one `#` header line of `key=value` metadata, then one
//! comma-separated row per matrix row. Every entry is a decimal string that
//! parses back to the identical value at the recorded precision.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rug::Float;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::compare::SliceComparison;
use crate::error::{Error, Result};
use crate::linalg::{to_decimal, BigMatrix, Precision};
use crate::smearing::SliceSeries;

pub fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub fn read_file(path: &Path) -> Result<String> {
    match fs::read_to_string(path) {
        Ok(s) => Ok(s),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(Error::MissingArtifact(path.to_path_buf())),
        Err(e) => Err(Error::io(path, e)),
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("artifact types serialize");
    text.push('\n');
    write_file(path, text.as_bytes())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = read_file(path)?;
    serde_json::from_str(&text).map_err(|e| malformed(path, e.to_string()))
}

fn malformed(path: &Path, msg: impl Into<String>) -> Error {
    Error::Malformed {
        path: path.to_path_buf(),
        msg: msg.into(),
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Matrix CSV text; `meta` pairs go into the header after rows, cols and digits.
pub fn matrix_csv(m: &BigMatrix, meta: &[(&str, String)]) -> String {
    let mut out = format!(
        "# rows={} cols={} digits={}",
        m.rows(),
        m.cols(),
        m.precision().decimal_digits()
    );
    for (k, v) in meta {
        let _ = write!(out, " {k}={v}");
    }
    out.push('\n');
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(to_decimal).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn header_value<'a>(header: &'a str, key: &str) -> Option<&'a str> {
    header
        .trim_start_matches('#')
        .split_whitespace()
        .find_map(|kv| kv.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
}

pub fn parse_matrix_csv(text: &str, path: &Path) -> Result<BigMatrix> {
    let mut lines = text.lines();
    let header = lines.next().filter(|h| h.starts_with('#')).ok_or_else(|| malformed(path, "missing header"))?;
    let field = |key: &str| -> Result<usize> {
        header_value(header, key)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| malformed(path, format!("header lacks {key}")))
    };
    let (rows, cols, digits) = (field("rows")?, field("cols")?, field("digits")?);
    if digits == 0 {
        return Err(malformed(path, "zero digits"));
    }
    let p = Precision::digits(digits as u32);
    let mut data = Vec::with_capacity(rows * cols);
    let mut seen = 0;
    for line in lines.filter(|l| !l.trim().is_empty()) {
        seen += 1;
        let before = data.len();
        for entry in line.split(',') {
            data.push(p.parse(entry).map_err(|e| malformed(path, e.to_string()))?);
        }
        if data.len() - before != cols {
            return Err(malformed(path, format!("row {seen} has {} entries, expected {cols}", data.len() - before)));
        }
    }
    if seen != rows {
        return Err(malformed(path, format!("{seen} rows, expected {rows}")));
    }
    Ok(BigMatrix::from_vec(rows, cols, p, data))
}

pub fn write_matrix(path: &Path, m: &BigMatrix, meta: &[(&str, String)]) -> Result<()> {
    write_file(path, matrix_csv(m, meta).as_bytes())
}

pub fn read_matrix(path: &Path) -> Result<BigMatrix> {
    parse_matrix_csv(&read_file(path)?, path)
}

/// Slice CSV with columns `abscissa,value,part,line`.
pub fn slice_csv(s: &SliceSeries) -> String {
    let mut out = String::from("abscissa,value,part,line\n");
    let label = s.line.label();
    for (x, v) in s.abscissa.iter().zip(&s.values) {
        let _ = writeln!(out, "{x:?},{},{},{label}", to_decimal(v), s.part.name());
    }
    out
}

/// A slice read back from CSV: abscissae and values as decimal-parsed floats.
#[derive(Clone, Debug, PartialEq)]
pub struct SliceTable {
    pub abscissa: Vec<f64>,
    pub values: Vec<Float>,
    pub part: String,
    pub line: String,
}

impl SliceTable {
    pub fn values_f64(&self) -> Vec<f64> {
        self.values.iter().map(Float::to_f64).collect()
    }
}

pub fn read_slice(path: &Path, precision: Precision) -> Result<SliceTable> {
    let text = read_file(path)?;
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("abscissa,value,part,line") {
        return Err(malformed(path, "expected header abscissa,value,part,line"));
    }
    let mut t = SliceTable {
        abscissa: Vec::new(),
        values: Vec::new(),
        part: String::new(),
        line: String::new(),
    };
    for (k, line) in lines.filter(|l| !l.trim().is_empty()).enumerate() {
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 4 {
            return Err(malformed(path, format!("row {} has {} columns", k + 1, cols.len())));
        }
        let x: f64 = cols[0].parse().map_err(|_| malformed(path, format!("bad abscissa {:?}", cols[0])))?;
        t.abscissa.push(x);
        t.values.push(precision.parse(cols[1]).map_err(|e| malformed(path, e.to_string()))?);
        t.part = cols[2].to_string();
        t.line = cols[3].to_string();
    }
    Ok(t)
}

/// Comparison CSV: `abscissa,numeric,reference,abs_dev,rel_dev`; `rel_dev` is
/// empty where the reference is below the magnitude filter.
pub fn comparison_csv(c: &SliceComparison) -> String {
    let mut out = String::from("abscissa,numeric,reference,abs_dev,rel_dev\n");
    for p in &c.points {
        let rel = p.rel_dev.map(|r| format!("{r:e}")).unwrap_or_default();
        let _ = writeln!(
            out,
            "{:?},{:e},{:e},{:e},{rel}",
            p.abscissa, p.numeric, p.reference, p.abs_dev
        );
    }
    out
}

/// File name fragment for a slice: `diagonal+1_sym`.
pub fn slice_stem(line: &str, part: &str) -> String {
    format!("{line}_{part}")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

/// Hashes of `files`, given relative to `root`, in sorted order.
pub fn inventory(root: &Path, files: &[PathBuf]) -> Result<Vec<FileEntry>> {
    let mut entries = files
        .iter()
        .map(|rel| {
            let full = root.join(rel);
            let bytes = fs::read(&full).map_err(|e| Error::io(&full, e))?;
            Ok(FileEntry {
                path: rel.to_string_lossy().replace('\\', "/"),
                sha256: sha256_hex(&bytes),
                bytes: bytes.len() as u64,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    entries.sort_by(|a, b| a.path.cmp(&b.path));
    entries.dedup_by(|a, b| a.path == b.path);
    Ok(entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_lookup() {
        let h = "# rows=2 cols=3 digits=40 ambient=cylinder";
        assert_eq!(header_value(h, "rows"), Some("2"));
        assert_eq!(header_value(h, "ambient"), Some("cylinder"));
        assert_eq!(header_value(h, "n"), None);
    }

    #[test]
    fn malformed_rows_are_reported() {
        let path = Path::new("m.csv");
        assert!(matches!(parse_matrix_csv("# rows=1 cols=2 digits=20\n1,2,3\n", path), Err(Error::Malformed { .. })));
        assert!(matches!(parse_matrix_csv("1,2\n", path), Err(Error::Malformed { .. })));
        assert!(matches!(parse_matrix_csv("# rows=2 cols=1 digits=20\n1\n", path), Err(Error::Malformed { .. })));
        assert!(matches!(parse_matrix_csv("# rows=1 cols=1 digits=20\nabc\n", path), Err(Error::Malformed { .. })));
    }

    #[test]
    fn missing_file_is_a_missing_artifact() {
        let err = read_matrix(Path::new("/nonexistent/dir/m.csv")).unwrap_err();
        assert_eq!(err.exit_code(), 5);
    }
}
