//! Pointwise comparison of a numeric slice against a reference slice.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Points whose reference magnitude is below this fraction of the reference
/// slice maximum are reported but not counted in the relative deviation.
pub const MAGNITUDE_FILTER: f64 = 1e-2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointDeviation {
    pub abscissa: f64,
    pub numeric: f64,
    pub reference: f64,
    pub abs_dev: f64,
    /// `|numeric - reference| / |reference|`, absent where the point is filtered.
    pub rel_dev: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SliceSummary {
    pub line: String,
    pub part: String,
    pub points: usize,
    pub counted: usize,
    pub max_rel_dev: Option<f64>,
    pub mean_rel_dev: Option<f64>,
    pub max_abs_dev: f64,
    pub numeric_norm: f64,
    pub reference_norm: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SliceComparison {
    pub points: Vec<PointDeviation>,
    pub summary: SliceSummary,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Compares `numeric` and `reference` sampled at the same `abscissa`.
pub fn compare_series(
    line: &str,
    part: &str,
    abscissa: &[f64],
    numeric: &[f64],
    reference: &[f64],
    filter: f64,
) -> Result<SliceComparison> {
    if abscissa.len() != numeric.len() || numeric.len() != reference.len() {
        return Err(Error::InvalidInput(format!(
            "slice lengths differ: {} abscissae, {} numeric, {} reference",
            abscissa.len(),
            numeric.len(),
            reference.len()
        )));
    }
    let ref_max = reference.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let threshold = filter * ref_max;
    let points: Vec<PointDeviation> = abscissa
        .iter()
        .zip(numeric.iter().zip(reference))
        .map(|(&x, (&a, &b))| {
            let abs_dev = (a - b).abs();
            let rel_dev = (ref_max > 0.0 && b.abs() > threshold).then(|| abs_dev / b.abs());
            PointDeviation {
                abscissa: x,
                numeric: a,
                reference: b,
                abs_dev,
                rel_dev,
            }
        })
        .collect();
    let rels: Vec<f64> = points.iter().filter_map(|p| p.rel_dev).collect();
    let summary = SliceSummary {
        line: line.to_string(),
        part: part.to_string(),
        points: points.len(),
        counted: rels.len(),
        max_rel_dev: rels.iter().copied().reduce(f64::max),
        mean_rel_dev: (!rels.is_empty()).then(|| rels.iter().sum::<f64>() / rels.len() as f64),
        max_abs_dev: points.iter().fold(0.0, |m, p| m.max(p.abs_dev)),
        numeric_norm: norm(numeric),
        reference_norm: norm(reference),
    };
    Ok(SliceComparison { points, summary })
}
