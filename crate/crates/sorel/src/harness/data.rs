//! CSV ingestion, column standardization, and the synthetic regression
//! generator used for desk-scale experiments.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::Dataset;

/// Parses a rectangular numeric CSV with a mandatory header row; the last
/// column is the regression target. Parse failures name the offending data
/// row (1-based, header excluded) and column.
pub fn load_csv(path: &Path) -> Result<Dataset> {
    let parse_err = |message: String| Error::Parse {
        path: path.to_path_buf(),
        message,
    };
    let text = std::fs::read_to_string(path).map_err(|e| parse_err(format!("cannot read: {e}")))?;
    let mut lines = text.lines();
    let header = match lines.next() {
        Some(h) if !h.trim().is_empty() => h,
        _ => return Err(parse_err("no data rows".to_string())),
    };
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();
    if columns.len() < 2 {
        return Err(parse_err(format!(
            "need at least 2 columns (features + target), found {}",
            columns.len()
        )));
    }

    let mut features = Vec::new();
    let mut targets = Vec::new();
    let mut n = 0usize;
    for (idx, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = idx + 1;
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != columns.len() {
            return Err(parse_err(format!(
                "row {row}: expected {} columns, found {}",
                columns.len(),
                cells.len()
            )));
        }
        for (j, cell) in cells.iter().enumerate() {
            let value: f64 = cell.parse().map_err(|_| {
                parse_err(format!(
                    "row {row}, column `{}` (index {j}): non-numeric value `{cell}`",
                    columns[j]
                ))
            })?;
            if j + 1 == cells.len() {
                targets.push(value);
            } else {
                features.push(value);
            }
        }
        n += 1;
    }
    if n == 0 {
        return Err(parse_err("no data rows".to_string()));
    }
    Dataset::new(features, targets, n, columns.len() - 1)
}

/// Column transform fitted by [`standardize`], reusable on held-out data.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardizeParams {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

/// Transforms every feature column to zero mean and unit population
/// variance; targets are untouched. Constant columns are centered only
/// (they become exactly zero) with a warning.
pub fn standardize(dataset: &Dataset) -> Result<(Dataset, StandardizeParams)> {
    let n = dataset.n();
    if n < 2 {
        return Err(Error::invalid(
            "dataset",
            "standardization needs at least 2 rows",
        ));
    }
    let d = dataset.d();
    let mut means = vec![0.0; d];
    let mut scales = vec![1.0; d];
    for j in 0..d {
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        let mut sum = 0.0;
        for i in 0..n {
            let v = dataset.row(i)[j];
            min = min.min(v);
            max = max.max(v);
            sum += v;
        }
        if min == max {
            log::warn!("feature column {j} is constant; centering without scaling");
            means[j] = min;
            scales[j] = 1.0;
            continue;
        }
        let mean = sum / n as f64;
        let var = (0..n)
            .map(|i| {
                let c = dataset.row(i)[j] - mean;
                c * c
            })
            .sum::<f64>()
            / n as f64;
        means[j] = mean;
        scales[j] = var.sqrt();
    }
    let params = StandardizeParams { means, scales };
    Ok((apply_standardization(dataset, &params)?, params))
}

/// Applies a fitted transform to a dataset with the same width.
pub fn apply_standardization(dataset: &Dataset, params: &StandardizeParams) -> Result<Dataset> {
    let d = dataset.d();
    if params.means.len() != d {
        return Err(Error::LengthMismatch {
            expected: d,
            actual: params.means.len(),
        });
    }
    let n = dataset.n();
    let mut features = Vec::with_capacity(n * d);
    for i in 0..n {
        for (j, &v) in dataset.row(i).iter().enumerate() {
            features.push((v - params.means[j]) / params.scales[j]);
        }
    }
    Dataset::new(features, dataset.targets().to_vec(), n, d)
}

/// Seed-controlled synthetic regression task: standard Gaussian features, a
/// planted weight vector of unit expected norm, Gaussian observation noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n: usize,
    pub d: usize,
    /// Standard deviation of the additive noise.
    #[serde(default = "default_noise")]
    pub noise: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_noise() -> f64 {
    0.5
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    if spec.n == 0 || spec.d == 0 {
        return Err(Error::invalid("synthetic", "n and d must be positive"));
    }
    if spec.noise.is_nan() || spec.noise < 0.0 {
        return Err(Error::invalid("synthetic", "noise must be nonnegative"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let planted: Vec<f64> = (0..spec.d)
        .map(|_| normal.sample(&mut rng) / (spec.d as f64).sqrt())
        .collect();
    let mut features = Vec::with_capacity(spec.n * spec.d);
    let mut targets = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let row: Vec<f64> = (0..spec.d).map(|_| normal.sample(&mut rng)).collect();
        let clean: f64 = row.iter().zip(&planted).map(|(x, w)| x * w).sum();
        targets.push(clean + spec.noise * normal.sample(&mut rng));
        features.extend(row);
    }
    Dataset::new(features, targets, spec.n, spec.d)
}
