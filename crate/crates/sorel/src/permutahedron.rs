//! Linear maximization and Euclidean projection over the permutahedron.
//!
//! The permutahedron of a weight vector `sigma` is the convex hull of all
//! permutations of `sigma`. A point belongs to it iff its coordinate sum
//! equals the sum of `sigma` and, for every k, the sum of its k largest
//! coordinates is at most the sum of the k largest entries of `sigma`
//! (majorization). Linear maximization is a sort; Euclidean projection
//! reduces to isotonic regression on the sorted point.

use crate::error::{Error, Result};
use crate::spectra::SpectralWeights;

/// Monotonicity direction for isotonic regression.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Nondecreasing,
    Nonincreasing,
}

/// A dual point `lambda` inside the permutahedron.
#[derive(Debug, Clone, PartialEq)]
pub struct DualPoint {
    coords: Vec<f64>,
}

impl DualPoint {
    /// Membership-checked constructor.
    pub fn new(coords: Vec<f64>, sigma: &SpectralWeights, tol: f64) -> Result<Self> {
        let violation = membership_violation(&coords, sigma);
        if violation > tol {
            return Err(Error::NotInPermutahedron { violation, tol });
        }
        Ok(Self { coords })
    }

    pub(crate) fn new_unchecked(coords: Vec<f64>) -> Self {
        Self { coords }
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }
}

/// Largest violation of the two membership conditions (sum equality and
/// majorization); zero or negative means the point is inside.
fn membership_violation(point: &[f64], sigma: &SpectralWeights) -> f64 {
    if point.len() != sigma.n() || point.iter().any(|v| !v.is_finite()) {
        return f64::INFINITY;
    }
    let sigma_sum: f64 = sigma.weights().iter().sum();
    let point_sum: f64 = point.iter().sum();
    let mut violation = (point_sum - sigma_sum).abs();

    let mut desc = point.to_vec();
    desc.sort_by(|a, b| b.partial_cmp(a).unwrap());
    // sigma is stored ascending, so its k largest entries are the last k.
    let w = sigma.weights();
    let mut point_prefix = 0.0;
    let mut sigma_prefix = 0.0;
    for k in 0..desc.len() {
        point_prefix += desc[k];
        sigma_prefix += w[w.len() - 1 - k];
        violation = violation.max(point_prefix - sigma_prefix);
    }
    violation
}

/// True iff `point` satisfies the permutahedron membership conditions at
/// tolerance `tol`.
pub fn contains(point: &[f64], sigma: &SpectralWeights, tol: f64) -> bool {
    membership_violation(point, sigma) <= tol
}

/// Linear maximization oracle: the vertex of the permutahedron maximizing
/// `<lambda, scores>`, i.e. `sigma` permuted so the largest weight meets the
/// largest score. Ties in `scores` are broken by index (stable).
pub fn lmo(scores: &[f64], sigma: &SpectralWeights) -> Result<DualPoint> {
    if scores.len() != sigma.n() {
        return Err(Error::LengthMismatch {
            expected: sigma.n(),
            actual: scores.len(),
        });
    }
    if scores.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { context: "lmo scores" });
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap().then(a.cmp(&b)));
    let mut coords = vec![0.0; scores.len()];
    for (rank, &i) in idx.iter().enumerate() {
        coords[i] = sigma.weights()[rank];
    }
    Ok(DualPoint::new_unchecked(coords))
}

/// Euclidean projection onto the monotone cone in the given direction,
/// computed by pool-adjacent-violators in one pass with block merging.
pub fn isotonic_regression(y: &[f64], direction: Direction) -> Result<Vec<f64>> {
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { context: "isotonic regression input" });
    }
    match direction {
        Direction::Nondecreasing => Ok(pava_nondecreasing(y.iter().copied())),
        Direction::Nonincreasing => {
            let mut out = pava_nondecreasing(y.iter().map(|v| -v));
            for v in out.iter_mut() {
                *v = -*v;
            }
            Ok(out)
        }
    }
}

fn pava_nondecreasing(values: impl Iterator<Item = f64>) -> Vec<f64> {
    // Blocks of (mean, count); merge while the new block undercuts its
    // predecessor.
    let mut mean: Vec<f64> = Vec::new();
    let mut count: Vec<usize> = Vec::new();
    let mut total = 0usize;
    for v in values {
        total += 1;
        mean.push(v);
        count.push(1);
        while mean.len() > 1 && mean[mean.len() - 2] > mean[mean.len() - 1] {
            let (m2, c2) = (mean.pop().unwrap(), count.pop().unwrap());
            let j = mean.len() - 1;
            let c1 = count[j];
            mean[j] = (mean[j] * c1 as f64 + m2 * c2 as f64) / (c1 + c2) as f64;
            count[j] = c1 + c2;
        }
    }
    let mut out = Vec::with_capacity(total);
    for (m, c) in mean.into_iter().zip(count) {
        out.extend(std::iter::repeat_n(m, c));
    }
    out
}

/// Euclidean projection onto the permutahedron: sort the point descending,
/// take the nonincreasing isotonic fit of (sorted point - descending sigma)
/// as the correction, subtract, and undo the sort.
pub fn project(point: &[f64], sigma: &SpectralWeights) -> Result<DualPoint> {
    let n = sigma.n();
    if point.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            actual: point.len(),
        });
    }
    if point.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { context: "projection input" });
    }
    // All weights equal: the permutahedron is the single point sigma.
    if sigma.is_uniform() {
        return Ok(DualPoint::new_unchecked(sigma.weights().to_vec()));
    }

    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| point[b].partial_cmp(&point[a]).unwrap().then(a.cmp(&b)));

    let w = sigma.weights();
    let diff: Vec<f64> = idx
        .iter()
        .enumerate()
        .map(|(rank, &i)| point[i] - w[n - 1 - rank])
        .collect();
    let correction = pava_nondecreasing(diff.iter().map(|v| -v));

    let mut coords = vec![0.0; n];
    for (rank, &i) in idx.iter().enumerate() {
        coords[i] = point[i] + correction[rank];
    }
    Ok(DualPoint::new_unchecked(coords))
}
