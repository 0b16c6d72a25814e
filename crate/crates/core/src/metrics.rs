//! Absolute cosine similarities, optimal column alignment and replicate
//! summaries.

use crate::error::{PplsError, Result};
use crate::linalg::Mat;

/// `|u·v| / (‖u‖‖v‖)`.
pub fn abs_cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(PplsError::Dimension(format!(
            "vectors have lengths {} and {}",
            u.len(),
            v.len()
        )));
    }
    let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 || !nu.is_finite() || !nv.is_finite() {
        return Err(PplsError::InvalidInput(
            "cosine similarity needs nonzero finite vectors".into(),
        ));
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    Ok((dot.abs() / (nu * nv)).min(1.0))
}

/// Matching of estimated columns to reference columns.
///
/// `permutation[i]` is the estimate column matched to reference column `i`,
/// `signs[i]` the sign that makes their inner product nonnegative and
/// `abs_cos[i]` their absolute cosine.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentResult {
    pub permutation: Vec<usize>,
    pub signs: Vec<f64>,
    pub abs_cos: Vec<f64>,
}

impl AlignmentResult {
    pub fn total(&self) -> f64 {
        self.abs_cos.iter().sum()
    }

    /// Estimate columns reordered and sign-flipped to line up with the reference.
    pub fn apply(&self, estimate: &Mat) -> Mat {
        let mut out = Mat::zeros(estimate.nrows(), self.permutation.len());
        for (i, (&j, &s)) in self.permutation.iter().zip(&self.signs).enumerate() {
            out.set_column(i, &(estimate.column(j) * s));
        }
        out
    }
}

/// Absolute cosine between every estimate column (rows) and reference column (columns).
pub fn cross_similarity(estimate: &Mat, reference: &Mat) -> Result<Mat> {
    if estimate.shape() != reference.shape() {
        return Err(PplsError::Dimension(format!(
            "estimate is {}x{} but reference is {}x{}",
            estimate.nrows(),
            estimate.ncols(),
            reference.nrows(),
            reference.ncols()
        )));
    }
    let r = estimate.ncols();
    let mut sim = Mat::zeros(r, r);
    for i in 0..r {
        for j in 0..r {
            sim[(i, j)] = abs_cosine(
                estimate.column(i).as_slice(),
                reference.column(j).as_slice(),
            )?;
        }
    }
    Ok(sim)
}

/// Permutation maximizing `Σᵢ |cos(est_{π(i)}, ref_i)|`, with signs fixed so the
/// matched cosines are nonnegative.
pub fn align_columns(estimate: &Mat, reference: &Mat) -> Result<AlignmentResult> {
    let sim = cross_similarity(estimate, reference)?;
    let permutation = max_weight_assignment(&sim);
    let mut signs = Vec::with_capacity(permutation.len());
    let mut abs_cos = Vec::with_capacity(permutation.len());
    for (i, &j) in permutation.iter().enumerate() {
        let dot = estimate.column(j).dot(&reference.column(i));
        signs.push(if dot < 0.0 { -1.0 } else { 1.0 });
        abs_cos.push(sim[(j, i)]);
    }
    Ok(AlignmentResult {
        permutation,
        signs,
        abs_cos,
    })
}

/// Hungarian algorithm on a square weight matrix `w[(row, col)]`.
/// Returns `assign[col] = row` maximizing the total weight.
pub fn max_weight_assignment(w: &Mat) -> Vec<usize> {
    let n = w.nrows();
    assert_eq!(n, w.ncols(), "assignment needs a square matrix");
    // shortest augmenting paths with potentials, 1-based with a virtual column 0
    let cost = |i: usize, j: usize| -w[(i - 1, j - 1)];
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost(i0, j) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    (1..=n).map(|j| p[j] - 1).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Statistic {
    Median,
    Quartiles,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Summary {
    Median(f64),
    Quartiles { q1: f64, median: f64, q3: f64 },
}

/// Quantile by linear interpolation between order statistics.
fn quantile_sorted(sorted: &[f64], prob: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * prob;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn aggregate(values: &[f64], statistic: Statistic) -> Result<Summary> {
    if values.is_empty() {
        return Err(PplsError::InvalidInput(
            "cannot summarize an empty list".into(),
        ));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(PplsError::InvalidInput(
            "cannot summarize NaN values".into(),
        ));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = quantile_sorted(&sorted, 0.5);
    Ok(match statistic {
        Statistic::Median => Summary::Median(median),
        Statistic::Quartiles => Summary::Quartiles {
            q1: quantile_sorted(&sorted, 0.25),
            median,
            q3: quantile_sorted(&sorted, 0.75),
        },
    })
}

pub fn median(values: &[f64]) -> Result<f64> {
    match aggregate(values, Statistic::Median)? {
        Summary::Median(m) => Ok(m),
        Summary::Quartiles { median, .. } => Ok(median),
    }
}
