//! Affinity construction and symmetric normalized Laplacians.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{full_eigh, SymmetricMatrix};
use crate::tolerances;

/// Symmetric, nonnegative weights with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityMatrix(DMatrix<f64>);

impl AffinityMatrix {
    /// Validates and symmetrizes (by averaging) a weight matrix.
    pub fn new(mut weights: DMatrix<f64>) -> Result<Self> {
        if !weights.is_square() {
            return Err(Error::NotSquare {
                rows: weights.nrows(),
                cols: weights.ncols(),
            });
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite("affinity matrix"));
        }
        if let Some(w) = weights.iter().find(|w| **w < 0.0) {
            return Err(Error::InvalidAffinity(format!("negative weight {w}")));
        }
        let n = weights.nrows();
        if let Some(p) = (0..n).find(|&p| weights[(p, p)] != 0.0) {
            return Err(Error::InvalidAffinity(format!("nonzero diagonal at {p}")));
        }
        for q in 0..n {
            for p in (q + 1)..n {
                let avg = 0.5 * (weights[(p, q)] + weights[(q, p)]);
                weights[(p, q)] = avg;
                weights[(q, p)] = avg;
            }
        }
        Ok(Self(weights))
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn degrees(&self) -> Vec<f64> {
        self.0.row_iter().map(|r| r.sum()).collect()
    }
}

/// Samples as rows, features as columns.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix(DMatrix<f64>);

impl FeatureMatrix {
    pub fn new(rows: DMatrix<f64>) -> Result<Self> {
        if rows.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature matrix"));
        }
        Ok(Self(rows))
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn d(&self) -> usize {
        self.0.ncols()
    }

    pub fn rows(&self) -> &DMatrix<f64> {
        &self.0
    }
}

/// Laplacian flavours. Only the symmetric normalized one is built here.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[non_exhaustive]
pub enum LaplacianKind {
    #[default]
    SymmetricNormalized,
}

/// `I − D^{-1/2} W D^{-1/2}` together with the degrees it was built from.
#[derive(Debug, Clone)]
pub struct GraphLaplacian {
    pub matrix: SymmetricMatrix,
    pub degrees: Vec<f64>,
}

impl GraphLaplacian {
    pub fn kind(&self) -> LaplacianKind {
        LaplacianKind::SymmetricNormalized
    }

    /// Unit vector along `D^{1/2} 1`, the kernel direction of a connected graph.
    pub fn null_direction(&self) -> Vec<f64> {
        let norm = self.degrees.iter().sum::<f64>().sqrt();
        self.degrees.iter().map(|d| d.sqrt() / norm).collect()
    }
}

/// Spectral health summary of a normalized Laplacian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumCheck {
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    pub zero_multiplicity: usize,
}

impl SpectrumCheck {
    pub fn of(matrix: &SymmetricMatrix) -> Result<Self> {
        let e = full_eigh(matrix)?;
        Ok(Self {
            min_eigenvalue: e.values[0],
            max_eigenvalue: *e.values.last().unwrap(),
            zero_multiplicity: e
                .values
                .iter()
                .filter(|v| v.abs() < tolerances::ZERO_EIGENVALUE)
                .count(),
        })
    }

    pub fn is_psd(&self) -> bool {
        self.min_eigenvalue >= tolerances::PSD_FLOOR
    }

    pub fn within_normalized_range(&self) -> bool {
        self.max_eigenvalue <= tolerances::NORMALIZED_SPECTRUM_CEILING
    }

    pub fn has_simple_zero_mode(&self) -> bool {
        self.zero_multiplicity == 1
    }

    pub fn passes(&self) -> bool {
        self.is_psd() && self.within_normalized_range() && self.has_simple_zero_mode()
    }
}

/// Gaussian kernel on a scalar feature: `exp(−(x_p − x_q)² / (2σ²))`, zero diagonal.
pub fn rbf_affinity(x: &[f64], sigma: f64) -> Result<AffinityMatrix> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::NonPositiveSigma(sigma));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("rbf input"));
    }
    let n = x.len();
    let denom = 2.0 * sigma * sigma;
    let w = DMatrix::from_fn(n, n, |p, q| {
        if p == q {
            0.0
        } else {
            (-(x[p] - x[q]).powi(2) / denom).exp()
        }
    });
    Ok(AffinityMatrix(w))
}

/// Squared Euclidean distances between rows, by direct differences.
fn pairwise_sq_distances(z: &DMatrix<f64>) -> DMatrix<f64> {
    let n = z.nrows();
    let zt = z.transpose();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|p| {
            let zp = zt.column(p);
            (0..n)
                .map(|q| {
                    let d = (zp - zt.column(q)).norm_squared();
                    d.max(0.0)
                })
                .collect()
        })
        .collect();
    DMatrix::from_fn(n, n, |p, q| rows[p][q])
}

/// Per-sample bandwidths: distance to the `nn_index`-th nearest other sample.
pub fn local_bandwidths(z: &FeatureMatrix, nn_index: usize) -> Result<Vec<f64>> {
    let d2 = pairwise_sq_distances(z.rows());
    bandwidths_from_distances(&d2, nn_index)
}

fn bandwidths_from_distances(d2: &DMatrix<f64>, nn_index: usize) -> Result<Vec<f64>> {
    let n = d2.nrows();
    if nn_index == 0 || nn_index >= n {
        return Err(Error::InvalidConfig(format!(
            "nearest-neighbour index {nn_index} outside 1..={}",
            n.saturating_sub(1)
        )));
    }
    let scale = d2.max().sqrt();
    let floor = tolerances::BANDWIDTH_CLAMP * scale;
    let mut sigmas = Vec::with_capacity(n);
    for p in 0..n {
        let mut others: Vec<f64> = (0..n).filter(|&q| q != p).map(|q| d2[(p, q)]).collect();
        others.select_nth_unstable_by(nn_index - 1, f64::total_cmp);
        let sigma = others[nn_index - 1].sqrt().max(floor);
        if sigma < tolerances::BANDWIDTH_MIN {
            return Err(Error::DegenerateBandwidth { index: p, sigma });
        }
        sigmas.push(sigma);
    }
    Ok(sigmas)
}

/// Self-tuning Gaussian affinity `exp(−‖z_p − z_q‖² / (σ_p σ_q))`.
///
/// The exponent has no factor 2.
pub fn self_tuning_affinity(z: &FeatureMatrix, nn_index: usize) -> Result<AffinityMatrix> {
    let d2 = pairwise_sq_distances(z.rows());
    let sigma = bandwidths_from_distances(&d2, nn_index)?;
    let n = z.n();
    let w = DMatrix::from_fn(n, n, |p, q| {
        if p == q {
            0.0
        } else {
            (-d2[(p, q)] / (sigma[p] * sigma[q])).exp()
        }
    });
    AffinityMatrix::new(w)
}

/// Builds `I − D^{-1/2} W D^{-1/2}`; every node needs positive degree.
pub fn normalized_laplacian(w: &AffinityMatrix) -> Result<GraphLaplacian> {
    let degrees = w.degrees();
    let isolated: Vec<usize> = degrees
        .iter()
        .enumerate()
        .filter(|(_, d)| !(**d > 0.0))
        .map(|(p, _)| p)
        .collect();
    if !isolated.is_empty() {
        return Err(Error::IsolatedNode { indices: isolated });
    }
    let inv_sqrt: Vec<f64> = degrees.iter().map(|d| 1.0 / d.sqrt()).collect();
    let n = w.n();
    let wm = w.weights();
    let l = DMatrix::from_fn(n, n, |p, q| {
        let off = wm[(p, q)] * inv_sqrt[p] * inv_sqrt[q];
        if p == q {
            1.0 - off
        } else {
            -off
        }
    });
    Ok(GraphLaplacian {
        matrix: SymmetricMatrix::new(l)?,
        degrees,
    })
}

/// Number of connected components using edges with weight above `threshold`.
pub fn connectivity(w: &AffinityMatrix, threshold: f64) -> usize {
    let n = w.n();
    let wm = w.weights();
    let mut seen = vec![false; n];
    let mut components = 0;
    let mut stack = Vec::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        components += 1;
        seen[start] = true;
        stack.push(start);
        while let Some(p) = stack.pop() {
            for q in 0..n {
                if !seen[q] && wm[(p, q)] > threshold {
                    seen[q] = true;
                    stack.push(q);
                }
            }
        }
    }
    components
}
