//! Dense symmetric matrices, eigenpairs, simplex geometry and convex
//! combination of Laplacian stacks.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tolerances;

/// A real symmetric matrix with finite entries.
///
/// Construction averages `A` with `A^T`, so entry `(p, q)` and `(q, p)` are
/// bitwise equal afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix(DMatrix<f64>);

impl SymmetricMatrix {
    pub fn new(mut entries: DMatrix<f64>) -> Result<Self> {
        if !entries.is_square() {
            return Err(Error::NotSquare {
                rows: entries.nrows(),
                cols: entries.ncols(),
            });
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("symmetric matrix"));
        }
        symmetrize_in_place(&mut entries);
        Ok(Self(entries))
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    /// `trace(X^T A X)`.
    pub fn quadratic_trace(&self, x: &DMatrix<f64>) -> f64 {
        (&self.0 * x).component_mul(x).sum()
    }
}

fn symmetrize_in_place(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for q in 0..n {
        for p in (q + 1)..n {
            let avg = 0.5 * (m[(p, q)] + m[(q, p)]);
            m[(p, q)] = avg;
            m[(q, p)] = avg;
        }
    }
}

/// Ascending eigenvalues with their orthonormal eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

impl EigenPairs {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Columns `range` of the eigenvector matrix.
    pub fn columns(&self, start: usize, count: usize) -> DMatrix<f64> {
        self.vectors.columns(start, count).into_owned()
    }
}

/// The `count` algebraically smallest eigenpairs of `a`, ascending.
///
/// Computes the full decomposition and truncates. Within a degenerate
/// eigenvalue cluster the basis is whatever the solver returns. Each
/// eigenvector is signed so that its largest-magnitude entry is positive.
pub fn sym_eigh(a: &SymmetricMatrix, count: usize) -> Result<EigenPairs> {
    let n = a.n();
    if count == 0 {
        return Err(Error::InvalidConfig("eigenpair count must be positive".into()));
    }
    if count > n {
        return Err(Error::CountExceedsDim { count, dim: n });
    }
    let eig = SymmetricEigen::try_new(a.matrix().clone(), f64::EPSILON, 0).ok_or(Error::EigenNoConvergence)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    order.truncate(count);

    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, count);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
        // Sign convention: the largest-magnitude entry is positive.
        let mut col = vectors.column_mut(dst);
        let pivot = col.iamax();
        if col[pivot] < 0.0 {
            col.neg_mut();
        }
    }
    Ok(EigenPairs { values, vectors })
}

/// Full ascending spectrum.
pub fn full_eigh(a: &SymmetricMatrix) -> Result<EigenPairs> {
    sym_eigh(a, a.n())
}

/// `‖X^T X − I‖_F`.
pub fn orthonormality_defect(x: &DMatrix<f64>) -> f64 {
    let gram = x.transpose() * x;
    (gram - DMatrix::<f64>::identity(x.ncols(), x.ncols())).norm()
}

/// A point on the standard simplex: nonnegative entries summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SimplexWeights(Vec<f64>);

impl SimplexWeights {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidWeights("empty weight vector".into()));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite("simplex weights"));
        }
        if let Some(w) = weights.iter().find(|w| **w < 0.0) {
            return Err(Error::InvalidWeights(format!("negative weight {w}")));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > tolerances::SIMPLEX_SUM {
            return Err(Error::InvalidWeights(format!("weights sum to {sum}")));
        }
        Ok(Self(weights))
    }

    pub fn uniform(m: usize) -> Self {
        assert!(m > 0, "simplex dimension must be positive");
        Self(vec![1.0 / m as f64; m])
    }

    pub fn vertex(m: usize, j: usize) -> Self {
        assert!(j < m, "vertex index out of range");
        let mut w = vec![0.0; m];
        w[j] = 1.0;
        Self(w)
    }

    /// Divides a nonnegative vector by its sum.
    fn normalized(raw: Vec<f64>) -> Self {
        let sum: f64 = raw.iter().sum();
        Self(raw.into_iter().map(|v| v / sum).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for SimplexWeights {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<SimplexWeights> for Vec<f64> {
    fn from(w: SimplexWeights) -> Self {
        w.0
    }
}

/// An ordered family of symmetric positive semidefinite matrices on the
/// same node set, one per modality.
#[derive(Debug, Clone)]
pub struct LaplacianStack {
    matrices: Vec<SymmetricMatrix>,
    names: Option<Vec<String>>,
}

impl LaplacianStack {
    pub fn new(matrices: Vec<SymmetricMatrix>) -> Result<Self> {
        let first = matrices
            .first()
            .ok_or_else(|| Error::InvalidConfig("a stack needs at least one matrix".into()))?;
        let n = first.n();
        for m in &matrices {
            if m.n() != n {
                return Err(Error::DimensionMismatch {
                    what: "stack matrix order",
                    expected: n,
                    found: m.n(),
                });
            }
        }
        Ok(Self { matrices, names: None })
    }

    pub fn with_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.m() {
            return Err(Error::DimensionMismatch {
                what: "modality names",
                expected: self.m(),
                found: names.len(),
            });
        }
        self.names = Some(names);
        Ok(self)
    }

    pub fn m(&self) -> usize {
        self.matrices.len()
    }

    pub fn n(&self) -> usize {
        self.matrices[0].n()
    }

    pub fn matrices(&self) -> &[SymmetricMatrix] {
        &self.matrices
    }

    pub fn get(&self, i: usize) -> &SymmetricMatrix {
        &self.matrices[i]
    }

    pub fn names(&self) -> Option<&[String]> {
        self.names.as_deref()
    }

    /// `[trace(X^T L_1 X), …, trace(X^T L_m X)]`.
    pub fn smoothness_vector(&self, x: &DMatrix<f64>) -> Vec<f64> {
        self.matrices.iter().map(|l| l.quadratic_trace(x)).collect()
    }
}

/// `Σ μ_i L_i`.
pub fn combine(stack: &LaplacianStack, mu: &SimplexWeights) -> Result<SymmetricMatrix> {
    if mu.len() != stack.m() {
        return Err(Error::DimensionMismatch {
            what: "weights vs stack",
            expected: stack.m(),
            found: mu.len(),
        });
    }
    let n = stack.n();
    let mut out = DMatrix::<f64>::zeros(n, n);
    for (l, &w) in stack.matrices().iter().zip(mu.as_slice()) {
        if w != 0.0 {
            out.zip_apply(l.matrix(), |o, v| *o += w * v);
        }
    }
    // Each summand is symmetric, so the sum already is.
    Ok(SymmetricMatrix(out))
}

/// How random simplex points are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimplexSampler {
    /// i.i.d. Uniform(0, 1) draws divided by their sum.
    #[default]
    NormalizedUniform,
    /// Flat Dirichlet, i.e. uniform on the simplex (normalized Exp(1) draws).
    FlatDirichlet,
}

impl SimplexSampler {
    pub fn sample<R: Rng + ?Sized>(self, m: usize, rng: &mut R) -> SimplexWeights {
        match self {
            SimplexSampler::NormalizedUniform => sample_simplex(m, rng),
            SimplexSampler::FlatDirichlet => loop {
                let raw: Vec<f64> = (0..m).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
                if raw.iter().sum::<f64>() > 0.0 {
                    break SimplexWeights::normalized(raw);
                }
            },
        }
    }
}

/// Draws `m` Uniform(0, 1) values and normalizes them onto the simplex.
///
/// The (measure-zero) all-zero draw is resampled.
pub fn sample_simplex<R: Rng + ?Sized>(m: usize, rng: &mut R) -> SimplexWeights {
    assert!(m > 0, "simplex dimension must be positive");
    loop {
        let raw: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
        if raw.iter().sum::<f64>() > 0.0 {
            return SimplexWeights::normalized(raw);
        }
    }
}

/// Euclidean projection onto the standard simplex (sort and threshold).
pub fn project_simplex(v: &[f64]) -> Result<SimplexWeights> {
    if v.is_empty() {
        return Err(Error::InvalidWeights("empty vector".into()));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("projection input"));
    }
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));

    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - 1.0) / (j + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    let projected: Vec<f64> = v.iter().map(|&x| (x - theta).max(0.0)).collect();
    let sum: f64 = projected.iter().sum();
    // Rounding in the threshold can leave the sum a few ulps off.
    if (sum - 1.0).abs() > 0.0 {
        return Ok(SimplexWeights(projected.into_iter().map(|x| x / sum).collect()));
    }
    Ok(SimplexWeights(projected))
}
