use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{normalized_laplacian, AffinityMatrix};
use crate::linalg::{sym_eigh, LaplacianStack, SymmetricMatrix};
use crate::tolerances;

/// Per-view embeddings; each block has orthonormal columns.
#[derive(Debug, Clone)]
pub struct MultiviewEmbedding {
    pub blocks: Vec<DMatrix<f64>>,
}

impl MultiviewEmbedding {
    /// `[X_1 | X_2 | … | X_m]`, `n × (m·k)`.
    pub fn concatenated(&self) -> DMatrix<f64> {
        let n = self.blocks[0].nrows();
        let cols: usize = self.blocks.iter().map(|b| b.ncols()).sum();
        let mut out = DMatrix::zeros(n, cols);
        let mut at = 0;
        for b in &self.blocks {
            out.columns_mut(at, b.ncols()).copy_from(b);
            at += b.ncols();
        }
        out
    }
}

/// Sum of `X_r X_r^T` over all views except `skip`.
fn others_projector(blocks: &[DMatrix<f64>], skip: usize) -> DMatrix<f64> {
    let n = blocks[0].nrows();
    let mut p = DMatrix::zeros(n, n);
    for (r, x) in blocks.iter().enumerate() {
        if r != skip {
            p.gemm(1.0, x, &x.transpose(), 1.0);
        }
    }
    p
}

/// Bottom `k + 1` eigenvectors of a connected graph's Laplacian, zero mode first.
fn modes_with_zero(lap: &SymmetricMatrix, k: usize) -> Result<DMatrix<f64>> {
    let n = lap.n();
    if k == 0 || k >= n {
        return Err(Error::InvalidConfig(format!(
            "embedding dimension {k} must lie in 1..={}",
            n.saturating_sub(1)
        )));
    }
    let eig = sym_eigh(lap, k + 1)?;
    if eig.values[1] < tolerances::ZERO_MODE {
        return Err(Error::ZeroModeAmbiguity { lambda1: eig.values[1] });
    }
    Ok(eig.vectors)
}

/// Multiview spectral clustering by affinity-level co-training.
///
/// Each iteration replaces view `i`'s affinity by `sym(Σ_{r≠i} U_r U_r^T W_i)`
/// with negative entries clamped to zero and the diagonal cleared, then
/// re-embeds from its normalized Laplacian. `U_r` is view `r`'s embedding
/// together with its zero mode; without that direction the projected
/// weights lose their positive bulk. All views update from the previous
/// iteration's embeddings. The returned blocks omit the zero mode.
pub fn mvsc(affinities: &[AffinityMatrix], k: usize, iterations: usize) -> Result<MultiviewEmbedding> {
    if affinities.len() < 2 {
        return Err(Error::InvalidConfig(
            "multiview clustering needs at least two views".into(),
        ));
    }
    let n = affinities[0].n();
    if let Some(a) = affinities.iter().find(|a| a.n() != n) {
        return Err(Error::DimensionMismatch {
            what: "view size",
            expected: n,
            found: a.n(),
        });
    }
    let mut blocks = affinities
        .iter()
        .map(|w| modes_with_zero(&normalized_laplacian(w)?.matrix, k))
        .collect::<Result<Vec<_>>>()?;

    for iteration in 1..=iterations {
        let mut next = Vec::with_capacity(blocks.len());
        for (view, w) in affinities.iter().enumerate() {
            let p = others_projector(&blocks, view);
            let pw = p * w.weights();
            let mut s = (&pw + pw.transpose()) * 0.5;
            s.apply(|v| *v = v.max(0.0));
            s.fill_diagonal(0.0);
            let lap = normalized_laplacian(&AffinityMatrix::new(s)?).map_err(|e| match e {
                Error::IsolatedNode { indices } => Error::ViewCollapsed {
                    view,
                    iteration,
                    indices,
                },
                other => other,
            })?;
            next.push(modes_with_zero(&lap.matrix, k)?);
        }
        blocks = next;
    }
    Ok(MultiviewEmbedding {
        blocks: blocks.into_iter().map(|u| u.columns(1, k).into_owned()).collect(),
    })
}

/// Sign of the co-regularization coupling term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CouplingSign {
    /// `L_i − λ Σ X_r X_r^T`: agreement with the other views lowers energy.
    #[default]
    Reward,
    /// `L_i + λ Σ X_r X_r^T`.
    Penalize,
}

/// Co-regularized multiview spectral clustering on the Laplacian level.
///
/// View `i` is re-embedded from `L_i ∓ λ Σ_{r≠i} X_r X_r^T` restricted to the
/// orthogonal complement of `L_i`'s own zero mode, so the coupling cannot
/// push a cluster direction below the discarded constant mode.
pub fn coreg_mvsc(
    stack: &LaplacianStack,
    k: usize,
    lambda: f64,
    iterations: usize,
    sign: CouplingSign,
) -> Result<MultiviewEmbedding> {
    if stack.m() < 2 {
        return Err(Error::InvalidConfig(
            "co-regularization needs at least two views".into(),
        ));
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "coupling weight must be nonnegative, got {lambda}"
        )));
    }
    let n = stack.n();
    let mut null_dirs = Vec::with_capacity(stack.m());
    let mut blocks = Vec::with_capacity(stack.m());
    for l in stack.matrices() {
        let eig = sym_eigh(l, (k + 1).min(n))?;
        if k >= n {
            return Err(Error::InvalidConfig(format!(
                "embedding dimension {k} must be below {n}"
            )));
        }
        null_dirs.push(eig.columns(0, 1));
        blocks.push(eig.columns(1, k));
    }

    let signed = match sign {
        CouplingSign::Reward => -lambda,
        CouplingSign::Penalize => lambda,
    };
    // Shift that places the deflated zero mode above the whole spectrum.
    let shift = 3.0 + lambda * stack.m() as f64;
    for _ in 0..iterations {
        let mut next = Vec::with_capacity(blocks.len());
        for (view, l) in stack.matrices().iter().enumerate() {
            let mut coupled = l.matrix() + others_projector(&blocks, view) * signed;
            let u = &null_dirs[view];
            let cu = &coupled * u;
            let ucu = (u.transpose() * &cu)[(0, 0)];
            // (I − uu^T) C (I − uu^T) + shift·uu^T
            coupled -= &cu * u.transpose() + u * cu.transpose();
            coupled += u * u.transpose() * (ucu + shift);
            let eig = sym_eigh(&SymmetricMatrix::new(coupled)?, k)?;
            next.push(eig.vectors);
        }
        blocks = next;
    }
    Ok(MultiviewEmbedding { blocks })
}
