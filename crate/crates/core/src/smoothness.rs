//! Smoothness objectives over the simplex and their direct maximization.
//!
//! `g(μ) = λ_1 + … + λ_k` of `L(μ) = Σ μ_i L_i` (zero mode excluded) is
//! concave in `μ`. Where `λ_k < λ_{k+1}` its gradient has components
//! `trace(X^T L_i X)` with `X` the bottom-k eigenvectors of `L(μ)`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{embedding_nmi, ClusterLabels, KMeansConfig};
use crate::linalg::{combine, full_eigh, orthonormality_defect, project_simplex, LaplacianStack, SimplexWeights};
use crate::rjd::bottom_modes;
use crate::tolerances;

/// Sum of the `k` smallest nonzero eigenvalues of `L(μ)`.
pub fn base_objective(stack: &LaplacianStack, mu: &SimplexWeights, k: usize) -> Result<f64> {
    let combined = combine(stack, mu)?;
    Ok(bottom_modes(&combined, k)?.values.iter().sum())
}

/// `λ_1(L(μ))`.
pub fn single_directional_objective(stack: &LaplacianStack, mu: &SimplexWeights) -> Result<f64> {
    base_objective(stack, mu, 1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub values: Vec<f64>,
    /// The gap `λ_{k+1} − λ_k` was closed; `values` averages over the
    /// ambiguous eigenspace.
    pub gap_warning: bool,
}

/// Gradient of [`base_objective`] with respect to `μ`.
///
/// When `λ_k` sits in a cluster of eigenvalues that straddles the cut at
/// `k`, the cluster's traces are averaged and weighted by how many of its
/// members fall inside the bottom `k`.
pub fn objective_gradient(stack: &LaplacianStack, mu: &SimplexWeights, k: usize) -> Result<Gradient> {
    let combined = combine(stack, mu)?;
    let n = combined.n();
    if k == 0 || k >= n {
        return Err(Error::InvalidConfig(format!(
            "embedding dimension {k} must lie in 1..={}",
            n - 1
        )));
    }
    let eig = full_eigh(&combined)?;
    let lambda = &eig.values;
    if lambda[1] < tolerances::ZERO_MODE {
        return Err(Error::ZeroModeAmbiguity { lambda1: lambda[1] });
    }
    let tol = tolerances::GRADIENT_SPECTRAL_GAP;
    let mut lo = k;
    while lo > 1 && lambda[k] - lambda[lo - 1] < tol {
        lo -= 1;
    }
    let mut hi = k;
    while hi + 1 < n && lambda[hi + 1] - lambda[k] < tol {
        hi += 1;
    }
    let inside = (k - lo + 1) as f64 / (hi - lo + 1) as f64;

    let full = eig.columns(1, lo - 1);
    let cluster = eig.columns(lo, hi - lo + 1);
    let values = stack
        .matrices()
        .iter()
        .map(|l| {
            let head = if lo > 1 { l.quadratic_trace(&full) } else { 0.0 };
            head + inside * l.quadratic_trace(&cluster)
        })
        .collect();
    Ok(Gradient {
        values,
        gap_warning: hi > k,
    })
}

/// Norm used to aggregate per-modality smoothness.
fn lp_norm(v: &[f64], p: f64) -> f64 {
    if p.is_infinite() {
        v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
    } else {
        v.iter().map(|x| x.abs().powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

/// `‖[trace(X^T L_1 X), …, trace(X^T L_m X)]‖_p`, `p ∈ (1, ∞]`.
pub fn worst_case_smoothness(stack: &LaplacianStack, x: &DMatrix<f64>, p: f64) -> Result<f64> {
    if !(p > 1.0) {
        return Err(Error::InvalidConfig(format!("norm exponent must exceed 1, got {p}")));
    }
    if x.nrows() != stack.n() {
        return Err(Error::DimensionMismatch {
            what: "embedding rows",
            expected: stack.n(),
            found: x.nrows(),
        });
    }
    let defect = orthonormality_defect(x);
    if defect > tolerances::EMBEDDING_ORTHONORMALITY {
        return Err(Error::NonOrthonormalEmbedding(defect));
    }
    Ok(lp_norm(&stack.smoothness_vector(x), p))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectiveKind {
    /// `λ_1(L(μ))`.
    SingleDirectional,
    /// `λ_1 + … + λ_k`.
    Base,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PgaConfig {
    pub iterations: usize,
    pub step_size: f64,
    pub objective: ObjectiveKind,
    /// Embedding dimension for clustering and for the BASE objective.
    pub k: usize,
    pub record_trace: bool,
    /// Step halvings tried when a step lowers the objective.
    pub max_halvings: usize,
    pub eval: KMeansConfig,
}

impl PgaConfig {
    pub fn new(objective: ObjectiveKind, k: usize) -> Self {
        Self {
            iterations: 30,
            step_size: 0.5,
            objective,
            k,
            record_trace: true,
            max_halvings: 20,
            eval: KMeansConfig::default(),
        }
    }

    fn objective_dim(&self) -> usize {
        match self.objective {
            ObjectiveKind::SingleDirectional => 1,
            ObjectiveKind::Base => self.k,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PgaRecord {
    pub iteration: usize,
    pub mu: SimplexWeights,
    pub objective: f64,
    pub nmi: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PgaTrace {
    pub records: Vec<PgaRecord>,
}

impl PgaTrace {
    /// CSV with `iteration, objective, nmi, mu_1..mu_m`.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        if let Some(first) = self.records.first() {
            let mut header = vec!["iteration".to_string(), "objective".into(), "nmi".into()];
            header.extend((1..=first.mu.len()).map(|i| format!("mu_{i}")));
            out.write_record(&header)?;
        }
        for r in &self.records {
            let mut row = vec![
                r.iteration.to_string(),
                r.objective.to_string(),
                r.nmi.map(|v| v.to_string()).unwrap_or_default(),
            ];
            row.extend(r.mu.as_slice().iter().map(f64::to_string));
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct PgaOutcome {
    pub mu_star: SimplexWeights,
    pub trace: PgaTrace,
}

/// Projected gradient ascent from the uniform weights.
///
/// Each iteration steps along the analytic gradient and projects back onto
/// the simplex. A step that lowers the objective (or lands on a degenerate
/// combination) is halved, up to `max_halvings` times; if none succeeds the
/// iterate stays put. With `labels`, each record also carries the NMI of
/// k-means on the bottom-k embedding.
pub fn pga_maximize(
    stack: &LaplacianStack,
    config: &PgaConfig,
    labels: Option<&ClusterLabels>,
) -> Result<PgaOutcome> {
    if config.iterations == 0 {
        return Err(Error::InvalidConfig("iterations must be at least 1".into()));
    }
    if !(config.step_size > 0.0) || !config.step_size.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "step size must be positive, got {}",
            config.step_size
        )));
    }
    let dim = config.objective_dim();
    let objective = |mu: &SimplexWeights| base_objective(stack, mu, dim);
    let score = |mu: &SimplexWeights| -> Result<Option<f64>> {
        match labels {
            None => Ok(None),
            Some(truth) => {
                let modes = bottom_modes(&combine(stack, mu)?, config.k)?;
                embedding_nmi(&modes.vectors, truth, config.k, &config.eval).map(Some)
            }
        }
    };

    let mut trace = PgaTrace::default();
    let mut mu = SimplexWeights::uniform(stack.m());
    let mut value = objective(&mu)?;
    if !value.is_finite() {
        return Err(Error::NonFiniteObjective {
            iteration: 0,
            partial: Box::new(trace),
        });
    }
    let mut record = PgaRecord {
        iteration: 0,
        mu: mu.clone(),
        objective: value,
        nmi: score(&mu)?,
    };

    for iteration in 1..=config.iterations {
        if config.record_trace {
            trace.records.push(record.clone());
        }
        let grad = objective_gradient(stack, &mu, dim)?;
        let mut step = config.step_size;
        for _ in 0..=config.max_halvings {
            let raw: Vec<f64> = mu
                .as_slice()
                .iter()
                .zip(&grad.values)
                .map(|(m, g)| m + step * g)
                .collect();
            let candidate = project_simplex(&raw)?;
            match objective(&candidate) {
                Ok(v) if !v.is_finite() => {
                    return Err(Error::NonFiniteObjective {
                        iteration,
                        partial: Box::new(trace),
                    })
                }
                Ok(v) if v >= value => {
                    mu = candidate;
                    value = v;
                    break;
                }
                Ok(_) | Err(Error::ZeroModeAmbiguity { .. }) => step *= 0.5,
                Err(e) => return Err(e),
            }
        }
        record = PgaRecord {
            iteration,
            mu: mu.clone(),
            objective: value,
            nmi: score(&mu)?,
        };
    }
    trace.records.push(record);
    Ok(PgaOutcome { mu_star: mu, trace })
}
