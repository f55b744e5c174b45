//! Weighted stochastic-block-model generator for multimodal graphs.
//!
//! Every modality shares one ground-truth partition. Its weights are a
//! Gaussian kernel on a random scalar feature masked by a per-modality
//! block matrix, so each modality carries a different amount of cluster
//! signal.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::ClusterLabels;
use crate::graph::{normalized_laplacian, rbf_affinity, AffinityMatrix, GraphLaplacian};
use crate::linalg::LaplacianStack;

/// Rule turning sampled proportions into integer cluster sizes.
pub const SIZE_ROUNDING_RULE: &str =
    "largest-remainder rounding to n, then one node donated from the largest cluster to each empty one";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    pub zeta: f64,
    pub theta: f64,
    pub xi: f64,
    pub epsilon: f64,
    pub eta: f64,
    pub chi: f64,
}

impl BlockParams {
    pub fn standard() -> Self {
        Self {
            alpha: 0.9,
            beta: 0.05,
            gamma: 0.06,
            delta: 0.2,
            zeta: 0.05,
            theta: 0.7,
            xi: 0.9,
            epsilon: 0.005,
            eta: 0.005,
            chi: 0.005,
        }
    }

    fn values(&self) -> [f64; 10] {
        [
            self.alpha,
            self.beta,
            self.gamma,
            self.delta,
            self.zeta,
            self.theta,
            self.xi,
            self.epsilon,
            self.eta,
            self.chi,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SbmConfig {
    pub n: usize,
    pub k: usize,
    pub m: usize,
    pub sigma_per_modality: Vec<f64>,
    pub block_params: BlockParams,
    pub dirichlet_concentration: f64,
    pub seed: u64,
    /// Block-matrix recipe (1..=4) of each modality.
    pub recipes: Vec<usize>,
}

impl SbmConfig {
    /// 300 nodes, 6 clusters, four modalities; the third has a kernel so wide
    /// that its weights are the block mask alone.
    pub fn standard(seed: u64) -> Self {
        Self {
            n: 300,
            k: 6,
            m: 4,
            sigma_per_modality: vec![1.0, 1.0, 1e6, 1.0],
            block_params: BlockParams::standard(),
            dirichlet_concentration: 1.0,
            seed,
            recipes: vec![1, 2, 3, 4],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 || self.n < self.k {
            return Err(Error::InvalidConfig(format!(
                "need n >= k >= 2, got n = {}, k = {}",
                self.n, self.k
            )));
        }
        if self.m == 0 || self.recipes.len() != self.m {
            return Err(Error::InvalidConfig(format!(
                "m = {} but {} block recipes given",
                self.m,
                self.recipes.len()
            )));
        }
        if self.sigma_per_modality.len() != self.m {
            return Err(Error::InvalidConfig(format!(
                "m = {} but {} kernel widths given",
                self.m,
                self.sigma_per_modality.len()
            )));
        }
        if let Some(&s) = self.sigma_per_modality.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
            return Err(Error::NonPositiveSigma(s));
        }
        if self.block_params.values().iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::InvalidConfig(
                "block parameters must be finite and nonnegative".into(),
            ));
        }
        if !(self.dirichlet_concentration > 0.0 && self.dirichlet_concentration.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "Dirichlet concentration must be positive, got {}",
                self.dirichlet_concentration
            )));
        }
        if let Some(&r) = self.recipes.iter().find(|r| !(1..=4).contains(*r)) {
            return Err(Error::UnknownRecipe(r));
        }
        Ok(())
    }
}

/// `k × k` connection-strength matrix of one modality. The first `⌈k/2⌉`
/// clusters form the first group.
///
/// 1. strong within the first group: `diag(α…, β…) + ε`
/// 2. strong within the second group: `diag(ζ…, ξ…) + η`
/// 3. uninformative: `γ + χ` everywhere
/// 4. moderate: `θ` on the diagonal, `δ` off it
pub fn block_matrix(recipe: usize, params: &BlockParams, k: usize) -> Result<DMatrix<f64>> {
    let first = k.div_ceil(2);
    let p = params;
    let b = match recipe {
        1 => DMatrix::from_fn(k, k, |r, c| {
            let diag = if r != c {
                0.0
            } else if r < first {
                p.alpha
            } else {
                p.beta
            };
            diag + p.epsilon
        }),
        2 => DMatrix::from_fn(k, k, |r, c| {
            let diag = if r != c {
                0.0
            } else if r < first {
                p.zeta
            } else {
                p.xi
            };
            diag + p.eta
        }),
        3 => DMatrix::from_element(k, k, p.gamma + p.chi),
        4 => DMatrix::from_fn(k, k, |r, c| if r == c { p.theta } else { p.delta }),
        other => return Err(Error::UnknownRecipe(other)),
    };
    Ok(b)
}

#[derive(Debug, Clone)]
pub struct MultimodalDataset {
    pub labels: ClusterLabels,
    pub affinities: Vec<AffinityMatrix>,
    pub laplacians: Vec<GraphLaplacian>,
    pub stack: LaplacianStack,
    pub config: SbmConfig,
}

impl MultimodalDataset {
    /// Configuration echo plus the size-rounding rule.
    pub fn provenance(&self) -> serde_json::Value {
        serde_json::json!({
            "generator": "weighted-sbm",
            "config": self.config,
            "size_rounding": SIZE_ROUNDING_RULE,
            "cluster_sizes": self.labels.cluster_sizes(),
        })
    }
}

/// Integer sizes summing to `n`, each at least one when `n ≥ k`.
fn round_sizes(proportions: &[f64], n: usize) -> Vec<usize> {
    let k = proportions.len();
    let exact: Vec<f64> = proportions.iter().map(|p| p * n as f64).collect();
    let mut sizes: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut by_remainder: Vec<usize> = (0..k).collect();
    by_remainder.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let mut missing = n.saturating_sub(sizes.iter().sum());
    for &c in by_remainder.iter().cycle() {
        if missing == 0 {
            break;
        }
        sizes[c] += 1;
        missing -= 1;
    }
    while let Some(empty) = sizes.iter().position(|&s| s == 0) {
        let largest = (0..k)
            .max_by(|&a, &b| sizes[a].cmp(&sizes[b]).then(b.cmp(&a)))
            .expect("k > 0");
        if sizes[largest] <= 1 {
            break;
        }
        sizes[largest] -= 1;
        sizes[empty] += 1;
    }
    sizes
}

/// Draws the partition and every modality from one seeded stream:
/// proportions, then the label shuffle, then each modality's features in
/// order.
pub fn generate(config: &SbmConfig) -> Result<MultimodalDataset> {
    config.validate()?;
    let (n, k) = (config.n, config.k);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let gamma = Gamma::new(config.dirichlet_concentration, 1.0)
        .map_err(|e| Error::InvalidConfig(format!("Dirichlet concentration: {e}")))?;
    let mut draws: Vec<f64> = (0..k).map(|_| gamma.sample(&mut rng)).collect();
    let total: f64 = draws.iter().sum();
    if total > 0.0 {
        draws.iter_mut().for_each(|d| *d /= total);
    } else {
        draws.fill(1.0 / k as f64);
    }
    let sizes = round_sizes(&draws, n);
    if let Some(empty) = sizes.iter().position(|&s| s == 0) {
        return Err(Error::EmptyCluster(empty));
    }
    let mut assignments: Vec<usize> = sizes
        .iter()
        .enumerate()
        .flat_map(|(c, &s)| std::iter::repeat_n(c, s))
        .collect();
    assignments.shuffle(&mut rng);
    let labels = ClusterLabels::new(assignments, k)?;

    let mut affinities = Vec::with_capacity(config.m);
    let mut laplacians = Vec::with_capacity(config.m);
    for (&recipe, &sigma) in config.recipes.iter().zip(&config.sigma_per_modality) {
        let blocks = block_matrix(recipe, &config.block_params, k)?;
        let x: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let kernel = rbf_affinity(&x, sigma)?;
        let y = labels.assignments();
        let mut w = kernel.weights().clone();
        for q in 0..n {
            for p in 0..n {
                w[(p, q)] *= blocks[(y[p], y[q])];
            }
        }
        w.fill_diagonal(0.0);
        let affinity = AffinityMatrix::new(w)?;
        laplacians.push(normalized_laplacian(&affinity)?);
        affinities.push(affinity);
    }
    let stack = LaplacianStack::new(laplacians.iter().map(|l| l.matrix.clone()).collect())?;
    Ok(MultimodalDataset {
        labels,
        affinities,
        laplacians,
        stack,
        config: config.clone(),
    })
}
