//! Randomized joint diagonalization with bottom-k spectral-energy selection.
//!
//! Each trial draws simplex weights, eigendecomposes the weighted sum of the
//! Laplacians, and scores the result by the sum of its `k` smallest nonzero
//! eigenvalues. The trial with the largest score is selected.
//!
//! Trials are seeded independently (`seed + trial_index`), so they can run
//! on any number of threads and still reproduce the sequential result.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    combine, orthonormality_defect, sym_eigh, LaplacianStack, SimplexSampler, SimplexWeights, SymmetricMatrix,
};
use crate::tolerances;

/// An `n × k` matrix with orthonormal columns; rows embed the nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding(DMatrix<f64>);

impl Embedding {
    pub fn new(columns: DMatrix<f64>) -> Result<Self> {
        let defect = orthonormality_defect(&columns);
        if defect > tolerances::EMBEDDING_ORTHONORMALITY {
            return Err(Error::NonOrthonormalEmbedding(defect));
        }
        Ok(Self(columns))
    }

    /// Wraps columns known to be orthonormal (eigenvectors, rotations).
    pub(crate) fn from_orthonormal(columns: DMatrix<f64>) -> Self {
        Self(columns)
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn k(&self) -> usize {
        self.0.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }
}

/// One random combination and its bottom-k spectral data.
#[derive(Debug, Clone)]
pub struct Trial {
    pub trial_index: usize,
    /// Seed of the stream that drew `mu`.
    pub seed_offset: u64,
    pub mu: SimplexWeights,
    /// `λ_1 … λ_k`, ascending, zero mode excluded.
    pub eigenvalues: Vec<f64>,
    pub embedding: Embedding,
    pub objective: f64,
    /// `λ_{k+1} − λ_k` fell below the gap tolerance.
    pub gap_warning: bool,
}

/// Bottom modes of a symmetric matrix with the smallest one dropped.
pub(crate) struct BottomModes {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
    pub next_value: Option<f64>,
}

pub(crate) fn bottom_modes(matrix: &SymmetricMatrix, k: usize) -> Result<BottomModes> {
    let n = matrix.n();
    if k == 0 || k >= n {
        return Err(Error::InvalidConfig(format!(
            "embedding dimension {k} must lie in 1..={}",
            n.saturating_sub(1)
        )));
    }
    let wanted = (k + 2).min(n);
    let eig = sym_eigh(matrix, wanted)?;
    let lambda1 = eig.values[1];
    if lambda1 < tolerances::ZERO_MODE {
        return Err(Error::ZeroModeAmbiguity { lambda1 });
    }
    Ok(BottomModes {
        values: eig.values[1..=k].to_vec(),
        vectors: eig.columns(1, k),
        next_value: eig.values.get(k + 1).copied(),
    })
}

/// Evaluates one combination: `k` is the embedding dimension (at most `n − 1`).
pub fn run_trial(stack: &LaplacianStack, k: usize, mu: SimplexWeights) -> Result<Trial> {
    let combined = combine(stack, &mu)?;
    let modes = bottom_modes(&combined, k)?;
    let gap_warning = modes
        .next_value
        .is_some_and(|next| next - modes.values[k - 1] < tolerances::TRIAL_SPECTRAL_GAP);
    let objective = modes.values.iter().sum();
    Ok(Trial {
        trial_index: 0,
        seed_offset: 0,
        mu,
        eigenvalues: modes.values,
        embedding: Embedding::from_orthonormal(modes.vectors),
        objective,
        gap_warning,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RjdConfig {
    pub trials: usize,
    pub k: usize,
    pub seed: u64,
    #[serde(default)]
    pub sampler: SimplexSampler,
}

impl RjdConfig {
    pub fn new(trials: usize, k: usize, seed: u64) -> Self {
        Self {
            trials,
            k,
            seed,
            sampler: SimplexSampler::default(),
        }
    }
}

#[derive(Debug)]
pub struct RjdOutcome {
    /// Successful trials in trial-index order.
    pub trials: Vec<Trial>,
    pub failures: Vec<(usize, Error)>,
    /// Position of the selected trial within `trials`.
    pub selected: usize,
}

impl RjdOutcome {
    pub fn selected(&self) -> &Trial {
        &self.trials[self.selected]
    }

    pub fn write_ledger<W: std::io::Write>(&self, w: W) -> Result<()> {
        write_trial_ledger(w, &self.trials)
    }
}

/// Position of the highest-objective trial; ties within
/// [`tolerances::OBJECTIVE_TIE`] go to the lowest trial index.
pub fn select_best(trials: &[Trial]) -> usize {
    assert!(!trials.is_empty(), "selection over no trials");
    let max = trials.iter().map(|t| t.objective).fold(f64::NEG_INFINITY, f64::max);
    trials
        .iter()
        .enumerate()
        .filter(|(_, t)| t.objective >= max - tolerances::OBJECTIVE_TIE)
        .min_by_key(|(_, t)| t.trial_index)
        .map(|(i, _)| i)
        .expect("the maximum is attained")
}

/// Runs `config.trials` independent trials and selects the best one.
///
/// Individual trial failures are kept in the outcome; only a run where
/// every trial fails is an error.
pub fn rjd_base(stack: &LaplacianStack, config: &RjdConfig) -> Result<RjdOutcome> {
    if config.trials == 0 {
        return Err(Error::InvalidConfig("at least one trial is required".into()));
    }
    let m = stack.m();
    let results: Vec<Result<Trial>> = (0..config.trials)
        .into_par_iter()
        .map(|t| {
            let seed = config.seed.wrapping_add(t as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mu = config.sampler.sample(m, &mut rng);
            let mut trial = run_trial(stack, config.k, mu)?;
            trial.trial_index = t;
            trial.seed_offset = seed;
            Ok(trial)
        })
        .collect();

    let mut trials = Vec::with_capacity(config.trials);
    let mut failures = Vec::new();
    for (t, r) in results.into_iter().enumerate() {
        match r {
            Ok(trial) => trials.push(trial),
            Err(e) => failures.push((t, e)),
        }
    }
    if trials.is_empty() {
        let (_, first) = failures.swap_remove(0);
        return Err(Error::AllTrialsFailed {
            trials: config.trials,
            first: Box::new(first),
        });
    }
    let selected = select_best(&trials);
    Ok(RjdOutcome {
        trials,
        failures,
        selected,
    })
}

/// Full eigenbasis of `L(μ)`, ascending; initializes joint diagonalization.
pub fn combined_eigenbasis(stack: &LaplacianStack, mu: &SimplexWeights) -> Result<DMatrix<f64>> {
    let combined = combine(stack, mu)?;
    Ok(sym_eigh(&combined, combined.n())?.vectors)
}

/// CSV with `trial_index, mu_1..mu_m, objective, lambda_1..lambda_k`.
pub fn write_trial_ledger<W: std::io::Write>(w: W, trials: &[Trial]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    if let Some(first) = trials.first() {
        let mut header = vec!["trial_index".to_string()];
        header.extend((1..=first.mu.len()).map(|i| format!("mu_{i}")));
        header.push("objective".into());
        header.extend((1..=first.eigenvalues.len()).map(|j| format!("lambda_{j}")));
        out.write_record(&header)?;
    }
    for t in trials {
        let mut row = vec![t.trial_index.to_string()];
        row.extend(t.mu.as_slice().iter().map(f64::to_string));
        row.push(t.objective.to_string());
        row.extend(t.eigenvalues.iter().map(f64::to_string));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}
