//! Multimodal spectral clustering by random convex combinations of graph
//! Laplacians.
//!
//! Given one normalized Laplacian per modality, [`rjd_base`] draws random
//! simplex weights, eigendecomposes each combined Laplacian and keeps the
//! trial whose bottom-`k` eigenvalue sum is largest. [`pga_maximize`]
//! optimizes the same objective directly. The [`baselines`] module holds
//! the comparison methods, and [`sbm`] generates synthetic multimodal
//! graphs with known clusters.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod error;
pub mod eval;
pub mod graph;
pub mod io;
pub mod linalg;
pub mod report;
pub mod rjd;
pub mod sbm;
pub mod smoothness;
pub mod tolerances;

pub use error::{Error, ErrorKind, Result};
pub use eval::{
    embedding_nmi, kmeans, landscape_stats, nmi, wcss, ClusterLabels, KMeansConfig, KMeansFit, LandscapeStats,
};
pub use graph::{
    connectivity, local_bandwidths, normalized_laplacian, rbf_affinity, self_tuning_affinity, AffinityMatrix,
    FeatureMatrix, GraphLaplacian, LaplacianKind, SpectrumCheck,
};
pub use linalg::{
    combine, full_eigh, orthonormality_defect, project_simplex, sample_simplex, sym_eigh, EigenPairs,
    LaplacianStack, SimplexSampler, SimplexWeights, SymmetricMatrix,
};
pub use report::Report;
pub use rjd::{
    combined_eigenbasis, rjd_base, run_trial, select_best, write_trial_ledger, Embedding, RjdConfig, RjdOutcome,
    Trial,
};
pub use sbm::{generate, BlockParams, MultimodalDataset, SbmConfig};
pub use smoothness::{
    base_objective, objective_gradient, pga_maximize, single_directional_objective, worst_case_smoothness,
    Gradient, ObjectiveKind, PgaConfig, PgaOutcome, PgaRecord, PgaTrace,
};
