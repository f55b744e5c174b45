//! Comparison methods: multiview spectral clustering (plain and
//! co-regularized), two-view k-means variants, and Jacobi-rotation joint
//! diagonalization with Rayleigh-quotient mode ordering.

mod jd;
mod mvkmeans;
mod mvsc;

pub use jd::{
    jacobi_jd, jacobi_jd_observed, order_modes, refine, refine_from_weights, JdConfig, JdResult, RefinementCurve,
    RefinementRecord,
};
pub use mvkmeans::{mv_kmeans, mv_sph_kmeans, MvKMeansConfig};
pub use mvsc::{coreg_mvsc, mvsc, CouplingSign, MultiviewEmbedding};
