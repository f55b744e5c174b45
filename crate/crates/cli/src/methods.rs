//! Runs one configured method on a loaded dataset.

use nalgebra::DMatrix;
use serde_json::{json, Map, Value};
use spectral_fusion::baselines::{
    coreg_mvsc, mv_kmeans, mv_sph_kmeans, mvsc, order_modes, refine, refine_from_weights, JdConfig, MvKMeansConfig,
};
use spectral_fusion::io::write_labels;
use spectral_fusion::{
    kmeans, landscape_stats, nmi, pga_maximize, rjd_base, run_trial, sym_eigh, ClusterLabels, Error, KMeansConfig,
    ObjectiveKind, PgaConfig, Result, RjdConfig, SimplexWeights,
};

use crate::config::{Init, MethodParams, RunConfig, Sampler};
use crate::dataset::Loaded;

/// Result of one run: predicted clusters, score and method-specific data.
pub struct Outcome {
    pub assignments: ClusterLabels,
    pub nmi: Option<f64>,
    pub extras: Map<String, Value>,
    /// Named CSV artifacts in the order they should be written.
    pub artifacts: Vec<(&'static str, Vec<u8>)>,
    /// Mean and spread of per-trial NMI for randomized selection methods.
    pub landscape: Option<TrialSummary>,
}

#[derive(Debug, Clone, Copy)]
pub struct TrialSummary {
    pub mean_nmi: f64,
    pub std_nmi: f64,
    pub above_mean: bool,
    pub selected_objective: f64,
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

fn check_index(what: &str, index: usize, m: usize) -> Result<()> {
    if index < m {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!(
            "{what} {index} out of range for {m} modalities"
        )))
    }
}

/// Checks the configuration against the dataset's shape.
pub fn check_against(cfg: &RunConfig, data: &Loaded) -> Result<()> {
    let (n, m) = (data.n(), data.m());
    if cfg.k >= n {
        return Err(Error::KExceedsN { k: cfg.k, n });
    }
    match &cfg.params {
        MethodParams::SingleLaplacian { modality } => check_index("modality", *modality, m)?,
        MethodParams::MvKmeans { views, .. } | MethodParams::MvSphkmeans { views, .. } => {
            for &v in views {
                check_index("view", v, m)?;
            }
        }
        MethodParams::Mvsc { .. } | MethodParams::Coreg { .. } if m < 2 => {
            return Err(Error::InvalidConfig(format!(
                "{} needs at least two modalities",
                cfg.method().name()
            )));
        }
        _ => {}
    }
    if let Some(labels) = &data.labels {
        if labels.n() != n {
            return Err(Error::LengthMismatch {
                left: labels.n(),
                right: n,
            });
        }
    }
    Ok(())
}

/// Rows of view `v` for the two-view k-means methods: raw features when
/// available, otherwise the view's own bottom-`k` spectral embedding.
fn kmeans_view(data: &Loaded, v: usize, k: usize) -> Result<DMatrix<f64>> {
    match &data.features {
        Some(views) => Ok(views[v].rows().clone()),
        None => Ok(sym_eigh(data.stack.get(v), k + 1)?.columns(1, k)),
    }
}

fn rjd_config(trials: usize, k: usize, seed: u64, sampler: Sampler) -> RjdConfig {
    RjdConfig {
        sampler: sampler.into(),
        ..RjdConfig::new(trials, k, seed)
    }
}

pub fn execute(cfg: &RunConfig, data: &Loaded) -> Result<Outcome> {
    check_against(cfg, data)?;
    let k = cfg.k;
    let eval = KMeansConfig::with_seed(cfg.eval_seed);
    let stack = &data.stack;
    let labels = data.labels.as_ref();
    let mut extras = Map::new();
    let mut artifacts = Vec::new();
    let mut landscape = None;

    let embedding: DMatrix<f64> = match &cfg.params {
        MethodParams::RjdBase {
            trials,
            sampler,
            method_seed,
        } => {
            let outcome = rjd_base(stack, &rjd_config(*trials, k, *method_seed, *sampler))?;
            let best = outcome.selected();
            extras.insert("selected_trial".into(), json!(best.trial_index));
            extras.insert("selected_objective".into(), json!(best.objective));
            extras.insert("selected_weights".into(), json!(best.mu.as_slice()));
            extras.insert("gap_warning".into(), json!(best.gap_warning));
            extras.insert("failed_trials".into(), json!(outcome.failures.len()));
            artifacts.push(("trials.csv", csv_bytes(|b| outcome.write_ledger(b))?));
            if let Some(truth) = labels {
                let stats = landscape_stats(&outcome.trials, truth, k, &eval)?;
                extras.insert("mean_trial_nmi".into(), json!(stats.mean_nmi));
                extras.insert("std_trial_nmi".into(), json!(stats.std_nmi));
                extras.insert("above_mean".into(), json!(stats.above_mean));
                artifacts.push(("landscape.csv", csv_bytes(|b| stats.write_csv(b))?));
                landscape = Some(TrialSummary {
                    mean_nmi: stats.mean_nmi,
                    std_nmi: stats.std_nmi,
                    above_mean: stats.above_mean,
                    selected_objective: best.objective,
                });
            }
            best.embedding.matrix().clone()
        }
        MethodParams::PgaSingle { iterations, step_size } | MethodParams::PgaBase { iterations, step_size } => {
            let objective = match cfg.params {
                MethodParams::PgaSingle { .. } => ObjectiveKind::SingleDirectional,
                _ => ObjectiveKind::Base,
            };
            let pga = PgaConfig {
                iterations: *iterations,
                step_size: *step_size,
                eval,
                ..PgaConfig::new(objective, k)
            };
            let outcome = pga_maximize(stack, &pga, labels)?;
            let last = outcome.trace.records.last().expect("trace holds the start point");
            extras.insert("final_weights".into(), json!(outcome.mu_star.as_slice()));
            extras.insert("final_objective".into(), json!(last.objective));
            artifacts.push(("trace.csv", csv_bytes(|b| outcome.trace.write_csv(b))?));
            run_trial(stack, k, outcome.mu_star)?.embedding.into_matrix()
        }
        MethodParams::SingleLaplacian { modality } => {
            let trial = run_trial(stack, k, SimplexWeights::vertex(data.m(), *modality))?;
            extras.insert("eigenvalues".into(), json!(trial.eigenvalues));
            trial.embedding.into_matrix()
        }
        MethodParams::Mvsc { iterations } => mvsc(&data.affinities, k, *iterations)?.concatenated(),
        MethodParams::Coreg {
            lambda,
            iterations,
            coupling,
        } => coreg_mvsc(stack, k, *lambda, *iterations, (*coupling).into())?.concatenated(),
        MethodParams::MvKmeans {
            views,
            max_iters,
            method_seed,
        }
        | MethodParams::MvSphkmeans {
            views,
            max_iters,
            method_seed,
        } => {
            let a = kmeans_view(data, views[0], k)?;
            let b = kmeans_view(data, views[1], k)?;
            let mv = MvKMeansConfig {
                max_iters: *max_iters,
                seed: *method_seed,
                ..MvKMeansConfig::default()
            };
            let (assignments, responsibilities) = match cfg.params {
                MethodParams::MvKmeans { .. } => {
                    (mv_kmeans([&a, &b], k, &mv)?, "isotropic-gaussian-shared-variance")
                }
                _ => (mv_sph_kmeans([&a, &b], k, &mv)?, "von-mises-fisher-unit-concentration"),
            };
            extras.insert("responsibility_model".into(), json!(responsibilities));
            extras.insert(
                "feature_source".into(),
                json!(if data.features.is_some() {
                    "features"
                } else {
                    "spectral"
                }),
            );
            return finish(assignments, labels, extras, artifacts, landscape);
        }
        MethodParams::JdRefine {
            init,
            trials,
            sampler,
            method_seed,
            sweeps,
            tol,
        } => {
            let jd = JdConfig {
                max_sweeps: *sweeps,
                tol: *tol,
                ..JdConfig::default()
            };
            let curve = match init {
                Init::RjdBase => {
                    let outcome = rjd_base(stack, &rjd_config(*trials, k, *method_seed, *sampler))?;
                    let mu = &outcome.selected().mu;
                    extras.insert("init_weights".into(), json!(mu.as_slice()));
                    refine_from_weights(stack, mu, k, &jd, labels, &eval)?
                }
                Init::Identity => refine(stack, &DMatrix::identity(data.n(), data.n()), k, &jd, labels, &eval)?,
            };
            extras.insert("sweeps".into(), json!(curve.result.sweeps));
            extras.insert("initial_offdiag_mass".into(), json!(curve.records[0].offdiag_mass));
            extras.insert(
                "final_offdiag_mass".into(),
                json!(curve.records.last().expect("non-empty").offdiag_mass),
            );
            extras.insert("initial_nmi".into(), json!(curve.initial_nmi()));
            artifacts.push(("learning_curve.csv", csv_bytes(|b| curve.write_csv(b))?));
            order_modes(&curve.result.basis, stack, k)?.into_matrix()
        }
    };
    let assignments = kmeans(&embedding, k, &eval)?.labels;
    finish(assignments, labels, extras, artifacts, landscape)
}

fn finish(
    assignments: ClusterLabels,
    truth: Option<&ClusterLabels>,
    extras: Map<String, Value>,
    mut artifacts: Vec<(&'static str, Vec<u8>)>,
    landscape: Option<TrialSummary>,
) -> Result<Outcome> {
    let score = truth.map(|t| nmi(&assignments, t)).transpose()?;
    artifacts.push(("assignments.csv", csv_bytes(|b| write_labels(b, &assignments))?));
    Ok(Outcome {
        assignments,
        nmi: score,
        extras,
        artifacts,
        landscape,
    })
}
