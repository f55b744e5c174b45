//! Command-line and config-file options and their resolution into a fully
//! specified run.
//!
//! A config file is TOML with optional `[dataset]` and `[method]` tables
//! holding the same keys as the long flags (with `-` or `_`). Flags win.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use spectral_fusion::baselines::CouplingSign;
use spectral_fusion::{Error, Result, SbmConfig, SimplexSampler};

pub const PRESET: &str = "sbm-paper";
const DEFAULT_K: usize = 6;
const DEFAULT_NN_INDEX: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    RjdBase,
    PgaSingle,
    PgaBase,
    Mvsc,
    Coreg,
    MvKmeans,
    MvSphkmeans,
    JdRefine,
    SingleLaplacian,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::RjdBase => "rjd-base",
            Method::PgaSingle => "pga-single",
            Method::PgaBase => "pga-base",
            Method::Mvsc => "mvsc",
            Method::Coreg => "coreg",
            Method::MvKmeans => "mv-kmeans",
            Method::MvSphkmeans => "mv-sphkmeans",
            Method::JdRefine => "jd-refine",
            Method::SingleLaplacian => "single-laplacian",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Coupling {
    /// Agreement with the other views lowers the energy.
    Reward,
    Penalize,
}

impl From<Coupling> for CouplingSign {
    fn from(c: Coupling) -> Self {
        match c {
            Coupling::Reward => CouplingSign::Reward,
            Coupling::Penalize => CouplingSign::Penalize,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Init {
    /// Full eigenbasis of the RJD-BASE selected combination.
    RjdBase,
    Identity,
}

/// Law of the random simplex weights drawn by RJD-BASE.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sampler {
    /// i.i.d. uniform draws divided by their sum; concentrates near the centre.
    NormalizedUniform,
    /// Uniform on the simplex.
    FlatDirichlet,
}

impl From<Sampler> for SimplexSampler {
    fn from(s: Sampler) -> Self {
        match s {
            Sampler::NormalizedUniform => SimplexSampler::NormalizedUniform,
            Sampler::FlatDirichlet => SimplexSampler::FlatDirichlet,
        }
    }
}

/// Where the graphs come from. At most one of `--preset`, `--data` and
/// `--features`; the preset is the default.
#[derive(Args, Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct DatasetArgs {
    /// Built-in synthetic preset.
    #[arg(long, value_parser = [PRESET])]
    pub preset: Option<String>,
    /// Seed of the synthetic dataset.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Node count of the synthetic dataset.
    #[arg(long)]
    pub n: Option<usize>,
    /// Dirichlet concentration of the synthetic cluster proportions.
    #[arg(long)]
    pub concentration: Option<f64>,
    /// Directory with `affinity_<i>.bin` and optional `labels.csv`.
    #[arg(long, value_name = "DIR")]
    pub data: Option<PathBuf>,
    /// Directory with `view_<i>.csv` feature tables and optional `labels.csv`.
    #[arg(long, value_name = "DIR")]
    pub features: Option<PathBuf>,
    /// Neighbour rank used for the self-tuning bandwidths of feature input.
    #[arg(long)]
    pub nn_index: Option<usize>,
}

impl DatasetArgs {
    fn or(self, file: DatasetArgs) -> DatasetArgs {
        DatasetArgs {
            preset: self.preset.or(file.preset),
            seed: self.seed.or(file.seed),
            n: self.n.or(file.n),
            concentration: self.concentration.or(file.concentration),
            data: self.data.or(file.data),
            features: self.features.or(file.features),
            nn_index: self.nn_index.or(file.nn_index),
        }
    }
}

#[derive(Args, Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct MethodArgs {
    #[arg(long)]
    pub method: Option<Method>,
    /// Number of clusters and embedding dimension.
    #[arg(long)]
    pub k: Option<usize>,
    /// Random trials of RJD-BASE.
    #[arg(long, alias = "T")]
    pub trials: Option<usize>,
    /// Weight sampler of RJD-BASE.
    #[arg(long)]
    pub sampler: Option<Sampler>,
    /// Seed of the method's own randomness.
    #[arg(long)]
    pub method_seed: Option<u64>,
    /// Ascent steps (pga-*) or co-training rounds (mvsc, coreg).
    #[arg(long, alias = "J")]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub step_size: Option<f64>,
    /// Co-regularization weight.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub coupling: Option<Coupling>,
    /// Modality index for single-laplacian.
    #[arg(long)]
    pub modality: Option<usize>,
    /// The two views used by mv-kmeans and mv-sphkmeans.
    #[arg(long, num_args = 2, value_names = ["A", "B"])]
    pub views: Option<Vec<usize>>,
    /// Iteration cap of mv-kmeans and mv-sphkmeans.
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Jacobi sweep cap of jd-refine.
    #[arg(long)]
    pub sweeps: Option<usize>,
    /// Jacobi stopping tolerance on the off-diagonal decrease.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Starting basis of jd-refine.
    #[arg(long)]
    pub init: Option<Init>,
    /// Seed of the k-means run that turns embeddings into clusters.
    #[arg(long)]
    pub eval_seed: Option<u64>,
}

impl MethodArgs {
    fn or(self, file: MethodArgs) -> MethodArgs {
        MethodArgs {
            method: self.method.or(file.method),
            k: self.k.or(file.k),
            trials: self.trials.or(file.trials),
            sampler: self.sampler.or(file.sampler),
            method_seed: self.method_seed.or(file.method_seed),
            iterations: self.iterations.or(file.iterations),
            step_size: self.step_size.or(file.step_size),
            lambda: self.lambda.or(file.lambda),
            coupling: self.coupling.or(file.coupling),
            modality: self.modality.or(file.modality),
            views: self.views.or(file.views),
            max_iters: self.max_iters.or(file.max_iters),
            sweeps: self.sweeps.or(file.sweeps),
            tol: self.tol.or(file.tol),
            init: self.init.or(file.init),
            eval_seed: self.eval_seed.or(file.eval_seed),
        }
    }

    /// Flags set that `method` does not read.
    fn unused_by(&self, method: Method) -> Vec<&'static str> {
        use Method::*;
        let set = [
            ("trials", self.trials.is_some(), matches!(method, RjdBase | JdRefine)),
            ("sampler", self.sampler.is_some(), matches!(method, RjdBase | JdRefine)),
            (
                "method-seed",
                self.method_seed.is_some(),
                matches!(method, RjdBase | JdRefine | MvKmeans | MvSphkmeans),
            ),
            (
                "iterations",
                self.iterations.is_some(),
                matches!(method, PgaSingle | PgaBase | Mvsc | Coreg),
            ),
            (
                "step-size",
                self.step_size.is_some(),
                matches!(method, PgaSingle | PgaBase),
            ),
            ("lambda", self.lambda.is_some(), method == Coreg),
            ("coupling", self.coupling.is_some(), method == Coreg),
            ("modality", self.modality.is_some(), method == SingleLaplacian),
            ("views", self.views.is_some(), matches!(method, MvKmeans | MvSphkmeans)),
            (
                "max-iters",
                self.max_iters.is_some(),
                matches!(method, MvKmeans | MvSphkmeans),
            ),
            ("sweeps", self.sweeps.is_some(), method == JdRefine),
            ("tol", self.tol.is_some(), method == JdRefine),
            ("init", self.init.is_some(), method == JdRefine),
        ];
        set.into_iter()
            .filter(|(_, given, used)| *given && !used)
            .map(|(name, ..)| name)
            .collect()
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    #[serde(default)]
    dataset: DatasetArgs,
    #[serde(default)]
    method: MethodArgs,
}

/// Reads a config file; keys may use `_` or `-`.
fn read_config(path: &Path) -> Result<FileConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidConfig(format!("cannot read config {}: {e}", path.display())))?;
    let table: toml::Table =
        toml::from_str(&text).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
    let table: toml::Table = table
        .into_iter()
        .map(|(name, section)| {
            let section = match section {
                toml::Value::Table(t) => {
                    toml::Value::Table(t.into_iter().map(|(k, v)| (k.replace('_', "-"), v)).collect())
                }
                other => other,
            };
            (name, section)
        })
        .collect();
    FileConfig::deserialize(toml::Value::Table(table))
        .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
}

/// Applies the optional config file underneath the flags.
pub fn merge(dataset: DatasetArgs, method: MethodArgs, file: Option<&Path>) -> Result<(DatasetArgs, MethodArgs)> {
    match file {
        None => Ok((dataset, method)),
        Some(path) => {
            let cfg = read_config(path)?;
            Ok((dataset.or(cfg.dataset), method.or(cfg.method)))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "source", rename_all = "kebab-case")]
pub enum DatasetSource {
    Preset { preset: String, sbm: SbmConfig },
    Affinities { dir: PathBuf },
    Features { dir: PathBuf, nn_index: usize },
}

/// Builds the generator configuration of a named preset.
pub fn preset_config(
    name: &str,
    seed: u64,
    n: Option<usize>,
    k: Option<usize>,
    concentration: Option<f64>,
) -> Result<SbmConfig> {
    if name != PRESET {
        return Err(Error::InvalidConfig(format!("unknown preset {name:?}")));
    }
    let mut cfg = SbmConfig::standard(seed);
    cfg.n = n.unwrap_or(cfg.n);
    cfg.k = k.unwrap_or(cfg.k);
    cfg.dirichlet_concentration = concentration.unwrap_or(cfg.dirichlet_concentration);
    cfg.validate()?;
    Ok(cfg)
}

/// Resolves where the data comes from. `k` only shapes a synthetic preset.
pub fn dataset_source(args: &DatasetArgs, k: Option<usize>) -> Result<DatasetSource> {
    let sources = [args.preset.is_some(), args.data.is_some(), args.features.is_some()];
    if sources.iter().filter(|s| **s).count() > 1 {
        return Err(Error::InvalidConfig(
            "choose one of --preset, --data and --features".into(),
        ));
    }
    let synthetic_only = [
        ("seed", args.seed.is_some()),
        ("n", args.n.is_some()),
        ("concentration", args.concentration.is_some()),
    ];
    if let Some(dir) = &args.data {
        reject(&synthetic_only, "directory input")?;
        reject(&[("nn-index", args.nn_index.is_some())], "affinity input")?;
        return Ok(DatasetSource::Affinities { dir: dir.clone() });
    }
    if let Some(dir) = &args.features {
        reject(&synthetic_only, "directory input")?;
        return Ok(DatasetSource::Features {
            dir: dir.clone(),
            nn_index: args.nn_index.unwrap_or(DEFAULT_NN_INDEX),
        });
    }
    reject(&[("nn-index", args.nn_index.is_some())], "synthetic input")?;
    let name = args.preset.as_deref().unwrap_or(PRESET);
    let sbm = preset_config(name, args.seed.unwrap_or(0), args.n, k, args.concentration)?;
    Ok(DatasetSource::Preset {
        preset: name.to_string(),
        sbm,
    })
}

fn reject(flags: &[(&str, bool)], context: &str) -> Result<()> {
    let given: Vec<_> = flags
        .iter()
        .filter(|(_, g)| *g)
        .map(|(name, _)| format!("--{name}"))
        .collect();
    if given.is_empty() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!(
            "{} not applicable to {context}",
            given.join(", ")
        )))
    }
}

/// Fully specified method parameters.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum MethodParams {
    RjdBase {
        trials: usize,
        sampler: Sampler,
        method_seed: u64,
    },
    PgaSingle {
        iterations: usize,
        step_size: f64,
    },
    PgaBase {
        iterations: usize,
        step_size: f64,
    },
    Mvsc {
        iterations: usize,
    },
    Coreg {
        lambda: f64,
        iterations: usize,
        coupling: Coupling,
    },
    MvKmeans {
        views: [usize; 2],
        max_iters: usize,
        method_seed: u64,
    },
    MvSphkmeans {
        views: [usize; 2],
        max_iters: usize,
        method_seed: u64,
    },
    JdRefine {
        init: Init,
        trials: usize,
        sampler: Sampler,
        method_seed: u64,
        sweeps: usize,
        tol: f64,
    },
    SingleLaplacian {
        modality: usize,
    },
}

/// Everything a run depends on; echoed verbatim into the report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub dataset: DatasetSource,
    pub k: usize,
    pub eval_seed: u64,
    pub params: MethodParams,
}

impl RunConfig {
    pub fn method(&self) -> Method {
        match self.params {
            MethodParams::RjdBase { .. } => Method::RjdBase,
            MethodParams::PgaSingle { .. } => Method::PgaSingle,
            MethodParams::PgaBase { .. } => Method::PgaBase,
            MethodParams::Mvsc { .. } => Method::Mvsc,
            MethodParams::Coreg { .. } => Method::Coreg,
            MethodParams::MvKmeans { .. } => Method::MvKmeans,
            MethodParams::MvSphkmeans { .. } => Method::MvSphkmeans,
            MethodParams::JdRefine { .. } => Method::JdRefine,
            MethodParams::SingleLaplacian { .. } => Method::SingleLaplacian,
        }
    }

    /// The same run with the dataset seed (synthetic input only) and the
    /// method seed replaced by `seed`.
    pub fn reseeded(&self, seed: u64) -> RunConfig {
        let mut out = self.clone();
        if let DatasetSource::Preset { sbm, .. } = &mut out.dataset {
            sbm.seed = seed;
        }
        match &mut out.params {
            MethodParams::RjdBase { method_seed, .. }
            | MethodParams::MvKmeans { method_seed, .. }
            | MethodParams::MvSphkmeans { method_seed, .. }
            | MethodParams::JdRefine { method_seed, .. } => *method_seed = seed,
            _ => {}
        }
        out
    }
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::InvalidConfig(format!("--{name} must be positive, got {v}")))
    }
}

fn at_least_one(name: &str, v: usize) -> Result<usize> {
    if v >= 1 {
        Ok(v)
    } else {
        Err(Error::InvalidConfig(format!("--{name} must be at least 1")))
    }
}

/// Validates the method parameters and fills in defaults. `label_k` is the
/// class count of labels found in a data directory, used when `--k` is absent.
pub fn resolve(dataset: &DatasetArgs, args: &MethodArgs, label_k: Option<usize>) -> Result<RunConfig> {
    let method = args
        .method
        .ok_or_else(|| Error::InvalidConfig("--method is required".into()))?;
    let unused = args.unused_by(method);
    if !unused.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "{} not used by method {}",
            unused.iter().map(|u| format!("--{u}")).collect::<Vec<_>>().join(", "),
            method.name()
        )));
    }
    let is_synthetic = dataset.data.is_none() && dataset.features.is_none();
    let k = match (args.k, is_synthetic) {
        (Some(k), _) => k,
        (None, true) => DEFAULT_K,
        (None, false) => {
            label_k.ok_or_else(|| Error::InvalidConfig("--k is required when the data has no labels".into()))?
        }
    };
    if k < 1 {
        return Err(Error::InvalidConfig("--k must be at least 1".into()));
    }
    let source = dataset_source(dataset, is_synthetic.then_some(k))?;

    let trials = at_least_one("trials", args.trials.unwrap_or(200))?;
    let method_seed = args.method_seed.unwrap_or(0);
    let sampler = args.sampler.unwrap_or(Sampler::NormalizedUniform);
    let step_size = positive("step-size", args.step_size.unwrap_or(0.5))?;
    let views = match args.views.as_deref() {
        None => [0, 1],
        Some(&[a, b]) if a != b => [a, b],
        Some(_) => return Err(Error::InvalidConfig("--views needs two distinct indices".into())),
    };
    let max_iters = at_least_one("max-iters", args.max_iters.unwrap_or(100))?;
    let params = match method {
        Method::RjdBase => MethodParams::RjdBase {
            trials,
            sampler,
            method_seed,
        },
        Method::PgaSingle => MethodParams::PgaSingle {
            iterations: at_least_one("iterations", args.iterations.unwrap_or(30))?,
            step_size,
        },
        Method::PgaBase => MethodParams::PgaBase {
            iterations: at_least_one("iterations", args.iterations.unwrap_or(30))?,
            step_size,
        },
        Method::Mvsc => MethodParams::Mvsc {
            iterations: args.iterations.unwrap_or(5),
        },
        Method::Coreg => {
            let lambda = args.lambda.unwrap_or(0.5);
            if !(lambda >= 0.0 && lambda.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "--lambda must be nonnegative, got {lambda}"
                )));
            }
            MethodParams::Coreg {
                lambda,
                iterations: args.iterations.unwrap_or(5),
                coupling: args.coupling.unwrap_or(Coupling::Reward),
            }
        }
        Method::MvKmeans => MethodParams::MvKmeans {
            views,
            max_iters,
            method_seed,
        },
        Method::MvSphkmeans => MethodParams::MvSphkmeans {
            views,
            max_iters,
            method_seed,
        },
        Method::JdRefine => {
            let init = args.init.unwrap_or(Init::RjdBase);
            if init == Init::Identity && (args.trials.is_some() || args.sampler.is_some()) {
                return Err(Error::InvalidConfig(
                    "--trials and --sampler only apply with --init rjd-base".into(),
                ));
            }
            MethodParams::JdRefine {
                init,
                trials,
                sampler,
                method_seed,
                sweeps: at_least_one("sweeps", args.sweeps.unwrap_or(50))?,
                tol: positive("tol", args.tol.unwrap_or(1e-12))?,
            }
        }
        Method::SingleLaplacian => MethodParams::SingleLaplacian {
            modality: args.modality.unwrap_or(0),
        },
    };
    Ok(RunConfig {
        dataset: source,
        k,
        eval_seed: args.eval_seed.unwrap_or(0),
        params,
    })
}
