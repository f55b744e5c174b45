use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use clap::Args;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;
use spectral_fusion::io::{export_dataset, read_labels};
use spectral_fusion::{connectivity, generate, Report, SpectrumCheck};

use crate::config::{self, DatasetArgs, MethodArgs, RunConfig, PRESET};
use crate::dataset::{self, Loaded};
use crate::methods::{execute, Outcome};

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long, default_value = PRESET, value_parser = [PRESET])]
    preset: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Node count (preset default when absent).
    #[arg(long)]
    n: Option<usize>,
    /// Cluster count (preset default when absent).
    #[arg(long)]
    k: Option<usize>,
    /// Dirichlet concentration of the cluster proportions.
    #[arg(long)]
    concentration: Option<f64>,
    /// Output directory.
    #[arg(long, env = "SPECTRAL_FUSION_OUT_DIR")]
    out: PathBuf,
}

#[derive(Args, Debug)]
pub struct RunArgs {
    /// TOML file with `[dataset]` and `[method]` tables; flags take precedence.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(flatten)]
    dataset: DatasetArgs,
    #[command(flatten)]
    method: MethodArgs,
    /// Output directory for the report and CSV artifacts.
    #[arg(long, env = "SPECTRAL_FUSION_OUT_DIR")]
    out: PathBuf,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(flatten)]
    dataset: DatasetArgs,
    #[command(flatten)]
    method: MethodArgs,
    /// First seed of the sweep.
    #[arg(long, default_value_t = 0)]
    seed_start: u64,
    /// Number of consecutive seeds. Each seed replaces both the synthetic
    /// dataset seed and the method seed.
    #[arg(long)]
    seeds: u64,
    #[arg(long, env = "SPECTRAL_FUSION_OUT_DIR")]
    out: PathBuf,
}

#[derive(Args, Debug)]
pub struct InfoArgs {
    #[command(flatten)]
    dataset: DatasetArgs,
    /// Cluster count of a synthetic preset.
    #[arg(long)]
    k: Option<usize>,
}

/// Prints to stdout; a closed pipe (e.g. `| head`) is not an error.
fn emit(text: &str) -> anyhow::Result<()> {
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(spectral_fusion::Error::from(e).into()),
        _ => Ok(()),
    }
}

fn create_dir(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir)
        .map_err(spectral_fusion::Error::from)
        .with_context(|| format!("creating {}", dir.display()))
}

pub fn synth(args: SynthArgs) -> anyhow::Result<()> {
    let cfg = config::preset_config(&args.preset, args.seed, args.n, args.k, args.concentration)?;
    let data = generate(&cfg).context("generating dataset")?;
    create_dir(&args.out)?;
    export_dataset(&args.out, &data).with_context(|| format!("writing {}", args.out.display()))?;
    emit(&serde_json::to_string_pretty(&data.provenance())?)?;
    Ok(())
}

/// Class count of `labels.csv` in a data directory, if present.
fn directory_label_k(dataset: &DatasetArgs) -> anyhow::Result<Option<usize>> {
    let Some(dir) = dataset.data.as_ref().or(dataset.features.as_ref()) else {
        return Ok(None);
    };
    let path = dir.join("labels.csv");
    if !path.exists() {
        return Ok(None);
    }
    let file = fs::File::open(&path).map_err(spectral_fusion::Error::from)?;
    let labels = read_labels(file).with_context(|| format!("reading {}", path.display()))?;
    Ok(Some(labels.k()))
}

fn resolve(config: Option<&Path>, dataset: DatasetArgs, method: MethodArgs) -> anyhow::Result<RunConfig> {
    let (dataset, method) = config::merge(dataset, method, config)?;
    let label_k = if method.k.is_none() {
        directory_label_k(&dataset)?
    } else {
        None
    };
    Ok(config::resolve(&dataset, &method, label_k)?)
}

fn load(source: &config::DatasetSource) -> anyhow::Result<Loaded> {
    dataset::load(source).context("loading dataset")
}

fn report_for(cfg: &RunConfig, data: &Loaded, outcome: &Outcome, seconds: f64) -> anyhow::Result<Report> {
    let mut report = Report::new(
        cfg.method().name(),
        data.describe(&cfg.dataset),
        serde_json::to_value(cfg)?,
    );
    report.nmi = outcome.nmi;
    report.wall_clock_seconds = seconds;
    report.extras = outcome.extras.clone();
    report.extra("cluster_sizes", outcome.assignments.cluster_sizes())?;
    Ok(report)
}

pub fn run(args: RunArgs) -> anyhow::Result<()> {
    let cfg = resolve(args.config.as_deref(), args.dataset, args.method)?;
    let started = Instant::now();
    let data = load(&cfg.dataset)?;
    let outcome = execute(&cfg, &data).with_context(|| format!("running {}", cfg.method().name()))?;
    let report = report_for(&cfg, &data, &outcome, started.elapsed().as_secs_f64())?;

    create_dir(&args.out)?;
    for (name, bytes) in &outcome.artifacts {
        fs::write(args.out.join(name), bytes).map_err(spectral_fusion::Error::from)?;
    }
    report.write_file(&args.out.join("report.json"))?;
    match report.nmi {
        Some(v) => emit(&format!("{} nmi {v:.4}", cfg.method().name()))?,
        None => emit(&format!("{} done (no labels)", cfg.method().name()))?,
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct SweepRow {
    seed: u64,
    nmi: f64,
    mean_trial_nmi: Option<f64>,
    std_trial_nmi: Option<f64>,
    above_mean: Option<bool>,
    selected_objective: Option<f64>,
}

pub fn sweep(args: SweepArgs) -> anyhow::Result<()> {
    if args.seeds == 0 {
        return Err(spectral_fusion::Error::InvalidConfig("--seeds must be at least 1".into()).into());
    }
    if args.method.method_seed.is_some() || args.dataset.seed.is_some() {
        return Err(spectral_fusion::Error::InvalidConfig(
            "--seed and --method-seed are set per sweep seed; use --seed-start".into(),
        )
        .into());
    }
    let base = resolve(args.config.as_deref(), args.dataset, args.method)?;
    let end = args
        .seed_start
        .checked_add(args.seeds)
        .ok_or_else(|| spectral_fusion::Error::InvalidConfig("seed range overflows".into()))?;

    let started = Instant::now();
    let rows = (args.seed_start..end)
        .into_par_iter()
        .map(|seed| -> anyhow::Result<SweepRow> {
            let cfg = base.reseeded(seed);
            let data = load(&cfg.dataset)?;
            let outcome = execute(&cfg, &data).with_context(|| format!("seed {seed}"))?;
            let nmi = outcome
                .nmi
                .ok_or_else(|| spectral_fusion::Error::InvalidLabels("sweeps need ground-truth labels".into()))?;
            let l = outcome.landscape;
            Ok(SweepRow {
                seed,
                nmi,
                mean_trial_nmi: l.map(|l| l.mean_nmi),
                std_trial_nmi: l.map(|l| l.std_nmi),
                above_mean: l.map(|l| l.above_mean),
                selected_objective: l.map(|l| l.selected_objective),
            })
        })
        .collect::<anyhow::Result<Vec<_>>>()?;

    create_dir(&args.out)?;
    let mut csv = csv::Writer::from_path(args.out.join("sweep.csv")).map_err(spectral_fusion::Error::from)?;
    for row in &rows {
        csv.serialize(row).map_err(spectral_fusion::Error::from)?;
    }
    csv.flush().map_err(spectral_fusion::Error::from)?;

    let count = rows.len() as f64;
    let above: Vec<bool> = rows.iter().filter_map(|r| r.above_mean).collect();
    let above_fraction =
        (!above.is_empty()).then(|| above.iter().filter(|a| **a).count() as f64 / above.len() as f64);
    let mut report = Report::new(
        base.method().name(),
        serde_json::to_value(&base.dataset)?,
        json!({ "run": base, "seed_start": args.seed_start, "seeds": args.seeds }),
    );
    report.nmi = Some(rows.iter().map(|r| r.nmi).sum::<f64>() / count);
    report.wall_clock_seconds = started.elapsed().as_secs_f64();
    report.extra("above_mean_fraction", above_fraction)?;
    report.write_file(&args.out.join("sweep.json"))?;
    emit(&format!(
        "{} seeds, mean nmi {:.4}{}",
        rows.len(),
        report.nmi.unwrap_or(f64::NAN),
        above_fraction
            .map(|f| format!(", above-mean fraction {f:.3}"))
            .unwrap_or_default()
    ))
}

pub fn info(args: InfoArgs) -> anyhow::Result<()> {
    let source = config::dataset_source(&args.dataset, args.k)?;
    let data = load(&source)?;
    let modalities = data
        .stack
        .matrices()
        .iter()
        .zip(&data.affinities)
        .map(|(l, w)| -> anyhow::Result<_> {
            let check = SpectrumCheck::of(l)?;
            Ok(json!({
                "min_eigenvalue": check.min_eigenvalue,
                "max_eigenvalue": check.max_eigenvalue,
                "zero_multiplicity": check.zero_multiplicity,
                "passes": check.passes(),
                "components": connectivity(w, 0.0),
            }))
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    let out = json!({
        "dataset": data.describe(&source),
        "cluster_sizes": data.labels.as_ref().map(|l| l.cluster_sizes()),
        "modalities": modalities,
    });
    emit(&serde_json::to_string_pretty(&out)?)?;
    Ok(())
}
