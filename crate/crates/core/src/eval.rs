//! k-means on embedding rows, normalized mutual information and the
//! trial-landscape summary.

use std::collections::HashMap;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rjd::{select_best, Trial};

/// A hard partition of `n` items into labels `0..k`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterLabels {
    assignments: Vec<usize>,
    k: usize,
}

impl ClusterLabels {
    pub fn new(assignments: Vec<usize>, k: usize) -> Result<Self> {
        if assignments.is_empty() {
            return Err(Error::InvalidLabels("no items".into()));
        }
        if let Some(&bad) = assignments.iter().find(|&&a| a >= k) {
            return Err(Error::InvalidLabels(format!("label {bad} not below k = {k}")));
        }
        Ok(Self { assignments, k })
    }

    /// Uses `max + 1` as the label count.
    pub fn from_assignments(assignments: Vec<usize>) -> Result<Self> {
        let k = assignments.iter().max().map_or(0, |m| m + 1);
        Self::new(assignments, k)
    }

    pub fn assignments(&self) -> &[usize] {
        &self.assignments
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.assignments.len()
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }

    pub fn distinct(&self) -> usize {
        self.cluster_sizes().iter().filter(|&&s| s > 0).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub restarts: usize,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            restarts: 10,
            max_iter: 300,
            seed: 0,
        }
    }
}

impl KMeansConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct KMeansFit {
    pub labels: ClusterLabels,
    pub wcss: f64,
    pub centroids: DMatrix<f64>,
    /// Converged within-cluster sum of squares of every restart, in order.
    pub restart_wcss: Vec<f64>,
}

/// Row-major copy of the data for cache-friendly distance loops.
pub(crate) struct Points {
    pub data: Vec<f64>,
    pub n: usize,
    pub d: usize,
}

impl Points {
    pub fn from_rows(x: &DMatrix<f64>) -> Self {
        let (n, d) = x.shape();
        let mut data = Vec::with_capacity(n * d);
        for p in 0..n {
            data.extend(x.row(p).iter());
        }
        Self { data, n, d }
    }

    pub fn row(&self, p: usize) -> &[f64] {
        &self.data[p * self.d..(p + 1) * self.d]
    }
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// k-means++ seeding: returns `k` row indices.
pub(crate) fn kmeanspp_indices<R: Rng>(pts: &Points, k: usize, rng: &mut R) -> Vec<usize> {
    let mut chosen = vec![rng.random_range(0..pts.n)];
    let mut nearest: Vec<f64> = (0..pts.n).map(|p| sq_dist(pts.row(p), pts.row(chosen[0]))).collect();
    while chosen.len() < k {
        let total: f64 = nearest.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = None;
            for (p, &w) in nearest.iter().enumerate() {
                if w > 0.0 {
                    pick = Some(p);
                    if target < w {
                        break;
                    }
                    target -= w;
                }
            }
            pick.expect("positive total implies a positive weight")
        } else {
            // All remaining points coincide with a centre; pick any unused index.
            let unused: Vec<usize> = (0..pts.n).filter(|p| !chosen.contains(p)).collect();
            unused[rng.random_range(0..unused.len())]
        };
        chosen.push(next);
        for (p, w) in nearest.iter_mut().enumerate() {
            *w = w.min(sq_dist(pts.row(p), pts.row(next)));
        }
    }
    chosen
}

fn lloyd(pts: &Points, mut centroids: Vec<f64>, k: usize, max_iter: usize) -> (Vec<usize>, Vec<f64>, f64) {
    let d = pts.d;
    let mut assign = vec![usize::MAX; pts.n];
    for _ in 0..max_iter {
        let mut changed = false;
        for (p, slot) in assign.iter_mut().enumerate() {
            let row = pts.row(p);
            let mut best = (f64::INFINITY, 0);
            for c in 0..k {
                let dist = sq_dist(row, &centroids[c * d..(c + 1) * d]);
                if dist < best.0 {
                    best = (dist, c);
                }
            }
            if *slot != best.1 {
                *slot = best.1;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![0.0; k * d];
        let mut counts = vec![0usize; k];
        for (p, &c) in assign.iter().enumerate() {
            counts[c] += 1;
            for (s, v) in sums[c * d..(c + 1) * d].iter_mut().zip(pts.row(p)) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                // Move the worst-fitting point into the empty cluster.
                let far = (0..pts.n).filter(|&p| counts[assign[p]] > 1).max_by(|&a, &b| {
                    let da = sq_dist(pts.row(a), &centroids[assign[a] * d..(assign[a] + 1) * d]);
                    let db = sq_dist(pts.row(b), &centroids[assign[b] * d..(assign[b] + 1) * d]);
                    da.total_cmp(&db)
                });
                if let Some(p) = far {
                    let old = assign[p];
                    counts[old] -= 1;
                    for (s, v) in sums[old * d..(old + 1) * d].iter_mut().zip(pts.row(p)) {
                        *s -= v;
                    }
                    assign[p] = c;
                    counts[c] = 1;
                    sums[c * d..(c + 1) * d].copy_from_slice(pts.row(p));
                }
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                for j in 0..d {
                    centroids[c * d + j] = sums[c * d + j] / counts[c] as f64;
                }
            }
        }
    }
    let wcss = (0..pts.n)
        .map(|p| sq_dist(pts.row(p), &centroids[assign[p] * d..(assign[p] + 1) * d]))
        .sum();
    (assign, centroids, wcss)
}

/// Best-of-`restarts` k-means with k-means++ seeding, clustering the rows of `x`.
pub fn kmeans(x: &DMatrix<f64>, k: usize, config: &KMeansConfig) -> Result<KMeansFit> {
    let n = x.nrows();
    if k == 0 {
        return Err(Error::InvalidConfig("k must be positive".into()));
    }
    if k > n {
        return Err(Error::KExceedsN { k, n });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("k-means input"));
    }
    let pts = Points::from_rows(x);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut best: Option<(Vec<usize>, Vec<f64>, f64)> = None;
    let mut restart_wcss = Vec::with_capacity(config.restarts.max(1));
    for _ in 0..config.restarts.max(1) {
        let seeds = kmeanspp_indices(&pts, k, &mut rng);
        let init: Vec<f64> = seeds.iter().flat_map(|&s| pts.row(s).to_vec()).collect();
        let run = lloyd(&pts, init, k, config.max_iter);
        restart_wcss.push(run.2);
        if best.as_ref().is_none_or(|b| run.2 < b.2) {
            best = Some(run);
        }
    }
    let (assign, centroids, wcss) = best.expect("at least one restart");
    Ok(KMeansFit {
        labels: ClusterLabels::new(assign, k)?,
        wcss,
        centroids: DMatrix::from_row_slice(k, pts.d, &centroids),
        restart_wcss,
    })
}

/// Within-cluster sum of squares of a labelling (centroids = cluster means).
pub fn wcss(x: &DMatrix<f64>, labels: &ClusterLabels) -> f64 {
    let pts = Points::from_rows(x);
    let k = labels.k();
    let mut sums = vec![0.0; k * pts.d];
    let mut counts = vec![0usize; k];
    for (p, &c) in labels.assignments().iter().enumerate() {
        counts[c] += 1;
        for (s, v) in sums[c * pts.d..(c + 1) * pts.d].iter_mut().zip(pts.row(p)) {
            *s += v;
        }
    }
    labels
        .assignments()
        .iter()
        .enumerate()
        .map(|(p, &c)| {
            let mean: Vec<f64> = sums[c * pts.d..(c + 1) * pts.d]
                .iter()
                .map(|s| s / counts[c] as f64)
                .collect();
            sq_dist(pts.row(p), &mean)
        })
        .sum()
}

/// `(c/n) ln(c n / (r_a r_b))`; entropy terms use `r_a = r_b = c`.
fn info_term(c: usize, ra: usize, rb: usize, n: f64) -> f64 {
    let c = c as f64;
    (c / n) * ((c * n) / (ra as f64 * rb as f64)).ln()
}

/// Sums in ascending order so equal multisets of terms give equal sums.
fn ordered_sum(mut terms: Vec<f64>) -> f64 {
    terms.sort_by(f64::total_cmp);
    terms.into_iter().sum()
}

fn entropy(sizes: &[usize], n: f64) -> f64 {
    ordered_sum(
        sizes
            .iter()
            .filter(|&&c| c > 0)
            .map(|&c| info_term(c, c, c, n))
            .collect(),
    )
}

/// Normalized mutual information with the arithmetic-mean normalizer.
///
/// Exactly symmetric, and exactly 1 for partitions equal up to relabeling.
pub fn nmi(a: &ClusterLabels, b: &ClusterLabels) -> Result<f64> {
    if a.n() != b.n() {
        return Err(Error::LengthMismatch {
            left: a.n(),
            right: b.n(),
        });
    }
    let n = a.n() as f64;
    let mut joint: HashMap<(usize, usize), usize> = HashMap::new();
    for (&x, &y) in a.assignments().iter().zip(b.assignments()) {
        *joint.entry((x, y)).or_default() += 1;
    }
    let sa = a.cluster_sizes();
    let sb = b.cluster_sizes();
    let ha = entropy(&sa, n);
    let hb = entropy(&sb, n);
    if ha == 0.0 && hb == 0.0 {
        // Both partitions are a single cluster, hence identical.
        return Ok(1.0);
    }
    let mi = ordered_sum(
        joint
            .into_iter()
            .map(|((x, y), c)| info_term(c, sa[x], sb[y], n))
            .collect(),
    );
    let norm = 0.5 * (ha + hb);
    Ok((mi / norm).clamp(0.0, 1.0))
}

/// Cluster an embedding's rows and score against ground truth.
pub fn embedding_nmi(x: &DMatrix<f64>, truth: &ClusterLabels, k: usize, config: &KMeansConfig) -> Result<f64> {
    let fit = kmeans(x, k, config)?;
    nmi(&fit.labels, truth)
}

/// Per-trial NMI across an RJD run and how the selected trial compares.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LandscapeStats {
    /// `(objective, nmi)` per trial, in trial order.
    pub points: Vec<(f64, f64)>,
    pub mean_nmi: f64,
    pub std_nmi: f64,
    pub selected_index: usize,
    pub selected_nmi: f64,
    /// `selected_nmi >= mean_nmi`.
    pub above_mean: bool,
}

impl LandscapeStats {
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["objective", "nmi"])?;
        for (o, v) in &self.points {
            out.write_record([o.to_string(), v.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }
}

pub fn landscape_stats(
    trials: &[Trial],
    labels: &ClusterLabels,
    k: usize,
    config: &KMeansConfig,
) -> Result<LandscapeStats> {
    if trials.is_empty() {
        return Err(Error::InvalidConfig("landscape needs at least one trial".into()));
    }
    let nmis: Vec<f64> = trials
        .par_iter()
        .map(|t| embedding_nmi(t.embedding.matrix(), labels, k, config))
        .collect::<Result<_>>()?;
    let count = nmis.len() as f64;
    let mean = nmis.iter().sum::<f64>() / count;
    let var = nmis.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / count;
    let selected = select_best(trials);
    let selected_nmi = nmis[selected];
    Ok(LandscapeStats {
        points: trials.iter().map(|t| t.objective).zip(nmis).collect(),
        mean_nmi: mean,
        std_nmi: var.sqrt(),
        selected_index: selected,
        selected_nmi,
        above_mean: selected_nmi >= mean,
    })
}
