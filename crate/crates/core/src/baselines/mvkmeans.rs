use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{kmeanspp_indices, sq_dist, ClusterLabels, Points};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MvKMeansConfig {
    pub max_iters: usize,
    pub seed: u64,
    /// Empty-cluster re-seeds tolerated before giving up.
    pub max_reseeds: usize,
}

impl Default for MvKMeansConfig {
    fn default() -> Self {
        Self {
            max_iters: 100,
            seed: 0,
            max_reseeds: 100,
        }
    }
}

#[derive(Clone, Copy)]
enum Geometry {
    Euclidean,
    Spherical,
}

impl Geometry {
    /// Dissimilarity used for assignment; smaller is closer.
    fn cost(self, row: &[f64], centre: &[f64]) -> f64 {
        match self {
            Geometry::Euclidean => sq_dist(row, centre),
            Geometry::Spherical => -row.iter().zip(centre).map(|(a, b)| a * b).sum::<f64>(),
        }
    }
}

fn check_views(views: &[&DMatrix<f64>; 2], k: usize) -> Result<usize> {
    let n = views[0].nrows();
    if views[1].nrows() != n {
        return Err(Error::DimensionMismatch {
            what: "second view rows",
            expected: n,
            found: views[1].nrows(),
        });
    }
    if k == 0 {
        return Err(Error::InvalidConfig("k must be positive".into()));
    }
    if k > n {
        return Err(Error::KExceedsN { k, n });
    }
    if views.iter().any(|v| v.iter().any(|x| !x.is_finite())) {
        return Err(Error::NonFinite("multiview k-means input"));
    }
    Ok(n)
}

fn assign(pts: &Points, centres: &[f64], k: usize, geom: Geometry) -> Vec<usize> {
    let d = pts.d;
    (0..pts.n)
        .map(|p| {
            let row = pts.row(p);
            let mut best = (f64::INFINITY, 0);
            for c in 0..k {
                let cost = geom.cost(row, &centres[c * d..(c + 1) * d]);
                if cost < best.0 {
                    best = (cost, c);
                }
            }
            best.1
        })
        .collect()
}

/// Centroids of `pts` under `partition`; an empty cluster takes a random row.
fn centres_from(
    pts: &Points,
    partition: &[usize],
    k: usize,
    geom: Geometry,
    rng: &mut ChaCha8Rng,
    reseeds: &mut usize,
    max_reseeds: usize,
) -> Result<Vec<f64>> {
    let d = pts.d;
    let mut sums = vec![0.0; k * d];
    let mut counts = vec![0usize; k];
    for (p, &c) in partition.iter().enumerate() {
        counts[c] += 1;
        for (s, v) in sums[c * d..(c + 1) * d].iter_mut().zip(pts.row(p)) {
            *s += v;
        }
    }
    for c in 0..k {
        let centre = &mut sums[c * d..(c + 1) * d];
        if counts[c] == 0 {
            *reseeds += 1;
            if *reseeds > max_reseeds {
                return Err(Error::EmptyClusterRestart(max_reseeds));
            }
            centre.copy_from_slice(pts.row(rng.random_range(0..pts.n)));
            continue;
        }
        match geom {
            Geometry::Euclidean => centre.iter_mut().for_each(|v| *v /= counts[c] as f64),
            Geometry::Spherical => {
                let norm = centre.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm > 0.0 {
                    centre.iter_mut().for_each(|v| *v /= norm);
                }
            }
        }
    }
    Ok(sums)
}

/// Per-point responsibilities over clusters for one view, row-major `n × k`.
fn responsibilities(pts: &Points, centres: &[f64], partition: &[usize], k: usize, geom: Geometry) -> Vec<f64> {
    let d = pts.d;
    // Isotropic Gaussian with one shared variance, or a von Mises–Fisher
    // kernel with unit concentration on the sphere.
    let scale = match geom {
        Geometry::Euclidean => {
            let sse: f64 = (0..pts.n)
                .map(|p| sq_dist(pts.row(p), &centres[partition[p] * d..(partition[p] + 1) * d]))
                .sum();
            let var = sse / (pts.n * d.max(1)) as f64;
            1.0 / (2.0 * var.max(f64::MIN_POSITIVE))
        }
        Geometry::Spherical => 1.0,
    };
    let mut out = vec![0.0; pts.n * k];
    for p in 0..pts.n {
        let logits: Vec<f64> = (0..k)
            .map(|c| -scale * geom.cost(pts.row(p), &centres[c * d..(c + 1) * d]))
            .collect();
        let top = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = logits.iter().map(|l| (l - top).exp()).collect();
        let total: f64 = weights.iter().sum();
        for (c, w) in weights.into_iter().enumerate() {
            out[p * k + c] = w / total;
        }
    }
    out
}

fn co_em(views: [Points; 2], k: usize, config: &MvKMeansConfig, geom: Geometry) -> Result<ClusterLabels> {
    let n = views[0].n;
    if k == 1 {
        return ClusterLabels::new(vec![0; n], 1);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut reseeds = 0;
    let init: Vec<f64> = kmeanspp_indices(&views[1], k, &mut rng)
        .into_iter()
        .flat_map(|s| views[1].row(s).to_vec())
        .collect();
    let mut partitions = [Vec::new(), assign(&views[1], &init, k, geom)];
    let mut centres = [Vec::new(), init];

    for _ in 0..config.max_iters {
        let previous = partitions.clone();
        // Each view's centroids come from the other view's partition.
        for v in 0..2 {
            let c = centres_from(
                &views[v],
                &partitions[1 - v],
                k,
                geom,
                &mut rng,
                &mut reseeds,
                config.max_reseeds,
            )?;
            partitions[v] = assign(&views[v], &c, k, geom);
            centres[v] = c;
        }
        if partitions == previous {
            break;
        }
    }

    let r0 = responsibilities(&views[0], &centres[0], &partitions[0], k, geom);
    let r1 = responsibilities(&views[1], &centres[1], &partitions[1], k, geom);
    let labels = (0..n)
        .map(|p| {
            let mut best = (f64::NEG_INFINITY, 0);
            for c in 0..k {
                let avg = 0.5 * (r0[p * k + c] + r1[p * k + c]);
                if avg > best.0 {
                    best = (avg, c);
                }
            }
            best.1
        })
        .collect();
    ClusterLabels::new(labels, k)
}

/// Two-view co-EM k-means.
///
/// Centroids of each view are recomputed from the other view's current
/// partition, then that view is reassigned to them. Iteration stops at a
/// fixpoint of both partitions or after `max_iters`. Each point's final
/// label maximizes the cross-view average of isotropic Gaussian
/// responsibilities (one shared variance per view).
pub fn mv_kmeans(views: [&DMatrix<f64>; 2], k: usize, config: &MvKMeansConfig) -> Result<ClusterLabels> {
    check_views(&views, k)?;
    co_em(
        [Points::from_rows(views[0]), Points::from_rows(views[1])],
        k,
        config,
        Geometry::Euclidean,
    )
}

/// Two-view co-EM spherical k-means on unit-normalized rows with cosine
/// similarity.
pub fn mv_sph_kmeans(views: [&DMatrix<f64>; 2], k: usize, config: &MvKMeansConfig) -> Result<ClusterLabels> {
    check_views(&views, k)?;
    let mut normalized = Vec::with_capacity(2);
    for (view, x) in views.iter().enumerate() {
        let mut pts = Points::from_rows(x);
        let d = pts.d;
        for row in 0..pts.n {
            let slice = &mut pts.data[row * d..(row + 1) * d];
            let norm = slice.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 {
                return Err(Error::ZeroNormRow { view, row });
            }
            slice.iter_mut().for_each(|v| *v /= norm);
        }
        normalized.push(pts);
    }
    let second = normalized.pop().expect("two views");
    let first = normalized.pop().expect("two views");
    co_em([first, second], k, config, Geometry::Spherical)
}
