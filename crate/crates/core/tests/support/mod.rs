//! Reference computations that share no code with the library.

#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Classical cyclic Jacobi eigensolver for small symmetric matrices.
/// Returns ascending eigenvalues and matching eigenvector columns.
pub fn jacobi_eigen(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let mut m = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    for _ in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|p| (0..n).map(move |q| (p, q)))
            .filter(|(p, q)| p != q)
            .map(|(p, q)| m[(p, q)] * m[(p, q)])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let tau = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let t = if tau == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for r in 0..n {
                    let (mrp, mrq) = (m[(r, p)], m[(r, q)]);
                    m[(r, p)] = c * mrp - s * mrq;
                    m[(r, q)] = s * mrp + c * mrq;
                }
                for r in 0..n {
                    let (mpr, mqr) = (m[(p, r)], m[(q, r)]);
                    m[(p, r)] = c * mpr - s * mqr;
                    m[(q, r)] = s * mpr + c * mqr;
                }
                for r in 0..n {
                    let (vrp, vrq) = (v[(r, p)], v[(r, q)]);
                    v[(r, p)] = c * vrp - s * vrq;
                    v[(r, q)] = s * vrp + c * vrq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].total_cmp(&m[(j, j)]));
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    (values, vectors)
}

/// `I − D^{-1/2} W D^{-1/2}` written out entry by entry.
pub fn normalized_laplacian(w: &DMatrix<f64>) -> DMatrix<f64> {
    let n = w.nrows();
    let d: Vec<f64> = (0..n).map(|p| w.row(p).sum()).collect();
    DMatrix::from_fn(n, n, |p, q| {
        let delta = if p == q { 1.0 } else { 0.0 };
        delta - w[(p, q)] / (d[p] * d[q]).sqrt()
    })
}

/// Dense random nonnegative affinity with zero diagonal.
pub fn random_affinity(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let mut w = DMatrix::from_fn(n, n, |_, _| rng.random::<f64>() + 0.01);
    w = (&w + w.transpose()) * 0.5;
    w.fill_diagonal(0.0);
    w
}

/// Haar-ish orthonormal `n × k` frame by Gram–Schmidt on Gaussian columns,
/// optionally orthogonal to a given unit vector.
pub fn random_frame(n: usize, k: usize, avoid: Option<&[f64]>, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let mut cols: Vec<Vec<f64>> = avoid.map(|u| vec![u.to_vec()]).unwrap_or_default();
    let skip = cols.len();
    while cols.len() < k + skip {
        let mut c: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        for _ in 0..2 {
            for b in &cols {
                let dot: f64 = c.iter().zip(b).map(|(x, y)| x * y).sum();
                c.iter_mut().zip(b).for_each(|(x, y)| *x -= dot * y);
            }
        }
        let norm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            cols.push(c.into_iter().map(|x| x / norm).collect());
        }
    }
    DMatrix::from_fn(n, k, |r, c| cols[c + skip][r])
}

/// Symmetric Sinkhorn scaling: returns `diag(x) W diag(x)` with unit row sums.
pub fn doubly_stochastic(w: &DMatrix<f64>) -> DMatrix<f64> {
    let n = w.nrows();
    let mut x = vec![1.0; n];
    for _ in 0..10_000 {
        let wx: Vec<f64> = (0..n).map(|p| (0..n).map(|q| w[(p, q)] * x[q]).sum()).collect();
        let next: Vec<f64> = x.iter().zip(&wx).map(|(xi, s)| (xi / s).sqrt()).collect();
        let change = next.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        x = next;
        if change < 1e-15 {
            break;
        }
    }
    let mut out = DMatrix::from_fn(n, n, |p, q| x[p] * w[(p, q)] * x[q]);
    // Absorb the residual row-sum error symmetrically.
    out = (&out + out.transpose()) * 0.5;
    out
}

/// NMI with the arithmetic-mean normalizer, from the contingency table.
pub fn reference_nmi(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len() as f64;
    let ka = a.iter().max().map_or(0, |m| m + 1);
    let kb = b.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![vec![0.0; kb]; ka];
    for (&x, &y) in a.iter().zip(b) {
        table[x][y] += 1.0;
    }
    let ra: Vec<f64> = table.iter().map(|r| r.iter().sum()).collect();
    let rb: Vec<f64> = (0..kb).map(|j| table.iter().map(|r| r[j]).sum()).collect();
    let h = |counts: &[f64]| -> f64 {
        counts
            .iter()
            .filter(|&&c| c > 0.0)
            .map(|&c| -(c / n) * (c / n).ln())
            .sum()
    };
    let (ha, hb) = (h(&ra), h(&rb));
    let mut mi = 0.0;
    for i in 0..ka {
        for j in 0..kb {
            let c = table[i][j];
            if c > 0.0 {
                mi += (c / n) * ((c * n) / (ra[i] * rb[j])).ln();
            }
        }
    }
    if ha == 0.0 && hb == 0.0 {
        return 1.0;
    }
    (mi / ((ha + hb) / 2.0)).clamp(0.0, 1.0)
}
