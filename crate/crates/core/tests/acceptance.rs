//! Acceptance criteria, one test each. Every test prints a single
//! `[PASS]`/`[FAIL]` line with the measured figures before asserting.
//!
//! Run with `cargo test -p spectral-fusion --test acceptance -- --nocapture`
//! to see the lines.

mod support;

use std::sync::OnceLock;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use spectral_fusion::baselines::{refine_from_weights, JdConfig};
use spectral_fusion::{
    base_objective, embedding_nmi, generate, landscape_stats, nmi, normalized_laplacian, objective_gradient,
    pga_maximize, rjd_base, run_trial, self_tuning_affinity, worst_case_smoothness, AffinityMatrix, ClusterLabels,
    FeatureMatrix, KMeansConfig, LaplacianStack, ObjectiveKind, PgaConfig, RjdConfig, SbmConfig, SimplexWeights,
    SpectrumCheck, SymmetricMatrix,
};
use support::{doubly_stochastic, jacobi_eigen, random_affinity, random_frame, reference_nmi};

fn verdict(id: u32, name: &str, pass: bool, detail: String) {
    let tag = if pass { "PASS" } else { "FAIL" };
    println!("[{tag}] criterion {id} {name}: {detail}");
    assert!(pass, "criterion {id} ({name}) failed: {detail}");
}

fn single_threaded<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .expect("thread pool")
        .install(f)
}

fn stack_from(ws: &[DMatrix<f64>]) -> LaplacianStack {
    LaplacianStack::new(
        ws.iter()
            .map(|w| {
                normalized_laplacian(&AffinityMatrix::new(w.clone()).unwrap())
                    .unwrap()
                    .matrix
            })
            .collect(),
    )
    .unwrap()
}

fn combined(stack: &LaplacianStack, mu: &[f64]) -> DMatrix<f64> {
    let n = stack.n();
    let mut out = DMatrix::zeros(n, n);
    for (l, &w) in stack.matrices().iter().zip(mu) {
        out += l.matrix() * w;
    }
    out
}

#[test]
fn criterion_1_spectral_invariants() {
    let start = Instant::now();
    let mut checked = 0;
    let mut failures = Vec::new();
    for seed in 0..3 {
        let data = generate(&SbmConfig::standard(seed)).unwrap();
        for (i, l) in data.laplacians.iter().enumerate() {
            checked += 1;
            if !SpectrumCheck::of(&l.matrix).unwrap().passes() {
                failures.push(format!("sbm seed {seed} modality {i}"));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for view in 0..2 {
        let z = FeatureMatrix::new(DMatrix::from_fn(120, 5, |_, _| StandardNormal.sample(&mut rng))).unwrap();
        let l = normalized_laplacian(&self_tuning_affinity(&z, 7).unwrap()).unwrap();
        checked += 1;
        if !SpectrumCheck::of(&l.matrix).unwrap().passes() {
            failures.push(format!("feature view {view}"));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        1,
        "spectral invariants",
        failures.is_empty() && secs < 10.0,
        format!("{checked} Laplacians checked, failures {failures:?}, {secs:.2}s (limit 10s)"),
    );
}

#[test]
fn criterion_2_ky_fan() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let n = 6;
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..50 {
        let b: DMatrix<f64> = DMatrix::from_fn(n, n, |_, _| StandardNormal.sample(&mut rng));
        let a = &b * b.transpose();
        let (values, _) = jacobi_eigen(&a);
        for k in 1..=3 {
            let bound: f64 = values[..k].iter().sum();
            for _ in 0..10_000 {
                let x = random_frame(n, k, None, &mut rng);
                let t = (&a * &x).component_mul(&x).sum();
                worst = worst.max(bound - t);
            }
        }
    }
    verdict(
        2,
        "Ky Fan bound",
        worst <= 1e-9,
        format!("largest excess of eigenvalue sum over a random frame's trace: {worst:.3e} (limit 1e-9)"),
    );
}

/// Bottom-`k` eigenvalue sum with the smallest eigenvalue dropped, on any
/// weight vector (not only simplex points).
fn g_reference(stack: &LaplacianStack, mu: &[f64], k: usize) -> f64 {
    let (values, _) = jacobi_eigen(&combined(stack, mu));
    values[1..=k].iter().sum()
}

#[test]
fn criterion_3_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (n, m, k, h) = (8, 3, 2, 1e-6);
    let mut worst: f64 = 0.0;
    let mut points = 0;
    for _ in 0..3 {
        let ws: Vec<_> = (0..m).map(|_| random_affinity(n, &mut rng)).collect();
        let stack = stack_from(&ws);
        let mut here = 0;
        while here < 20 {
            let raw: Vec<f64> = (0..m).map(|_| rng.random::<f64>() + 0.05).collect();
            let total: f64 = raw.iter().sum();
            let mu: Vec<f64> = raw.iter().map(|v| v / total).collect();
            let (values, _) = jacobi_eigen(&combined(&stack, &mu));
            if values[k + 1] - values[k] < 1e-3 {
                continue;
            }
            let analytic = objective_gradient(&stack, &SimplexWeights::new(mu.clone()).unwrap(), k).unwrap();
            assert!(!analytic.gap_warning);
            let numeric: Vec<f64> = (0..m)
                .map(|i| {
                    let mut up = mu.clone();
                    let mut down = mu.clone();
                    up[i] += h;
                    down[i] -= h;
                    (g_reference(&stack, &up, k) - g_reference(&stack, &down, k)) / (2.0 * h)
                })
                .collect();
            let diff = analytic
                .values
                .iter()
                .zip(&numeric)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            let scale = numeric.iter().map(|b| b * b).sum::<f64>().sqrt();
            worst = worst.max(diff / scale);
            here += 1;
            points += 1;
        }
    }
    verdict(
        3,
        "gradient vs central differences",
        worst < 1e-5,
        format!("{points} gap-clear points, worst relative error {worst:.3e} (limit 1e-5)"),
    );
}

/// A connected 10-node pair whose Laplacians share the null vector `1/√n`.
fn shared_null_pair(rng: &mut ChaCha8Rng) -> LaplacianStack {
    let ws: Vec<_> = (0..2)
        .map(|_| {
            let mut w = random_affinity(10, rng);
            // Sparsify a little so the two graphs differ in structure.
            for q in 0..10 {
                for p in (q + 1)..10 {
                    if rng.random::<f64>() < 0.3 {
                        w[(p, q)] = 0.001;
                        w[(q, p)] = 0.001;
                    }
                }
            }
            doubly_stochastic(&w)
        })
        .collect();
    stack_from(&ws)
}

/// Saddle point of `g` on the segment `(t, 1 − t)`: grid search, then
/// bisection on the sign of `g'(t) = tr(XᵀL₁X) − tr(XᵀL₂X)`.
fn saddle(stack: &LaplacianStack, k: usize) -> (f64, DMatrix<f64>, f64) {
    let eval = |t: f64| {
        let (values, vectors) = jacobi_eigen(&combined(stack, &[t, 1.0 - t]));
        let x = vectors.columns(1, k).into_owned();
        let g: f64 = values[1..=k].iter().sum();
        let tr = |i: usize| (stack.get(i).matrix() * &x).component_mul(&x).sum();
        (g, tr(0) - tr(1), x, values)
    };
    let best = (0..=1000)
        .map(|i| i as f64 / 1000.0)
        .max_by(|&a, &b| eval(a).0.total_cmp(&eval(b).0))
        .unwrap();
    let mut lo = (best - 1e-3).max(0.0);
    let mut hi = (best + 1e-3).min(1.0);
    let t = if eval(lo).1 <= 0.0 {
        lo
    } else if eval(hi).1 >= 0.0 {
        hi
    } else {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if eval(mid).1 > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let (g, _, x, values) = eval(t);
    (t, x, if values[k + 1] - values[k] > 1e-6 { g } else { f64::NAN })
}

#[test]
fn criterion_4_saddle_point_and_weak_duality() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let k = 2;
    let mut stacks = Vec::new();
    let mut worst_gap: f64 = 0.0;
    while stacks.len() < 5 {
        let stack = shared_null_pair(&mut rng);
        let (t, x, g) = saddle(&stack, k);
        if g.is_nan() {
            continue;
        }
        let mu = SimplexWeights::new(vec![t, 1.0 - t]).unwrap();
        let lib_g = base_objective(&stack, &mu, k).unwrap();
        assert!((lib_g - g).abs() < 1e-9, "library objective {lib_g} vs reference {g}");
        let s = worst_case_smoothness(&stack, &x, f64::INFINITY).unwrap();
        worst_gap = worst_gap.max((s - g).abs());
        stacks.push(stack);
    }

    let n = 10;
    let null: Vec<f64> = vec![1.0 / (n as f64).sqrt(); n];
    let mut worst_violation = f64::NEG_INFINITY;
    for i in 0..1000 {
        let stack = &stacks[i % stacks.len()];
        let t = rng.random::<f64>();
        let g = g_reference(stack, &[t, 1.0 - t], k);
        let x = random_frame(n, k, Some(&null), &mut rng);
        let s = worst_case_smoothness(stack, &x, f64::INFINITY).unwrap();
        worst_violation = worst_violation.max(g - s);
    }
    verdict(
        4,
        "saddle point and weak duality",
        worst_gap < 1e-6 && worst_violation <= 1e-9,
        format!(
            "max |s_G(X*) - g(mu*)| = {worst_gap:.3e} (limit 1e-6); max g(mu) - s_G(X) over 1000 pairs = {worst_violation:.3e} (limit 1e-9)"
        ),
    );
}

#[test]
fn criterion_5_commuting_family_exactness() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 8;
    let mut worst: f64 = 0.0;
    for family in 0..5 {
        let null = vec![1.0 / (n as f64).sqrt(); n];
        let rest = random_frame(n, n - 1, Some(&null), &mut rng);
        let mut u = DMatrix::zeros(n, n);
        u.column_mut(0).copy_from_slice(&null);
        u.columns_mut(1, n - 1).copy_from(&rest);
        let mats: Vec<SymmetricMatrix> = (0..3)
            .map(|_| {
                let mut d = vec![0.0];
                d.extend((1..n).map(|_| 0.1 + 1.8 * rng.random::<f64>()));
                let lam = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(d));
                SymmetricMatrix::new(&u * lam * u.transpose()).unwrap()
            })
            .collect();
        let stack = LaplacianStack::new(mats).unwrap();
        let out = rjd_base(&stack, &RjdConfig::new(20, 3, family)).unwrap();
        for trial in &out.trials {
            let x = trial.embedding.matrix();
            for l in stack.matrices() {
                for c in 0..x.ncols() {
                    let v = x.column(c);
                    let lv = l.matrix() * v;
                    let rq = v.dot(&lv);
                    worst = worst.max((lv - v * rq).norm());
                }
            }
        }
    }
    verdict(
        5,
        "commuting-family exactness",
        worst < 1e-8,
        format!("worst per-modality eigen-residual of embedding columns {worst:.3e} (limit 1e-8)"),
    );
}

struct SeedRun {
    seed: u64,
    data: spectral_fusion::MultimodalDataset,
    mean_nmi: f64,
    std_nmi: f64,
    selected_nmi: f64,
    selected_mu: SimplexWeights,
    method_secs: f64,
}

const SBM_SEEDS: u64 = 20;
const SBM_TRIALS: usize = 200;
const SBM_K: usize = 6;

/// RJD-BASE runs on the standard SBM preset shared by criteria 6 and 7.
fn sbm_runs() -> &'static [SeedRun] {
    static RUNS: OnceLock<Vec<SeedRun>> = OnceLock::new();
    RUNS.get_or_init(|| {
        (0..SBM_SEEDS)
            .map(|seed| {
                let start = Instant::now();
                let data = generate(&SbmConfig::standard(seed)).unwrap();
                let out =
                    single_threaded(|| rjd_base(&data.stack, &RjdConfig::new(SBM_TRIALS, SBM_K, seed))).unwrap();
                let method_secs = start.elapsed().as_secs_f64();
                let stats = landscape_stats(&out.trials, &data.labels, SBM_K, &KMeansConfig::default()).unwrap();
                SeedRun {
                    seed,
                    mean_nmi: stats.mean_nmi,
                    std_nmi: stats.std_nmi,
                    selected_nmi: stats.selected_nmi,
                    selected_mu: out.selected().mu.clone(),
                    data,
                    method_secs,
                }
            })
            .collect()
    })
}

#[test]
fn criterion_6_sbm_reproduction() {
    let runs = sbm_runs();
    for r in runs {
        println!(
            "  seed {:>2}: mean trial NMI {:.3} (std {:.3}), selected {:.3}, {:.1}s",
            r.seed, r.mean_nmi, r.std_nmi, r.selected_nmi, r.method_secs
        );
    }
    let in_band = runs.iter().filter(|r| (0.65..=0.77).contains(&r.mean_nmi)).count();
    let above = runs.iter().filter(|r| r.selected_nmi >= r.mean_nmi).count();
    let slowest = runs.iter().map(|r| r.method_secs).fold(0.0, f64::max);
    verdict(
        6,
        "SBM reproduction",
        in_band >= 16 && above >= 12 && slowest <= 60.0,
        format!(
            "(a) mean NMI in [0.65, 0.77] for {in_band}/20 seeds (need 16); (b) selected >= mean for {above}/20 (need 12); slowest seed {slowest:.1}s (limit 60s)"
        ),
    );
}

#[test]
fn criterion_7_refinement_does_not_improve() {
    let runs = &sbm_runs()[..10];
    let cfg = JdConfig {
        max_sweeps: 30,
        tol: 1e-9,
        ..JdConfig::default()
    };
    let mut deltas: Vec<f64> = runs
        .iter()
        .map(|r| {
            let curve = refine_from_weights(
                &r.data.stack,
                &r.selected_mu,
                SBM_K,
                &cfg,
                Some(&r.data.labels),
                &KMeansConfig::default(),
            )
            .unwrap();
            let refined = curve.final_nmi().expect("labels supplied");
            println!(
                "  seed {:>2}: RJD-BASE {:.3} -> refined {:.3} after {} sweeps",
                r.seed, r.selected_nmi, refined, curve.result.sweeps
            );
            refined - r.selected_nmi
        })
        .collect();
    deltas.sort_by(f64::total_cmp);
    let median = 0.5 * (deltas[4] + deltas[5]);
    verdict(
        7,
        "refinement non-improvement",
        median <= 0.02,
        format!("median NMI change after joint diagonalization {median:+.3} (limit +0.02)"),
    );
}

#[test]
fn criterion_8_base_vs_single_directional() {
    let eval = KMeansConfig::default();
    let mut wins = 0;
    for seed in 0..SBM_SEEDS {
        let data = generate(&SbmConfig::standard(seed)).unwrap();
        let final_nmi = |kind| {
            let mut cfg = PgaConfig::new(kind, SBM_K);
            cfg.record_trace = false;
            let out = pga_maximize(&data.stack, &cfg, None).unwrap();
            let trial = run_trial(&data.stack, SBM_K, out.mu_star).unwrap();
            embedding_nmi(trial.embedding.matrix(), &data.labels, SBM_K, &eval).unwrap()
        };
        let base = final_nmi(ObjectiveKind::Base);
        let single = final_nmi(ObjectiveKind::SingleDirectional);
        println!("  seed {seed:>2}: BASE {base:.3}, single-directional {single:.3}");
        if base >= single - 0.03 {
            wins += 1;
        }
    }
    verdict(
        8,
        "direct optimization parity",
        wins >= 12,
        format!("BASE final NMI >= single-directional - 0.03 in {wins}/20 seeds (need 12)"),
    );
}

#[test]
fn criterion_9_nmi_battery() {
    let labels = |v: Vec<usize>| ClusterLabels::from_assignments(v).unwrap();
    let a = labels(vec![0, 0, 1, 1, 2, 2, 2]);
    let identical = nmi(&a, &a).unwrap();
    let permuted = nmi(&a, &labels(vec![2, 2, 0, 0, 1, 1, 1])).unwrap();
    let independent = nmi(&labels(vec![0, 0, 1, 1]), &labels(vec![0, 1, 0, 1])).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut asymmetric = 0;
    let mut worst_ref: f64 = 0.0;
    for _ in 0..500 {
        let n = rng.random_range(2..60);
        let x: Vec<usize> = (0..n).map(|_| rng.random_range(0..4)).collect();
        let mut y: Vec<usize> = (0..n).map(|_| rng.random_range(0..5)).collect();
        y.shuffle(&mut rng);
        let (lx, ly) = (
            ClusterLabels::new(x.clone(), 4).unwrap(),
            ClusterLabels::new(y.clone(), 5).unwrap(),
        );
        let (xy, yx) = (nmi(&lx, &ly).unwrap(), nmi(&ly, &lx).unwrap());
        if xy.to_bits() != yx.to_bits() {
            asymmetric += 1;
        }
        worst_ref = worst_ref.max((xy - reference_nmi(&x, &y)).abs());
    }
    verdict(
        9,
        "NMI battery",
        identical == 1.0 && permuted == 1.0 && independent.abs() < 1e-15 && asymmetric == 0 && worst_ref < 1e-12,
        format!(
            "identical {identical}, permuted {permuted}, independent {independent:.1e}, asymmetric pairs {asymmetric}/500, max deviation from contingency-table reference {worst_ref:.1e}"
        ),
    );
}
