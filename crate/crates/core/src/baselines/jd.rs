use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{embedding_nmi, ClusterLabels, KMeansConfig};
use crate::linalg::{orthonormality_defect, LaplacianStack, SimplexWeights};
use crate::rjd::{combined_eigenbasis, Embedding};
use crate::tolerances;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JdConfig {
    pub max_sweeps: usize,
    /// Stop once a sweep lowers the off-diagonal mass by less than this.
    pub tol: f64,
    /// Rotations with `|sin θ|` below this are skipped.
    pub rotation_threshold: f64,
}

impl Default for JdConfig {
    fn default() -> Self {
        Self {
            max_sweeps: 50,
            tol: 1e-12,
            rotation_threshold: 1e-12,
        }
    }
}

#[derive(Debug, Clone)]
pub struct JdResult {
    /// Orthogonal `Q`; columns are the joint eigenvector estimates.
    pub basis: DMatrix<f64>,
    /// Total squared off-diagonal mass before the first sweep and after each
    /// completed one.
    pub offdiag_history: Vec<f64>,
    pub sweeps: usize,
    /// Average Rayleigh quotient of each column of `basis` over the stack.
    pub scores: Vec<f64>,
}

/// Working copies of `Q^T L_i Q`, column-major and kept exactly symmetric.
struct Transformed {
    n: usize,
    mats: Vec<Vec<f64>>,
    basis: Vec<f64>,
}

impl Transformed {
    fn new(stack: &LaplacianStack, q: &DMatrix<f64>) -> Self {
        let qt = q.transpose();
        let mats = stack
            .matrices()
            .iter()
            .map(|l| {
                let mut a = &qt * l.matrix() * q;
                a = (&a + a.transpose()) * 0.5;
                a.as_slice().to_vec()
            })
            .collect();
        Self {
            n: q.nrows(),
            mats,
            basis: q.as_slice().to_vec(),
        }
    }

    fn offdiag_mass(&self) -> f64 {
        let n = self.n;
        self.mats
            .iter()
            .map(|a| {
                let mut s = 0.0;
                for q in 0..n {
                    for p in 0..n {
                        if p != q {
                            s += a[p + q * n] * a[p + q * n];
                        }
                    }
                }
                s
            })
            .sum()
    }

    fn scores(&self) -> Vec<f64> {
        let n = self.n;
        let m = self.mats.len() as f64;
        (0..n)
            .map(|j| self.mats.iter().map(|a| a[j + j * n]).sum::<f64>() / m)
            .collect()
    }

    fn basis(&self) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.n, self.n, &self.basis)
    }

    /// Closed-form joint rotation for plane `(p, q)`: `(cos θ, sin θ)`.
    fn angle(&self, p: usize, q: usize) -> (f64, f64) {
        let n = self.n;
        let (mut g11, mut g12, mut g22) = (0.0, 0.0, 0.0);
        for a in &self.mats {
            let h1 = a[p + p * n] - a[q + q * n];
            let h2 = a[p + q * n] + a[q + p * n];
            g11 += h1 * h1;
            g12 += h1 * h2;
            g22 += h2 * h2;
        }
        let ton = g11 - g22;
        let toff = 2.0 * g12;
        let theta = 0.5 * toff.atan2(ton + ton.hypot(toff));
        (theta.cos(), theta.sin())
    }

    /// `A ← GᵀAG` for every matrix and `V ← VG` with `G = [[c, −s], [s, c]]`
    /// acting on plane `(p, q)`.
    fn rotate(&mut self, p: usize, q: usize, c: f64, s: f64) {
        let n = self.n;
        for a in &mut self.mats {
            let (app, aqq, apq) = (a[p + p * n], a[q + q * n], a[p + q * n]);
            for r in 0..n {
                if r == p || r == q {
                    continue;
                }
                let arp = a[r + p * n];
                let arq = a[r + q * n];
                let new_p = c * arp + s * arq;
                let new_q = -s * arp + c * arq;
                a[r + p * n] = new_p;
                a[p + r * n] = new_p;
                a[r + q * n] = new_q;
                a[q + r * n] = new_q;
            }
            let cs = c * s;
            a[p + p * n] = c * c * app + 2.0 * cs * apq + s * s * aqq;
            a[q + q * n] = s * s * app - 2.0 * cs * apq + c * c * aqq;
            let off = (c * c - s * s) * apq + cs * (aqq - app);
            a[p + q * n] = off;
            a[q + p * n] = off;
        }
        let (vp, vq) = (p * n, q * n);
        for r in 0..n {
            let x = self.basis[vp + r];
            let y = self.basis[vq + r];
            self.basis[vp + r] = c * x + s * y;
            self.basis[vq + r] = -s * x + c * y;
        }
    }
}

/// Cyclic Jacobi joint diagonalization of every matrix in the stack.
pub fn jacobi_jd(stack: &LaplacianStack, config: &JdConfig, init: Option<&DMatrix<f64>>) -> Result<JdResult> {
    jacobi_jd_observed(stack, config, init, |_, _| {})
}

/// As [`jacobi_jd`], calling `observer(sweep, &partial)` after every
/// completed sweep.
pub fn jacobi_jd_observed<F>(
    stack: &LaplacianStack,
    config: &JdConfig,
    init: Option<&DMatrix<f64>>,
    mut observer: F,
) -> Result<JdResult>
where
    F: FnMut(usize, &JdResult),
{
    let n = stack.n();
    if !(config.tol >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "tolerance must be nonnegative, got {}",
            config.tol
        )));
    }
    let q0 = match init {
        Some(q) => {
            if q.shape() != (n, n) {
                return Err(Error::DimensionMismatch {
                    what: "initial basis order",
                    expected: n,
                    found: q.nrows().max(q.ncols()),
                });
            }
            let defect = orthonormality_defect(q);
            if !(defect <= tolerances::INIT_ORTHOGONALITY) {
                return Err(Error::NonOrthogonalInit(defect));
            }
            q.clone()
        }
        None => DMatrix::identity(n, n),
    };

    let mut work = Transformed::new(stack, &q0);
    let mut history = vec![work.offdiag_mass()];
    let mut sweeps = 0;
    while sweeps < config.max_sweeps {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let (c, s) = work.angle(p, q);
                if s.abs() > config.rotation_threshold {
                    work.rotate(p, q, c, s);
                    rotated = true;
                }
            }
        }
        sweeps += 1;
        let mass = work.offdiag_mass();
        let previous = *history.last().expect("history starts non-empty");
        history.push(mass);
        let partial = JdResult {
            basis: work.basis(),
            offdiag_history: history.clone(),
            sweeps,
            scores: work.scores(),
        };
        observer(sweeps, &partial);
        if !rotated || previous - mass < config.tol {
            break;
        }
    }
    Ok(JdResult {
        basis: work.basis(),
        offdiag_history: history,
        sweeps,
        scores: work.scores(),
    })
}

fn check_k(k: usize, n: usize) -> Result<()> {
    if k == 0 || k >= n {
        return Err(Error::InvalidConfig(format!(
            "embedding dimension {k} must lie in 1..={}",
            n.saturating_sub(1)
        )));
    }
    Ok(())
}

fn order_by_scores(q: &DMatrix<f64>, scores: &[f64], k: usize) -> Result<Embedding> {
    check_k(k, q.ncols())?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut out = DMatrix::zeros(q.nrows(), k);
    for (dst, &src) in order[1..=k].iter().enumerate() {
        out.set_column(dst, &q.column(src));
    }
    Ok(Embedding::from_orthonormal(out))
}

/// Orders the columns of `q` by their average Rayleigh quotient over the
/// stack, drops the lowest and returns the next `k`.
pub fn order_modes(q: &DMatrix<f64>, stack: &LaplacianStack, k: usize) -> Result<Embedding> {
    if q.nrows() != stack.n() {
        return Err(Error::DimensionMismatch {
            what: "basis rows",
            expected: stack.n(),
            found: q.nrows(),
        });
    }
    let m = stack.m() as f64;
    let mut scores = vec![0.0; q.ncols()];
    for l in stack.matrices() {
        let lq = l.matrix() * q;
        for (j, s) in scores.iter_mut().enumerate() {
            *s += lq.column(j).dot(&q.column(j)) / m;
        }
    }
    order_by_scores(q, &scores, k)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefinementRecord {
    pub iteration: usize,
    /// Present when ground truth was supplied.
    pub nmi: Option<f64>,
    pub offdiag_mass: f64,
}

#[derive(Debug, Clone)]
pub struct RefinementCurve {
    /// Iteration 0 is the initial basis.
    pub records: Vec<RefinementRecord>,
    pub result: JdResult,
}

impl RefinementCurve {
    pub fn initial_nmi(&self) -> Option<f64> {
        self.records[0].nmi
    }

    pub fn final_nmi(&self) -> Option<f64> {
        self.records.last().expect("records start non-empty").nmi
    }

    /// CSV with `iteration, nmi, offdiag_mass`; `nmi` is blank without truth.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["iteration", "nmi", "offdiag_mass"])?;
        for r in &self.records {
            out.write_record([
                r.iteration.to_string(),
                r.nmi.map(|v| v.to_string()).unwrap_or_default(),
                r.offdiag_mass.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Jacobi refinement from the orthogonal basis `init`, recording the
/// off-diagonal mass and (given `truth`) the NMI of the ordered bottom-`k`
/// embedding after every sweep.
pub fn refine(
    stack: &LaplacianStack,
    init: &DMatrix<f64>,
    k: usize,
    config: &JdConfig,
    truth: Option<&ClusterLabels>,
    eval: &KMeansConfig,
) -> Result<RefinementCurve> {
    check_k(k, stack.n())?;
    let score = |e: &Embedding| truth.map(|t| embedding_nmi(e.matrix(), t, k, eval)).transpose();
    let start = Transformed::new(stack, init);
    let mut records = vec![RefinementRecord {
        iteration: 0,
        nmi: score(&order_by_scores(init, &start.scores(), k)?)?,
        offdiag_mass: start.offdiag_mass(),
    }];
    let mut failure = None;
    let result = jacobi_jd_observed(stack, config, Some(init), |sweep, partial| {
        if failure.is_some() {
            return;
        }
        match order_by_scores(&partial.basis, &partial.scores, k).and_then(|e| score(&e)) {
            Ok(nmi) => records.push(RefinementRecord {
                iteration: sweep,
                nmi,
                offdiag_mass: *partial.offdiag_history.last().expect("non-empty"),
            }),
            Err(e) => failure = Some(e),
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(RefinementCurve { records, result })
}

/// [`refine`] started from the full eigenbasis of `Σ μ_i L_i`.
pub fn refine_from_weights(
    stack: &LaplacianStack,
    mu: &SimplexWeights,
    k: usize,
    config: &JdConfig,
    truth: Option<&ClusterLabels>,
    eval: &KMeansConfig,
) -> Result<RefinementCurve> {
    check_k(k, stack.n())?;
    refine(stack, &combined_eigenbasis(stack, mu)?, k, config, truth, eval)
}
