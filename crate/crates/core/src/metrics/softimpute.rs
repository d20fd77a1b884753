//! Low-rank matrix completion by iterated singular value soft-thresholding.
//!
//! The truncated SVD comes from orthogonal iteration on `MᵀM` followed by
//! a Jacobi eigensolve of the small `r × r` Gram matrix.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, ViganError};

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(ViganError::shape("matrix", &[data.len()], &[rows, cols]));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `self · other`.
    fn mul(&self, other: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let orow = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let brow = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `selfᵀ · other`.
    fn tmul(&self, other: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(self.cols, other.cols);
        for k in 0..self.rows {
            let arow = &self.data[k * self.cols..(k + 1) * self.cols];
            let brow = &other.data[k * other.cols..(k + 1) * other.cols];
            for (i, &a) in arow.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let orow = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (o, b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        out
    }
}

/// Truncated singular value decomposition `U · diag(s) · Vᵀ`.
#[derive(Clone, Debug)]
pub struct Svd {
    /// rows × r
    pub u: Matrix,
    pub s: Vec<f64>,
    /// cols × r
    pub v: Matrix,
}

/// Modified Gram-Schmidt on the columns of `q`. Columns that collapse are
/// replaced with fresh random directions.
fn orthonormalize(q: &mut Matrix, rng: &mut ChaCha8Rng) {
    let (n, r) = (q.rows, q.cols);
    for j in 0..r {
        for attempt in 0..4 {
            for k in 0..j {
                let dot: f64 = (0..n).map(|i| q.get(i, j) * q.get(i, k)).sum();
                for i in 0..n {
                    q.data[i * r + j] -= dot * q.data[i * r + k];
                }
            }
            let norm = (0..n).map(|i| q.get(i, j).powi(2)).sum::<f64>().sqrt();
            if norm > 1e-12 || attempt == 3 {
                let norm = norm.max(1e-300);
                for i in 0..n {
                    q.data[i * r + j] /= norm;
                }
                break;
            }
            for i in 0..n {
                q.data[i * r + j] = rng.random_range(-1.0..1.0);
            }
        }
    }
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues and the eigenvector matrix (columns).
fn jacobi_eigen(a: &Matrix) -> (Vec<f64>, Matrix) {
    let n = a.rows;
    let mut a = a.clone();
    let mut v = Matrix::zeros(n, n);
    for i in 0..n {
        v.data[i * n + i] = 1.0;
    }
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a.get(i, j).powi(2))
            .sum();
        let scale: f64 = a.data.iter().map(|x| x * x).sum();
        if off <= 1e-30 * scale.max(1e-300) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let theta = (a.get(q, q) - a.get(p, p)) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a.get(k, p);
                    let akq = a.get(k, q);
                    a.data[k * n + p] = c * akp - s * akq;
                    a.data[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a.get(p, k);
                    let aqk = a.get(q, k);
                    a.data[p * n + k] = c * apk - s * aqk;
                    a.data[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.data[k * n + p] = c * vkp - s * vkq;
                    v.data[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a.get(i, i)).collect(), v)
}

/// Leading `rank` singular triplets by orthogonal iteration.
///
/// `start` (cols × rank) warm-starts the right subspace. Stops once the
/// subspace moves by less than `tol`.
pub fn truncated_svd(
    m: &Matrix,
    rank: usize,
    start: Option<&Matrix>,
    tol: f64,
    rng: &mut ChaCha8Rng,
) -> Svd {
    let mut q = match start {
        Some(s) => s.clone(),
        None => Matrix::new(
            m.cols,
            rank,
            (0..m.cols * rank)
                .map(|_| rng.random_range(-1.0..1.0))
                .collect(),
        )
        .expect("sized"),
    };
    orthonormalize(&mut q, rng);
    for _ in 0..500 {
        let w = m.mul(&q);
        let mut next = m.tmul(&w);
        orthonormalize(&mut next, rng);
        // distance between subspaces: ‖next − q qᵀ next‖
        let proj = q.mul(&q.tmul(&next));
        let moved = next
            .data
            .iter()
            .zip(&proj.data)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        q = next;
        if moved < tol {
            break;
        }
    }
    let w = m.mul(&q);
    let gram = w.tmul(&w);
    let (evals, evecs) = jacobi_eigen(&gram);
    let mut order: Vec<usize> = (0..rank).collect();
    order.sort_by(|&a, &b| evals[b].total_cmp(&evals[a]));
    let mut u = Matrix::zeros(m.rows, rank);
    let mut v = Matrix::zeros(m.cols, rank);
    let mut s = Vec::with_capacity(rank);
    let qe = q.mul(&evecs);
    let we = w.mul(&evecs);
    for (out, &k) in order.iter().enumerate() {
        let sigma = evals[k].max(0.0).sqrt();
        s.push(sigma);
        for i in 0..m.cols {
            v.data[i * rank + out] = qe.get(i, k);
        }
        if sigma > 0.0 {
            for i in 0..m.rows {
                u.data[i * rank + out] = we.get(i, k) / sigma;
            }
        }
    }
    Svd { u, s, v }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SoftImputeConfig {
    pub rank: usize,
    /// Amount subtracted from every singular value.
    pub shrinkage: f64,
    pub max_iters: usize,
    /// Stop when the relative squared change falls below this.
    pub tol: f64,
    pub seed: u64,
}

impl Default for SoftImputeConfig {
    fn default() -> Self {
        SoftImputeConfig {
            rank: 2,
            shrinkage: 1e-3,
            max_iters: 2000,
            tol: 1e-6,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SoftImputeResult {
    pub completed: Matrix,
    pub iterations: usize,
    pub converged: bool,
    /// `½‖P_Ω(X − Z)‖² + λ‖Z‖_*` after each iteration.
    pub objective: Vec<f64>,
}

/// Fills the entries of `x` where `observed` is false.
pub fn soft_impute(
    x: &Matrix,
    observed: &[bool],
    cfg: &SoftImputeConfig,
) -> Result<SoftImputeResult> {
    if observed.len() != x.data.len() {
        return Err(ViganError::shape(
            "soft_impute mask",
            &[observed.len()],
            &[x.data.len()],
        ));
    }
    if cfg.rank == 0 || cfg.rank > x.rows.min(x.cols) {
        return Err(ViganError::invalid(format!(
            "rank {} must be in 1..={}",
            cfg.rank,
            x.rows.min(x.cols)
        )));
    }
    if !(cfg.shrinkage >= 0.0 && cfg.shrinkage.is_finite()) {
        return Err(ViganError::invalid("shrinkage must be finite and >= 0"));
    }
    if observed.iter().all(|&o| o) {
        return Ok(SoftImputeResult {
            completed: x.clone(),
            iterations: 0,
            converged: true,
            objective: Vec::new(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut z = Matrix::zeros(x.rows, x.cols);
    let mut start: Option<Matrix> = None;
    let mut objective = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..cfg.max_iters {
        iterations += 1;
        let mut filled = z.clone();
        for (i, &o) in observed.iter().enumerate() {
            if o {
                filled.data[i] = x.data[i];
            }
        }
        let svd = truncated_svd(&filled, cfg.rank, start.as_ref(), 1e-10, &mut rng);
        let shrunk: Vec<f64> = svd.s.iter().map(|s| (s - cfg.shrinkage).max(0.0)).collect();
        let mut next = Matrix::zeros(x.rows, x.cols);
        for i in 0..x.rows {
            for j in 0..x.cols {
                next.data[i * x.cols + j] = (0..cfg.rank)
                    .map(|k| svd.u.get(i, k) * shrunk[k] * svd.v.get(j, k))
                    .sum();
            }
        }
        let diff: f64 = next
            .data
            .iter()
            .zip(&z.data)
            .map(|(a, b)| (a - b).powi(2))
            .sum();
        let base: f64 = z.data.iter().map(|v| v * v).sum::<f64>().max(1e-300);
        let fit: f64 = observed
            .iter()
            .enumerate()
            .filter(|(_, &o)| o)
            .map(|(i, _)| (x.data[i] - next.data[i]).powi(2))
            .sum();
        objective.push(0.5 * fit + cfg.shrinkage * shrunk.iter().sum::<f64>());
        z = next;
        start = Some(svd.v);
        if diff / base < cfg.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!(
            "soft-impute stopped at the iteration cap ({}) before converging",
            cfg.max_iters
        );
    }
    // observed entries are returned as given
    for (i, &o) in observed.iter().enumerate() {
        if o {
            z.data[i] = x.data[i];
        }
    }
    Ok(SoftImputeResult {
        completed: z,
        iterations,
        converged,
        objective,
    })
}
