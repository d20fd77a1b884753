//! Synthetic two-view datasets with known cross-view mappings.
//!
//! Every example is generated complete; the single-view pools then hide one
//! half, which is kept in the returned [`GroundTruth`] for scoring.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::dataset::{GroundTruth, MultiViewDataset, RowSet, ViewInfo};
use crate::error::{Result, ViganError};

/// Latent severity dimensions for the binary-symptom generator.
const SEVERITY_DIM: usize = 3;
/// Hidden width of the fixed nonlinear map.
const NONLINEAR_HIDDEN: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SyntheticKind {
    /// `y = R·x + ε` with `R` a random orthogonal matrix.
    Rotation,
    /// `y = W₂·tanh(W₁·x + b₁) + ε` for fixed random weights.
    MlpNonlinear,
    /// Two binary views thresholded from a shared latent severity.
    BinarySymptom,
}

impl fmt::Display for SyntheticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SyntheticKind::Rotation => "rotation",
            SyntheticKind::MlpNonlinear => "mlp-nonlinear",
            SyntheticKind::BinarySymptom => "binary-symptom",
        })
    }
}

impl FromStr for SyntheticKind {
    type Err = ViganError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rotation" => Ok(SyntheticKind::Rotation),
            "mlp-nonlinear" => Ok(SyntheticKind::MlpNonlinear),
            "binary-symptom" => Ok(SyntheticKind::BinarySymptom),
            other => Err(ViganError::invalid(format!(
                "unknown dataset kind `{other}` (rotation|mlp-nonlinear|binary-symptom)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub kind: SyntheticKind,
    pub dim_x: usize,
    pub dim_y: usize,
    pub noise: f64,
    pub paired: usize,
    pub x_only: usize,
    pub y_only: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    /// The 8-dimensional rotation benchmark.
    fn default() -> Self {
        SyntheticSpec {
            kind: SyntheticKind::Rotation,
            dim_x: 8,
            dim_y: 8,
            noise: 0.05,
            paired: 2000,
            x_only: 2000,
            y_only: 2000,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dim_x == 0 || self.dim_y == 0 {
            return Err(ViganError::invalid("dataset dimensions must be positive"));
        }
        if self.kind == SyntheticKind::Rotation && self.dim_x != self.dim_y {
            return Err(ViganError::invalid(format!(
                "rotation data needs dim_x == dim_y, got {} and {}",
                self.dim_x, self.dim_y
            )));
        }
        if !(self.noise.is_finite() && self.noise >= 0.0) {
            return Err(ViganError::invalid("noise level must be finite and >= 0"));
        }
        Ok(())
    }

    pub fn total_rows(&self) -> usize {
        self.paired + self.x_only + self.y_only
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticData {
    pub dataset: MultiViewDataset,
    pub ground_truth: GroundTruth,
    /// Row-major `R` for rotation data.
    pub rotation: Option<Vec<f64>>,
}

enum Mapping {
    Rotation(Vec<f64>),
    Nonlinear {
        w1: Vec<f64>,
        b1: Vec<f64>,
        w2: Vec<f64>,
    },
    Symptom {
        x_load: Vec<f64>,
        x_thresh: Vec<f64>,
        y_load: Vec<f64>,
        y_thresh: Vec<f64>,
    },
}

/// Random orthogonal `n×n` matrix via Gram–Schmidt on a Gaussian matrix.
pub fn random_orthogonal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let mut q: Vec<Vec<f64>> = Vec::with_capacity(n);
        let mut degenerate = false;
        for _ in 0..n {
            let mut v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            for _ in 0..2 {
                for u in &q {
                    let d: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
                    v.iter_mut().zip(u).for_each(|(a, b)| *a -= d * b);
                }
            }
            let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            if norm < 1e-8 {
                degenerate = true;
                break;
            }
            v.iter_mut().for_each(|a| *a /= norm);
            q.push(v);
        }
        if !degenerate {
            return q.into_iter().flatten().collect();
        }
    }
}

fn gaussian_vec<R: Rng + ?Sized>(rng: &mut R, n: usize, scale: f64) -> Vec<f64> {
    (0..n)
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

fn unit_rows<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Vec<f64> {
    let mut m = gaussian_vec(rng, rows * cols, 1.0);
    for r in m.chunks_exact_mut(cols) {
        let n = r.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
        r.iter_mut().for_each(|v| *v /= n);
    }
    m
}

fn mat_vec(m: &[f64], v: &[f64], rows: usize) -> Vec<f64> {
    let cols = v.len();
    (0..rows)
        .map(|i| {
            m[i * cols..(i + 1) * cols]
                .iter()
                .zip(v)
                .map(|(a, b)| a * b)
                .sum()
        })
        .collect()
}

impl Mapping {
    fn new<R: Rng + ?Sized>(spec: &SyntheticSpec, rng: &mut R) -> Self {
        match spec.kind {
            SyntheticKind::Rotation => Mapping::Rotation(random_orthogonal(spec.dim_x, rng)),
            SyntheticKind::MlpNonlinear => Mapping::Nonlinear {
                w1: gaussian_vec(
                    rng,
                    NONLINEAR_HIDDEN * spec.dim_x,
                    1.0 / (spec.dim_x as f64).sqrt(),
                ),
                b1: gaussian_vec(rng, NONLINEAR_HIDDEN, 0.1),
                w2: gaussian_vec(
                    rng,
                    spec.dim_y * NONLINEAR_HIDDEN,
                    1.0 / (NONLINEAR_HIDDEN as f64).sqrt(),
                ),
            },
            SyntheticKind::BinarySymptom => Mapping::Symptom {
                x_load: unit_rows(rng, spec.dim_x, SEVERITY_DIM),
                x_thresh: (0..spec.dim_x)
                    .map(|_| rng.random_range(-0.5..0.5))
                    .collect(),
                y_load: unit_rows(rng, spec.dim_y, SEVERITY_DIM),
                y_thresh: (0..spec.dim_y)
                    .map(|_| rng.random_range(-0.5..0.5))
                    .collect(),
            },
        }
    }

    /// One complete `(x, y)` example.
    fn draw<R: Rng + ?Sized>(
        &self,
        spec: &SyntheticSpec,
        noise: &Normal<f64>,
        rng: &mut R,
    ) -> (Vec<f64>, Vec<f64>) {
        fn eps<R: Rng + ?Sized>(noise: &Normal<f64>, rng: &mut R, n: usize) -> Vec<f64> {
            (0..n).map(|_| noise.sample(rng)).collect()
        }
        match self {
            Mapping::Rotation(r) => {
                let x: Vec<f64> = (0..spec.dim_x)
                    .map(|_| rng.sample::<f64, _>(StandardNormal).clamp(-3.0, 3.0))
                    .collect();
                let mut y = mat_vec(r, &x, spec.dim_y);
                y.iter_mut()
                    .zip(eps(noise, rng, spec.dim_y))
                    .for_each(|(v, e)| *v += e);
                (x, y)
            }
            Mapping::Nonlinear { w1, b1, w2 } => {
                let x: Vec<f64> = (0..spec.dim_x)
                    .map(|_| rng.sample::<f64, _>(StandardNormal).clamp(-3.0, 3.0))
                    .collect();
                let h: Vec<f64> = mat_vec(w1, &x, NONLINEAR_HIDDEN)
                    .iter()
                    .zip(b1)
                    .map(|(v, b)| (v + b).tanh())
                    .collect();
                let mut y = mat_vec(w2, &h, spec.dim_y);
                y.iter_mut()
                    .zip(eps(noise, rng, spec.dim_y))
                    .for_each(|(v, e)| *v += e);
                (x, y)
            }
            Mapping::Symptom {
                x_load,
                x_thresh,
                y_load,
                y_thresh,
            } => {
                let severity = gaussian_vec(rng, SEVERITY_DIM, 1.0);
                let mut bits = |load: &[f64], thresh: &[f64], n: usize| -> Vec<f64> {
                    mat_vec(load, &severity, n)
                        .iter()
                        .zip(thresh)
                        .zip(eps(noise, rng, n))
                        .map(|((s, t), e)| if s + e > *t { 1.0 } else { 0.0 })
                        .collect()
                };
                let x = bits(x_load, x_thresh, spec.dim_x);
                let y = bits(y_load, y_thresh, spec.dim_y);
                (x, y)
            }
        }
    }
}

/// Deterministic given `spec.seed`.
pub fn generate(spec: &SyntheticSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mapping = Mapping::new(spec, &mut rng);
    let noise = Normal::new(0.0, spec.noise).map_err(|e| ViganError::invalid(e.to_string()))?;

    let (dx, dy) = (spec.dim_x, spec.dim_y);
    let mut paired_x = RowSet::new(dx);
    let mut paired_y = RowSet::new(dy);
    let mut x_only = RowSet::new(dx);
    let mut y_for_x_only = RowSet::new(dy);
    let mut y_only = RowSet::new(dy);
    let mut x_for_y_only = RowSet::new(dx);

    for _ in 0..spec.paired {
        let (x, y) = mapping.draw(spec, &noise, &mut rng);
        paired_x.push(&x)?;
        paired_y.push(&y)?;
    }
    for _ in 0..spec.x_only {
        let (x, y) = mapping.draw(spec, &noise, &mut rng);
        x_only.push(&x)?;
        y_for_x_only.push(&y)?;
    }
    for _ in 0..spec.y_only {
        let (x, y) = mapping.draw(spec, &noise, &mut rng);
        y_only.push(&y)?;
        x_for_y_only.push(&x)?;
    }

    let binary = spec.kind == SyntheticKind::BinarySymptom;
    let info = |prefix: &str, dim: usize| ViewInfo {
        names: (0..dim).map(|i| format!("{prefix}{i}")).collect(),
        binary: vec![binary; dim],
    };
    let dataset = MultiViewDataset::new(
        paired_x,
        paired_y,
        x_only,
        y_only,
        info("x", dx),
        info("y", dy),
    )?;
    let rotation = match mapping {
        Mapping::Rotation(r) => Some(r),
        _ => None,
    };
    Ok(SyntheticData {
        dataset,
        ground_truth: GroundTruth {
            y_for_x_only,
            x_for_y_only,
        },
        rotation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(kind: SyntheticKind, dx: usize, dy: usize, noise: f64) -> SyntheticSpec {
        SyntheticSpec {
            kind,
            dim_x: dx,
            dim_y: dy,
            noise,
            paired: 30,
            x_only: 20,
            y_only: 10,
            seed: 7,
        }
    }

    #[test]
    fn orthogonal_matrix_is_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 6;
        let r = random_orthogonal(n, &mut rng);
        for i in 0..n {
            for j in 0..n {
                let d: f64 = (0..n).map(|k| r[i * n + k] * r[j * n + k]).sum();
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((d - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn noiseless_rotation_is_exactly_invertible() {
        let data = generate(&spec(SyntheticKind::Rotation, 4, 4, 0.0)).unwrap();
        let r = data.rotation.unwrap();
        let ds = &data.dataset;
        // oracle imputation x = Rᵀ y
        for (x, y) in ds.paired_x.iter().zip(ds.paired_y.iter()) {
            let rx = mat_vec(&r, x, 4);
            assert!(rx.iter().zip(y).all(|(a, b)| (a - b).abs() < 1e-12));
            for (i, xi) in x.iter().enumerate() {
                let back: f64 = (0..4).map(|k| r[k * 4 + i] * y[k]).sum();
                assert!((back - xi).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn counts_and_ground_truth_alignment() {
        let data = generate(&spec(SyntheticKind::MlpNonlinear, 3, 5, 0.1)).unwrap();
        let ds = &data.dataset;
        assert_eq!(
            (ds.n_paired(), ds.x_only.len(), ds.y_only.len()),
            (30, 20, 10)
        );
        assert_eq!(data.ground_truth.y_for_x_only.len(), 20);
        assert_eq!(data.ground_truth.x_for_y_only.len(), 10);
        assert_eq!(ds.dim_y(), 5);
    }

    #[test]
    fn same_seed_identical() {
        let s = spec(SyntheticKind::Rotation, 3, 3, 0.05);
        let a = generate(&s).unwrap();
        let b = generate(&s).unwrap();
        assert_eq!(a.dataset, b.dataset);
        assert_eq!(a.ground_truth, b.ground_truth);
    }

    #[test]
    fn binary_views_are_binary_and_informative() {
        let mut s = spec(SyntheticKind::BinarySymptom, 11, 11, 0.25);
        s.paired = 500;
        let data = generate(&s).unwrap();
        let ds = &data.dataset;
        assert!(ds.x_info.binary.iter().all(|&b| b));
        for v in ds.all_x().as_flat().iter().chain(ds.all_y().as_flat()) {
            assert!(*v == 0.0 || *v == 1.0);
        }
        // symptom counts across views correlate through the shared severity
        let sx: Vec<f64> = ds.paired_x.iter().map(|r| r.iter().sum()).collect();
        let sy: Vec<f64> = ds.paired_y.iter().map(|r| r.iter().sum()).collect();
        let n = sx.len() as f64;
        let (mx, my) = (sx.iter().sum::<f64>() / n, sy.iter().sum::<f64>() / n);
        let cov: f64 = sx
            .iter()
            .zip(&sy)
            .map(|(a, b)| (a - mx) * (b - my))
            .sum::<f64>()
            / n;
        assert!(cov.abs() > 0.1, "cov {cov}");
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(generate(&spec(SyntheticKind::Rotation, 3, 4, 0.0)).is_err());
        assert!(generate(&spec(SyntheticKind::Rotation, 0, 0, 0.0)).is_err());
        assert!(generate(&spec(SyntheticKind::Rotation, 2, 2, -1.0)).is_err());
    }
}
