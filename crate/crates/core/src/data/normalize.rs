use serde::{Deserialize, Serialize};

use super::dataset::RowSet;
use crate::error::{Result, ViganError};

/// Per-feature min–max scaling to `[0, 1]`. Constant features get span 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl FeatureScaler {
    pub fn fit(rows: &RowSet) -> Result<Self> {
        if rows.is_empty() {
            return Err(ViganError::Empty("view for normalization statistics"));
        }
        let mut min = vec![f64::INFINITY; rows.width()];
        let mut max = vec![f64::NEG_INFINITY; rows.width()];
        for row in rows.iter() {
            for (j, &v) in row.iter().enumerate() {
                min[j] = min[j].min(v);
                max[j] = max[j].max(v);
            }
        }
        let scaler = FeatureScaler { min, max };
        scaler.check()?;
        Ok(scaler)
    }

    pub fn identity(dim: usize) -> Self {
        FeatureScaler {
            min: vec![0.0; dim],
            max: vec![1.0; dim],
        }
    }

    pub fn check(&self) -> Result<()> {
        if self.min.len() != self.max.len() {
            return Err(ViganError::data("scaler min/max lengths differ"));
        }
        if self.min.iter().chain(&self.max).any(|v| !v.is_finite()) {
            return Err(ViganError::data("normalization statistics must be finite"));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    pub fn span(&self, j: usize) -> f64 {
        let s = self.max[j] - self.min[j];
        if s > 0.0 {
            s
        } else {
            1.0
        }
    }

    pub fn normalize(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(j, &v)| (v - self.min[j]) / self.span(j))
            .collect()
    }

    pub fn denormalize(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(j, &v)| v * self.span(j) + self.min[j])
            .collect()
    }

    pub fn transform(&self, rows: &RowSet) -> RowSet {
        rows.map_rows(|r| self.normalize(r))
    }

    pub fn inverse(&self, rows: &RowSet) -> RowSet {
        rows.map_rows(|r| self.denormalize(r))
    }
}

/// Scalers for both views.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub x: FeatureScaler,
    pub y: FeatureScaler,
}
