use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::normalize::{FeatureScaler, NormStats};
use crate::autodiff::Tensor;
use crate::error::{Result, ViganError};

/// Row-major block of equal-width vectors. May hold zero rows.
#[derive(Clone, Debug, PartialEq)]
pub struct RowSet {
    width: usize,
    data: Vec<f64>,
}

impl RowSet {
    pub fn new(width: usize) -> Self {
        RowSet {
            width,
            data: Vec::new(),
        }
    }

    pub fn from_flat(width: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || !data.len().is_multiple_of(width) {
            return Err(ViganError::invalid(format!(
                "{} values do not form rows of width {width}",
                data.len()
            )));
        }
        Ok(RowSet { width, data })
    }

    pub fn from_rows(width: usize, rows: &[Vec<f64>]) -> Result<Self> {
        let mut set = RowSet::new(width);
        for r in rows {
            set.push(r)?;
        }
        Ok(set)
    }

    pub fn from_tensor(t: &Tensor) -> Result<Self> {
        RowSet::from_flat(t.cols(), t.data().to_vec())
    }

    pub fn push(&mut self, row: &[f64]) -> Result<()> {
        if row.len() != self.width {
            return Err(ViganError::data(format!(
                "row of width {} in a view of width {}",
                row.len(),
                self.width
            )));
        }
        self.data.extend_from_slice(row);
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.data.len().checked_div(self.width).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.width..(i + 1) * self.width]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.width.max(1))
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn to_tensor(&self) -> Result<Tensor> {
        if self.is_empty() {
            return Err(ViganError::Empty("batch"));
        }
        Tensor::matrix(self.len(), self.width, self.data.clone())
    }

    pub fn select(&self, indices: &[usize]) -> RowSet {
        let mut data = Vec::with_capacity(indices.len() * self.width);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        RowSet {
            width: self.width,
            data,
        }
    }

    /// Rows of `self` followed by rows of `other`.
    pub fn append(&self, other: &RowSet) -> Result<RowSet> {
        if self.width != other.width {
            return Err(ViganError::shape("append", &[self.width], &[other.width]));
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(RowSet {
            width: self.width,
            data,
        })
    }

    pub fn map_rows(&self, f: impl Fn(&[f64]) -> Vec<f64>) -> RowSet {
        let data = self.iter().flat_map(f).collect();
        RowSet {
            width: self.width,
            data,
        }
    }
}

/// Which view is imputed from which.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    /// Observe `x`, impute `y` (V1 → V2).
    #[serde(rename = "x2y")]
    XToY,
    /// Observe `y`, impute `x` (V2 → V1).
    #[serde(rename = "y2x")]
    YToX,
}

impl Direction {
    pub const BOTH: [Direction; 2] = [Direction::XToY, Direction::YToX];

    /// Label used in evaluation reports.
    pub fn label(self) -> &'static str {
        match self {
            Direction::XToY => "V1->V2",
            Direction::YToX => "V2->V1",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::XToY => "x2y",
            Direction::YToX => "y2x",
        })
    }
}

impl FromStr for Direction {
    type Err = ViganError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "x2y" | "xy" | "V1->V2" => Ok(Direction::XToY),
            "y2x" | "yx" | "V2->V1" => Ok(Direction::YToX),
            other => Err(ViganError::invalid(format!(
                "unknown direction `{other}` (x2y|y2x)"
            ))),
        }
    }
}

/// Per-view metadata shared by both pools of one view.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViewInfo {
    pub names: Vec<String>,
    pub binary: Vec<bool>,
}

impl ViewInfo {
    pub fn numeric(prefix: &str, dim: usize) -> Self {
        ViewInfo {
            names: (0..dim).map(|i| format!("{prefix}{i}")).collect(),
            binary: vec![false; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }
}

/// Two-view training data: complete pairs, x-only and y-only examples.
///
/// Holds only what training may see; ground truth for the missing halves
/// lives in [`GroundTruth`].
#[derive(Clone, Debug, PartialEq)]
pub struct MultiViewDataset {
    pub paired_x: RowSet,
    pub paired_y: RowSet,
    pub x_only: RowSet,
    pub y_only: RowSet,
    pub x_info: ViewInfo,
    pub y_info: ViewInfo,
}

impl MultiViewDataset {
    pub fn new(
        paired_x: RowSet,
        paired_y: RowSet,
        x_only: RowSet,
        y_only: RowSet,
        x_info: ViewInfo,
        y_info: ViewInfo,
    ) -> Result<Self> {
        let ds = MultiViewDataset {
            paired_x,
            paired_y,
            x_only,
            y_only,
            x_info,
            y_info,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        let (dx, dy) = (self.dim_x(), self.dim_y());
        if dx == 0 || dy == 0 {
            return Err(ViganError::data("views must have at least one feature"));
        }
        if self.paired_x.width() != dx || self.x_only.width() != dx {
            return Err(ViganError::data("x vectors must all have width dim_x"));
        }
        if self.paired_y.width() != dy || self.y_only.width() != dy {
            return Err(ViganError::data("y vectors must all have width dim_y"));
        }
        if self.x_info.binary.len() != dx || self.y_info.binary.len() != dy {
            return Err(ViganError::data("binary flags must cover every feature"));
        }
        if self.paired_x.len() != self.paired_y.len() {
            return Err(ViganError::data("paired views have different row counts"));
        }
        for (pool, info, view) in [
            (&self.paired_x, &self.x_info, "x"),
            (&self.x_only, &self.x_info, "x"),
            (&self.paired_y, &self.y_info, "y"),
            (&self.y_only, &self.y_info, "y"),
        ] {
            check_binary(pool, &info.binary, view)?;
            if pool.as_flat().iter().any(|v| !v.is_finite()) {
                return Err(ViganError::data(format!("non-finite value in view {view}")));
            }
        }
        Ok(())
    }

    pub fn dim_x(&self) -> usize {
        self.x_info.dim()
    }

    pub fn dim_y(&self) -> usize {
        self.y_info.dim()
    }

    /// `N`.
    pub fn n_paired(&self) -> usize {
        self.paired_x.len()
    }

    /// `M_x = N + |x_only|`.
    pub fn m_x(&self) -> usize {
        self.n_paired() + self.x_only.len()
    }

    /// `M_y = N + |y_only|`.
    pub fn m_y(&self) -> usize {
        self.n_paired() + self.y_only.len()
    }

    /// Every observed x vector: paired first, then x-only.
    pub fn all_x(&self) -> RowSet {
        self.paired_x
            .append(&self.x_only)
            .expect("validated widths")
    }

    pub fn all_y(&self) -> RowSet {
        self.paired_y
            .append(&self.y_only)
            .expect("validated widths")
    }

    /// Min–max statistics over every observed vector of each view.
    pub fn fit_stats(&self) -> Result<NormStats> {
        Ok(NormStats {
            x: FeatureScaler::fit(&self.all_x())?,
            y: FeatureScaler::fit(&self.all_y())?,
        })
    }

    pub fn normalized(&self, stats: &NormStats) -> Result<MultiViewDataset> {
        if stats.x.dim() != self.dim_x() || stats.y.dim() != self.dim_y() {
            return Err(ViganError::shape(
                "normalize",
                &[stats.x.dim(), stats.y.dim()],
                &[self.dim_x(), self.dim_y()],
            ));
        }
        Ok(MultiViewDataset {
            paired_x: stats.x.transform(&self.paired_x),
            paired_y: stats.y.transform(&self.paired_y),
            x_only: stats.x.transform(&self.x_only),
            y_only: stats.y.transform(&self.y_only),
            x_info: self.x_info.clone(),
            y_info: self.y_info.clone(),
        })
    }
}

fn check_binary(pool: &RowSet, flags: &[bool], view: &str) -> Result<()> {
    for row in pool.iter() {
        for (j, (&v, &is_bin)) in row.iter().zip(flags).enumerate() {
            if is_bin && v != 0.0 && v != 1.0 {
                return Err(ViganError::data(format!(
                    "binary feature {view}[{j}] holds non-binary value {v}"
                )));
            }
        }
    }
    Ok(())
}

/// Complete observations behind the hidden halves of unpaired examples,
/// aligned row by row with `x_only` / `y_only`.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruth {
    pub y_for_x_only: RowSet,
    pub x_for_y_only: RowSet,
}

/// Complete pairs with a known answer in both directions.
#[derive(Clone, Debug, PartialEq)]
pub struct PairSet {
    pub x: RowSet,
    pub y: RowSet,
}

impl PairSet {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

/// Inputs with the target each should be imputed to, per direction.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalSet {
    pub x2y_inputs: RowSet,
    pub x2y_targets: RowSet,
    pub y2x_inputs: RowSet,
    pub y2x_targets: RowSet,
}

impl EvalSet {
    pub fn from_pairs(pairs: &PairSet) -> Self {
        EvalSet {
            x2y_inputs: pairs.x.clone(),
            x2y_targets: pairs.y.clone(),
            y2x_inputs: pairs.y.clone(),
            y2x_targets: pairs.x.clone(),
        }
    }

    /// Unpaired examples of `ds` scored against the hidden halves.
    pub fn from_ground_truth(ds: &MultiViewDataset, truth: &GroundTruth) -> Self {
        EvalSet {
            x2y_inputs: ds.x_only.clone(),
            x2y_targets: truth.y_for_x_only.clone(),
            y2x_inputs: ds.y_only.clone(),
            y2x_targets: truth.x_for_y_only.clone(),
        }
    }

    pub fn inputs(&self, dir: Direction) -> &RowSet {
        match dir {
            Direction::XToY => &self.x2y_inputs,
            Direction::YToX => &self.y2x_inputs,
        }
    }

    pub fn targets(&self, dir: Direction) -> &RowSet {
        match dir {
            Direction::XToY => &self.x2y_targets,
            Direction::YToX => &self.y2x_targets,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> MultiViewDataset {
        MultiViewDataset::new(
            RowSet::from_rows(2, &[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap(),
            RowSet::from_rows(1, &[vec![0.0], vec![1.0]]).unwrap(),
            RowSet::from_rows(2, &[vec![5.0, 6.0]]).unwrap(),
            RowSet::new(1),
            ViewInfo::numeric("x", 2),
            ViewInfo {
                names: vec!["y0".into()],
                binary: vec![true],
            },
        )
        .unwrap()
    }

    #[test]
    fn counts_follow_decomposition() {
        let ds = tiny();
        assert_eq!(ds.n_paired(), 2);
        assert_eq!(ds.m_x(), 3);
        assert_eq!(ds.m_y(), 2);
        assert_eq!(ds.all_x().len(), ds.m_x());
        assert_eq!(ds.all_y().len(), ds.m_y());
    }

    #[test]
    fn rejects_non_binary_in_binary_feature() {
        let mut ds = tiny();
        ds.paired_y = RowSet::from_rows(1, &[vec![0.5], vec![1.0]]).unwrap();
        assert!(ds.validate().is_err());
    }

    #[test]
    fn rejects_width_mismatch() {
        let mut ds = tiny();
        ds.x_only = RowSet::from_rows(3, &[vec![1.0, 2.0, 3.0]]).unwrap();
        assert!(ds.validate().is_err());
    }

    #[test]
    fn direction_parse_and_display() {
        for d in Direction::BOTH {
            assert_eq!(d.to_string().parse::<Direction>().unwrap(), d);
        }
        assert!("sideways".parse::<Direction>().is_err());
    }

    #[test]
    fn empty_rowset_has_no_tensor() {
        assert!(RowSet::new(3).to_tensor().is_err());
    }
}
