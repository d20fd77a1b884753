use super::softimpute::{soft_impute, Matrix, SoftImputeConfig};
use crate::data::{Direction, MultiViewDataset, NormStats, RowSet};
use crate::error::{Result, ViganError};
use crate::model::{threshold_binary, ImputeMode, ViganModel};

/// Anything that fills in a missing view from the present one, in raw
/// feature units.
pub trait Imputer {
    fn label(&self) -> String;
    fn impute(&self, input: &RowSet, dir: Direction) -> Result<RowSet>;
}

/// A trained model used through one of its imputation paths.
pub struct ModelImputer<'a> {
    model: &'a ViganModel,
    mode: ImputeMode,
    label: String,
}

impl<'a> ModelImputer<'a> {
    pub fn new(model: &'a ViganModel, mode: ImputeMode) -> Self {
        let label = match mode {
            ImputeMode::Full => "vigan",
            ImputeMode::GeneratorOnly => "gan-only",
            ImputeMode::DaeOnly => "dae-only",
        };
        ModelImputer {
            model,
            mode,
            label: label.to_string(),
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }
}

impl Imputer for ModelImputer<'_> {
    fn label(&self) -> String {
        self.label.clone()
    }

    fn impute(&self, input: &RowSet, dir: Direction) -> Result<RowSet> {
        self.model.impute_with(input, dir, self.mode)
    }
}

/// Predicts the per-feature training mean of the target view, ignoring the
/// input. Binary features are thresholded at 0.5.
#[derive(Clone, Debug, PartialEq)]
pub struct MeanImputer {
    x_mean: Option<Vec<f64>>,
    y_mean: Option<Vec<f64>>,
    x_binary: Vec<bool>,
    y_binary: Vec<bool>,
}

fn column_means(rows: &RowSet) -> Option<Vec<f64>> {
    if rows.is_empty() {
        return None;
    }
    let mut sum = vec![0.0; rows.width()];
    for r in rows.iter() {
        sum.iter_mut().zip(r).for_each(|(s, v)| *s += v);
    }
    Some(sum.into_iter().map(|s| s / rows.len() as f64).collect())
}

impl MeanImputer {
    /// Means over every observed vector of each view.
    pub fn fit(ds: &MultiViewDataset) -> Self {
        MeanImputer {
            x_mean: column_means(&ds.all_x()),
            y_mean: column_means(&ds.all_y()),
            x_binary: ds.x_info.binary.clone(),
            y_binary: ds.y_info.binary.clone(),
        }
    }

    pub fn mean(&self, dir: Direction) -> Option<&[f64]> {
        match dir {
            Direction::XToY => self.y_mean.as_deref(),
            Direction::YToX => self.x_mean.as_deref(),
        }
    }
}

impl Imputer for MeanImputer {
    fn label(&self) -> String {
        "mean".into()
    }

    fn impute(&self, input: &RowSet, dir: Direction) -> Result<RowSet> {
        let (present, mean, flags) = match dir {
            Direction::XToY => (self.x_binary.len(), &self.y_mean, &self.y_binary),
            Direction::YToX => (self.y_binary.len(), &self.x_mean, &self.x_binary),
        };
        if input.width() != present {
            return Err(ViganError::shape(
                "mean imputer input",
                &[input.width()],
                &[present],
            ));
        }
        let mean = mean
            .as_ref()
            .ok_or(ViganError::Empty("target view for mean imputation"))?;
        let mut out = RowSet::new(mean.len());
        for _ in 0..input.len() {
            out.push(mean)?;
        }
        Ok(threshold_binary(&out, flags))
    }
}

/// Soft-impute over the joint `[x | y]` matrix of the training rows plus
/// the rows to impute, in the same normalized space the model uses.
///
/// `config.rank` counts components of the centered data; one more is
/// added for the intercept.
pub struct SoftImputeImputer {
    train: MultiViewDataset,
    stats: NormStats,
    config: SoftImputeConfig,
}

impl SoftImputeImputer {
    /// `train` is in raw units; `stats` are the normalization statistics to
    /// apply (normally the model's).
    pub fn new(
        train: &MultiViewDataset,
        stats: &NormStats,
        config: SoftImputeConfig,
    ) -> Result<Self> {
        Ok(SoftImputeImputer {
            train: train.normalized(stats)?,
            stats: stats.clone(),
            config,
        })
    }
}

impl Imputer for SoftImputeImputer {
    fn label(&self) -> String {
        "softimpute".into()
    }

    fn impute(&self, input: &RowSet, dir: Direction) -> Result<RowSet> {
        let (dx, dy) = (self.train.dim_x(), self.train.dim_y());
        let (present, in_scaler, out_scaler, flags) = match dir {
            Direction::XToY => (dx, &self.stats.x, &self.stats.y, &self.train.y_info.binary),
            Direction::YToX => (dy, &self.stats.y, &self.stats.x, &self.train.x_info.binary),
        };
        if input.width() != present {
            return Err(ViganError::shape(
                "softimpute input",
                &[input.width()],
                &[present],
            ));
        }
        if input.is_empty() {
            return Ok(RowSet::new(out_scaler.dim()));
        }
        let cols = dx + dy;
        let mut data = Vec::new();
        let mut mask = Vec::new();
        let mut push = |x: Option<&[f64]>, y: Option<&[f64]>| {
            match x {
                Some(v) => data.extend_from_slice(v),
                None => data.extend(std::iter::repeat_n(0.0, dx)),
            }
            mask.extend(std::iter::repeat_n(x.is_some(), dx));
            match y {
                Some(v) => data.extend_from_slice(v),
                None => data.extend(std::iter::repeat_n(0.0, dy)),
            }
            mask.extend(std::iter::repeat_n(y.is_some(), dy));
        };
        let t = &self.train;
        for (x, y) in t.paired_x.iter().zip(t.paired_y.iter()) {
            push(Some(x), Some(y));
        }
        t.x_only.iter().for_each(|x| push(Some(x), None));
        t.y_only.iter().for_each(|y| push(None, Some(y)));
        let first_query = t.n_paired() + t.x_only.len() + t.y_only.len();
        let normalized = in_scaler.transform(input);
        for r in normalized.iter() {
            match dir {
                Direction::XToY => push(Some(r), None),
                Direction::YToX => push(None, Some(r)),
            }
        }
        let rows = data.len() / cols;
        // Center each column on its observed mean, then append an observed
        // all-ones column so the completion can fit an intercept.
        let mut means = vec![0.0; cols];
        let mut counts = vec![0usize; cols];
        for (i, (&v, &o)) in data.iter().zip(&mask).enumerate() {
            if o {
                means[i % cols] += v;
                counts[i % cols] += 1;
            }
        }
        for (m, &c) in means.iter_mut().zip(&counts) {
            *m /= c.max(1) as f64;
        }
        let wide = cols + 1;
        let mut centered = Vec::with_capacity(rows * wide);
        let mut wide_mask = Vec::with_capacity(rows * wide);
        for r in 0..rows {
            for (c, mean) in means.iter().enumerate() {
                let i = r * cols + c;
                centered.push(if mask[i] { data[i] - mean } else { 0.0 });
                wide_mask.push(mask[i]);
            }
            centered.push(1.0);
            wide_mask.push(true);
        }
        let mut cfg = self.config;
        cfg.rank = (cfg.rank + 1).min(rows.min(wide));
        let result = soft_impute(&Matrix::new(rows, wide, centered)?, &wide_mask, &cfg)?;
        let value = |r: usize, c: usize| result.completed.data[r * wide + c] + means[c];
        let (start, width) = match dir {
            Direction::XToY => (dx, dy),
            Direction::YToX => (0, dx),
        };
        let mut out = RowSet::new(width);
        for r in first_query..rows {
            let row: Vec<f64> = (start..start + width).map(|c| value(r, c)).collect();
            out.push(&out_scaler.denormalize(&row))?;
        }
        Ok(threshold_binary(&out, flags))
    }
}
