//! Dataset directories: `manifest.json`, `data.csv` and an optional
//! `ground_truth.csv`.
//!
//! `data.csv` has a header row with the view-1 columns followed by the
//! view-2 columns. A row whose view-2 cells are all empty is an x-only
//! example (and vice versa); a view may only be missing as a whole.
//! `ground_truth.csv`, when present, has the same header and one complete
//! row per `data.csv` row.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::dataset::{EvalSet, GroundTruth, MultiViewDataset, PairSet, RowSet, ViewInfo};
use super::synthetic::{SyntheticData, SyntheticSpec};
use crate::error::{Result, ViganError};
use crate::fsutil::atomic_write;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const DATA_FILE: &str = "data.csv";
pub const GROUND_TRUTH_FILE: &str = "ground_truth.csv";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Splits {
    /// `data.csv` row indices (0-based, header excluded).
    #[serde(default)]
    pub validation: Vec<usize>,
    #[serde(default)]
    pub test: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub dim_x: usize,
    pub dim_y: usize,
    pub x_columns: Vec<String>,
    pub y_columns: Vec<String>,
    #[serde(default)]
    pub x_binary: Vec<bool>,
    #[serde(default)]
    pub y_binary: Vec<bool>,
    #[serde(default)]
    pub splits: Splits,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticSpec>,
}

impl Manifest {
    pub fn validate(&self) -> Result<()> {
        if self.x_columns.len() != self.dim_x || self.y_columns.len() != self.dim_y {
            return Err(ViganError::data(
                "manifest column lists disagree with dim_x/dim_y",
            ));
        }
        if self.dim_x == 0 || self.dim_y == 0 {
            return Err(ViganError::data("manifest dimensions must be positive"));
        }
        for (flags, dim, view) in [
            (&self.x_binary, self.dim_x, "x"),
            (&self.y_binary, self.dim_y, "y"),
        ] {
            if !flags.is_empty() && flags.len() != dim {
                return Err(ViganError::data(format!(
                    "{view}_binary must have one flag per column"
                )));
            }
        }
        Ok(())
    }

    fn flags(flags: &[bool], dim: usize) -> Vec<bool> {
        if flags.is_empty() {
            vec![false; dim]
        } else {
            flags.to_vec()
        }
    }

    pub fn x_info(&self) -> ViewInfo {
        ViewInfo {
            names: self.x_columns.clone(),
            binary: Self::flags(&self.x_binary, self.dim_x),
        }
    }

    pub fn y_info(&self) -> ViewInfo {
        ViewInfo {
            names: self.y_columns.clone(),
            binary: Self::flags(&self.y_binary, self.dim_y),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = fs::read_to_string(path.as_ref())?;
        let m: Manifest = serde_json::from_str(&text)?;
        m.validate()?;
        Ok(m)
    }
}

/// One parsed `data.csv` row.
#[derive(Clone, Debug, PartialEq)]
pub enum Observation {
    Pair(Vec<f64>, Vec<f64>),
    XOnly(Vec<f64>),
    YOnly(Vec<f64>),
}

/// Everything read from a dataset directory. Held-out rows never enter
/// `train`, nor its normalization statistics.
#[derive(Clone, Debug)]
pub struct LoadedData {
    pub manifest: Manifest,
    pub train: MultiViewDataset,
    pub validation: PairSet,
    pub test: PairSet,
    /// Hidden halves of the training set's unpaired rows.
    pub ground_truth: Option<GroundTruth>,
}

impl LoadedData {
    /// Test pairs when the manifest reserves any, otherwise the unpaired
    /// training rows scored against ground truth.
    pub fn eval_set(&self) -> Result<EvalSet> {
        if !self.test.is_empty() {
            return Ok(EvalSet::from_pairs(&self.test));
        }
        match &self.ground_truth {
            Some(gt) => Ok(EvalSet::from_ground_truth(&self.train, gt)),
            None => Err(ViganError::data(
                "no evaluation data: manifest has no test split and there is no ground_truth.csv",
            )),
        }
    }
}

fn parse_cell(cell: &str, row: usize, col: &str) -> Result<Option<f64>> {
    let cell = cell.trim();
    if cell.is_empty() {
        return Ok(None);
    }
    cell.parse::<f64>().map(Some).map_err(|_| {
        ViganError::data(format!(
            "row {row}, column `{col}`: non-numeric cell `{cell}`"
        ))
    })
}

fn read_rows(path: &Path, manifest: &Manifest) -> Result<Vec<Vec<Option<f64>>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)?;
    let expected: Vec<&str> = manifest
        .x_columns
        .iter()
        .chain(&manifest.y_columns)
        .map(String::as_str)
        .collect();
    let header: Vec<String> = reader
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if header != expected {
        return Err(ViganError::data(format!(
            "{}: header {header:?} does not match manifest columns {expected:?}",
            path.display()
        )));
    }
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| ViganError::data(format!("{}: {e}", path.display())))?;
        let cells = rec
            .iter()
            .zip(&expected)
            .map(|(c, name)| parse_cell(c, i, name))
            .collect::<Result<Vec<_>>>()?;
        rows.push(cells);
    }
    if rows.is_empty() {
        return Err(ViganError::data(format!(
            "{} contains no data rows",
            path.display()
        )));
    }
    Ok(rows)
}

fn classify(cells: &[Option<f64>], dim_x: usize, row: usize) -> Result<Observation> {
    let (xs, ys) = cells.split_at(dim_x);
    let full = |v: &[Option<f64>]| v.iter().all(Option::is_some);
    let none = |v: &[Option<f64>]| v.iter().all(Option::is_none);
    let collect = |v: &[Option<f64>]| v.iter().map(|c| c.unwrap()).collect::<Vec<f64>>();
    match (full(xs), full(ys), none(xs), none(ys)) {
        (true, true, _, _) => Ok(Observation::Pair(collect(xs), collect(ys))),
        (true, _, _, true) => Ok(Observation::XOnly(collect(xs))),
        (_, true, true, _) => Ok(Observation::YOnly(collect(ys))),
        (_, _, true, true) => Err(ViganError::data(format!(
            "row {row} has no observed values"
        ))),
        _ => Err(ViganError::data(format!(
            "row {row} is missing part of a view; only whole-view missingness is supported"
        ))),
    }
}

/// Parses `data.csv` into observations, in file order.
pub fn read_observations(path: impl AsRef<Path>, manifest: &Manifest) -> Result<Vec<Observation>> {
    read_rows(path.as_ref(), manifest)?
        .iter()
        .enumerate()
        .map(|(i, cells)| classify(cells, manifest.dim_x, i))
        .collect()
}

/// Loads `data.csv` with the manifest's split assignments applied.
pub fn load_csv(
    path: impl AsRef<Path>,
    manifest: &Manifest,
) -> Result<(MultiViewDataset, PairSet, PairSet, Vec<usize>)> {
    manifest.validate()?;
    let obs = read_observations(path, manifest)?;
    let held: BTreeMap<usize, bool> = manifest
        .splits
        .validation
        .iter()
        .map(|&i| (i, false))
        .chain(manifest.splits.test.iter().map(|&i| (i, true)))
        .collect();
    if let Some(&i) = overlapping_splits(&manifest.splits).first() {
        return Err(ViganError::data(format!(
            "row {i} assigned to both validation and test"
        )));
    }
    if let Some((&i, _)) = held.iter().find(|(&i, _)| i >= obs.len()) {
        return Err(ViganError::data(format!(
            "split row {i} beyond {} data rows",
            obs.len()
        )));
    }
    let (dx, dy) = (manifest.dim_x, manifest.dim_y);
    let (mut px, mut py, mut xo, mut yo) = (
        RowSet::new(dx),
        RowSet::new(dy),
        RowSet::new(dx),
        RowSet::new(dy),
    );
    let mut validation = PairSet {
        x: RowSet::new(dx),
        y: RowSet::new(dy),
    };
    let mut test = validation.clone();
    // data.csv row index of each training row, in pool order (paired, x-only, y-only)
    let mut order = (Vec::new(), Vec::new(), Vec::new());
    for (i, o) in obs.into_iter().enumerate() {
        match (o, held.get(&i)) {
            (Observation::Pair(x, y), Some(&is_test)) => {
                let set = if is_test { &mut test } else { &mut validation };
                set.x.push(&x)?;
                set.y.push(&y)?;
            }
            (_, Some(_)) => {
                return Err(ViganError::data(format!(
                    "held-out row {i} must be a complete pair"
                )));
            }
            (Observation::Pair(x, y), None) => {
                px.push(&x)?;
                py.push(&y)?;
                order.0.push(i);
            }
            (Observation::XOnly(x), None) => {
                xo.push(&x)?;
                order.1.push(i);
            }
            (Observation::YOnly(y), None) => {
                yo.push(&y)?;
                order.2.push(i);
            }
        }
    }
    let train = MultiViewDataset::new(px, py, xo, yo, manifest.x_info(), manifest.y_info())?;
    let mut rows = order.0;
    rows.extend(order.1);
    rows.extend(order.2);
    Ok((train, validation, test, rows))
}

/// Reads a dataset directory.
pub fn load_dir(dir: impl AsRef<Path>) -> Result<LoadedData> {
    let dir = dir.as_ref();
    let manifest = Manifest::load(dir.join(MANIFEST_FILE))?;
    let (train, validation, test, rows) = load_csv(dir.join(DATA_FILE), &manifest)?;

    let gt_path = dir.join(GROUND_TRUTH_FILE);
    let ground_truth = if gt_path.exists() {
        let full = read_observations(&gt_path, &manifest)?;
        let (np, nx) = (train.n_paired(), train.x_only.len());
        let mut y_for_x_only = RowSet::new(manifest.dim_y);
        let mut x_for_y_only = RowSet::new(manifest.dim_x);
        for (k, &row) in rows.iter().enumerate().skip(np) {
            let Some(Observation::Pair(x, y)) = full.get(row) else {
                return Err(ViganError::data(format!(
                    "ground truth row {row} is missing or incomplete"
                )));
            };
            if k < np + nx {
                y_for_x_only.push(y)?;
            } else {
                x_for_y_only.push(x)?;
            }
        }
        Some(GroundTruth {
            y_for_x_only,
            x_for_y_only,
        })
    } else {
        None
    };

    Ok(LoadedData {
        manifest,
        train,
        validation,
        test,
        ground_truth,
    })
}

fn fmt_cell(v: f64) -> String {
    // Display for f64 is the shortest string that parses back exactly
    format!("{v}")
}

/// Serializes observations as `data.csv` bytes.
pub fn observations_to_csv(manifest: &Manifest, obs: &[Observation]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(manifest.x_columns.iter().chain(&manifest.y_columns))?;
    let blank = |n: usize| vec![String::new(); n];
    for o in obs {
        let (xs, ys) = match o {
            Observation::Pair(x, y) => (
                x.iter().map(|&v| fmt_cell(v)).collect(),
                y.iter().map(|&v| fmt_cell(v)).collect(),
            ),
            Observation::XOnly(x) => (
                x.iter().map(|&v| fmt_cell(v)).collect(),
                blank(manifest.dim_y),
            ),
            Observation::YOnly(y) => (
                blank(manifest.dim_x),
                y.iter().map(|&v| fmt_cell(v)).collect(),
            ),
        };
        let record: Vec<String> = [xs, ys].concat();
        w.write_record(&record)?;
    }
    w.into_inner().map_err(|e| ViganError::data(e.to_string()))
}

/// Writes a generated dataset directory. Rows are ordered paired, x-only,
/// y-only.
pub fn write_synthetic_dir(
    dir: impl AsRef<Path>,
    spec: &SyntheticSpec,
    data: &SyntheticData,
) -> Result<Manifest> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let ds = &data.dataset;
    let manifest = Manifest {
        dim_x: ds.dim_x(),
        dim_y: ds.dim_y(),
        x_columns: ds.x_info.names.clone(),
        y_columns: ds.y_info.names.clone(),
        x_binary: ds.x_info.binary.clone(),
        y_binary: ds.y_info.binary.clone(),
        splits: Splits::default(),
        seed: Some(spec.seed),
        synthetic: Some(spec.clone()),
    };

    let mut observed = Vec::with_capacity(spec.total_rows());
    let mut complete = Vec::with_capacity(spec.total_rows());
    for (x, y) in ds.paired_x.iter().zip(ds.paired_y.iter()) {
        observed.push(Observation::Pair(x.to_vec(), y.to_vec()));
        complete.push(Observation::Pair(x.to_vec(), y.to_vec()));
    }
    for (x, y) in ds.x_only.iter().zip(data.ground_truth.y_for_x_only.iter()) {
        observed.push(Observation::XOnly(x.to_vec()));
        complete.push(Observation::Pair(x.to_vec(), y.to_vec()));
    }
    for (y, x) in ds.y_only.iter().zip(data.ground_truth.x_for_y_only.iter()) {
        observed.push(Observation::YOnly(y.to_vec()));
        complete.push(Observation::Pair(x.to_vec(), y.to_vec()));
    }

    atomic_write(
        dir.join(MANIFEST_FILE),
        serde_json::to_string_pretty(&manifest)?.as_bytes(),
    )?;
    atomic_write(
        dir.join(DATA_FILE),
        &observations_to_csv(&manifest, &observed)?,
    )?;
    atomic_write(
        dir.join(GROUND_TRUTH_FILE),
        &observations_to_csv(&manifest, &complete)?,
    )?;
    Ok(manifest)
}

/// Reads a single-view CSV (header + numeric rows) of the given width.
pub fn read_view_csv(path: impl AsRef<Path>, width: usize) -> Result<(Vec<String>, RowSet)> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)?;
    let header: Vec<String> = reader
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if header.len() != width {
        return Err(ViganError::shape(
            "input csv width",
            &[header.len()],
            &[width],
        ));
    }
    let mut rows = RowSet::new(width);
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| ViganError::data(format!("{}: {e}", path.display())))?;
        let row = rec
            .iter()
            .zip(&header)
            .map(|(c, name)| {
                parse_cell(c, i, name)?
                    .ok_or_else(|| ViganError::data(format!("row {i}: empty cell")))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(&row)?;
    }
    Ok((header, rows))
}

/// Serializes a single-view block with a header row.
pub fn view_to_csv(header: &[String], rows: &RowSet) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows.iter() {
        w.write_record(r.iter().map(|&v| fmt_cell(v)))?;
    }
    w.into_inner().map_err(|e| ViganError::data(e.to_string()))
}

/// Row indices named in both split lists.
pub fn overlapping_splits(splits: &Splits) -> Vec<usize> {
    let v: BTreeSet<_> = splits.validation.iter().copied().collect();
    splits
        .test
        .iter()
        .copied()
        .filter(|i| v.contains(i))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synthetic::{generate, SyntheticKind};

    fn manifest(dx: usize, dy: usize) -> Manifest {
        Manifest {
            dim_x: dx,
            dim_y: dy,
            x_columns: (0..dx).map(|i| format!("a{i}")).collect(),
            y_columns: (0..dy).map(|i| format!("b{i}")).collect(),
            x_binary: vec![],
            y_binary: vec![],
            splits: Splits::default(),
            seed: None,
            synthetic: None,
        }
    }

    fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn counts_pairs_and_single_views() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "d.csv",
            "a0,a1,b0\n1,2,3\n4,5,6\n7,8,9\n1.5,2.5,\n3.5,4.5,\n",
        );
        let (ds, _, _, _) = load_csv(&p, &manifest(2, 1)).unwrap();
        assert_eq!(ds.n_paired(), 3);
        assert_eq!(ds.x_only.len(), 2);
        assert_eq!(ds.y_only.len(), 0);
    }

    #[test]
    fn empty_file_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "d.csv", "a0,a1,b0\n");
        assert!(load_csv(&p, &manifest(2, 1)).is_err());
        let p = write(dir.path(), "e.csv", "");
        assert!(load_csv(&p, &manifest(2, 1)).is_err());
    }

    #[test]
    fn malformed_rows_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let m = manifest(2, 1);
        let ragged = write(dir.path(), "r.csv", "a0,a1,b0\n1,2,3\n1,2\n");
        assert!(load_csv(&ragged, &m).is_err());
        let text = write(dir.path(), "t.csv", "a0,a1,b0\n1,abc,3\n");
        let err = load_csv(&text, &m).unwrap_err().to_string();
        assert!(err.contains("non-numeric"), "{err}");
        let partial = write(dir.path(), "p.csv", "a0,a1,b0\n1,,3\n");
        let err = load_csv(&partial, &m).unwrap_err().to_string();
        assert!(err.contains("whole-view"), "{err}");
    }

    #[test]
    fn splits_hold_rows_out_of_training() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "d.csv", "a0,b0\n1,2\n3,4\n5,6\n7,\n");
        let mut m = manifest(1, 1);
        m.splits.test = vec![1];
        m.splits.validation = vec![2];
        let (ds, val, test, _) = load_csv(&p, &m).unwrap();
        assert_eq!(ds.n_paired(), 1);
        assert_eq!(test.x.row(0), &[3.0]);
        assert_eq!(val.y.row(0), &[6.0]);
        let stats = ds.fit_stats().unwrap();
        assert_eq!(stats.x.max, vec![7.0]);
        assert_eq!(stats.y.max, vec![2.0]);

        m.splits.test = vec![3];
        assert!(load_csv(&p, &m).is_err());
    }

    #[test]
    fn synthetic_directory_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let spec = SyntheticSpec {
            kind: SyntheticKind::Rotation,
            dim_x: 3,
            dim_y: 3,
            noise: 0.05,
            paired: 5,
            x_only: 4,
            y_only: 3,
            seed: 11,
        };
        let data = generate(&spec).unwrap();
        write_synthetic_dir(dir.path(), &spec, &data).unwrap();
        let loaded = load_dir(dir.path()).unwrap();
        let max_diff = |a: &RowSet, b: &RowSet| {
            a.as_flat()
                .iter()
                .zip(b.as_flat())
                .map(|(u, v)| (u - v).abs())
                .fold(0.0, f64::max)
        };
        assert_eq!(loaded.train.n_paired(), 5);
        assert!(max_diff(&loaded.train.paired_x, &data.dataset.paired_x) <= 1e-12);
        assert!(max_diff(&loaded.train.y_only, &data.dataset.y_only) <= 1e-12);
        let gt = loaded.ground_truth.as_ref().unwrap();
        assert!(max_diff(&gt.y_for_x_only, &data.ground_truth.y_for_x_only) <= 1e-12);
        assert!(max_diff(&gt.x_for_y_only, &data.ground_truth.x_for_y_only) <= 1e-12);
        let eval = loaded.eval_set().unwrap();
        assert_eq!(eval.x2y_inputs.len(), 4);
        assert_eq!(eval.y2x_inputs.len(), 3);
    }

    #[test]
    fn view_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let rows = RowSet::from_rows(2, &[vec![0.1, 1.0 / 3.0], vec![-2.5e-9, 7.0]]).unwrap();
        let header = vec!["u".to_string(), "v".to_string()];
        let p = dir.path().join("v.csv");
        fs::write(&p, view_to_csv(&header, &rows).unwrap()).unwrap();
        let (h, back) = read_view_csv(&p, 2).unwrap();
        assert_eq!(h, header);
        assert_eq!(back, rows);
        assert!(read_view_csv(&p, 3).is_err());
    }
}
