//! Python bindings. Rows cross the boundary as lists of float lists and
//! configs as JSON strings in the same format the CLI reads.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use vigan::data::{generate, load_dir, write_synthetic_dir, Direction, RowSet, SyntheticSpec};
use vigan::metrics::{
    evaluate_both, EvalReport, Imputer, MeanImputer, ModelImputer, SoftImputeConfig,
    SoftImputeImputer,
};
use vigan::model::{toy_gradient_check_with, Architecture, ImputeMode, ViganModel, TOY_STEP};
use vigan::train::{run_schedule, TrainConfig};
use vigan::ViganError;

fn py_err(e: ViganError) -> PyErr {
    match e {
        ViganError::Io(_) => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn from_json<T: serde::de::DeserializeOwned + Default>(json: Option<&str>) -> PyResult<T> {
    match json {
        None => Ok(T::default()),
        Some(s) => serde_json::from_str(s).map_err(|e| PyValueError::new_err(e.to_string())),
    }
}

fn parse_mode(mode: &str) -> PyResult<ImputeMode> {
    serde_json::from_value(serde_json::Value::String(mode.into()))
        .map_err(|_| PyValueError::new_err(format!("unknown mode {mode:?}")))
}

fn parse_direction(dir: &str) -> PyResult<Direction> {
    dir.parse().map_err(py_err)
}

type ReportRow = (String, String, String, f64, usize);

fn rows_of(report: EvalReport) -> Vec<ReportRow> {
    report
        .rows
        .into_iter()
        .map(|r| (r.method, r.direction, r.metric, r.value, r.n))
        .collect()
}

fn score(imputer: &dyn Imputer, data_dir: PathBuf) -> Result<EvalReport, ViganError> {
    let loaded = load_dir(&data_dir)?;
    let eval = loaded.eval_set()?;
    let all = |b: &[bool]| b.iter().all(|&v| v);
    let ds = &loaded.train;
    evaluate_both(
        imputer,
        &eval,
        all(&ds.x_info.binary),
        all(&ds.y_info.binary),
    )
}

/// Writes a synthetic dataset directory. `spec_json` holds any
/// `SyntheticSpec` fields; missing ones take their defaults.
#[pyfunction]
#[pyo3(signature = (out_dir, spec_json=None))]
fn gen_data(out_dir: PathBuf, spec_json: Option<&str>) -> PyResult<usize> {
    let spec: SyntheticSpec = from_json(spec_json)?;
    spec.validate().map_err(py_err)?;
    let data = generate(&spec).map_err(py_err)?;
    write_synthetic_dir(&out_dir, &spec, &data).map_err(py_err)?;
    Ok(spec.total_rows())
}

/// Finite-difference check of the full objective on a toy model. Returns
/// the largest relative error.
#[pyfunction]
#[pyo3(signature = (seed, step=TOY_STEP))]
fn gradcheck(py: Python<'_>, seed: u64, step: f64) -> PyResult<f64> {
    let report = py
        .detach(|| toy_gradient_check_with(seed, step))
        .map_err(py_err)?;
    Ok(report.max_rel_err())
}

/// Scores a baseline (`mean` or `softimpute`) on a dataset directory.
#[pyfunction]
#[pyo3(signature = (method, data_dir, softimpute_json=None))]
fn baseline(
    py: Python<'_>,
    method: &str,
    data_dir: PathBuf,
    softimpute_json: Option<&str>,
) -> PyResult<Vec<ReportRow>> {
    let cfg: SoftImputeConfig = from_json(softimpute_json)?;
    let report = py.detach(|| -> Result<EvalReport, ViganError> {
        let ds = load_dir(&data_dir)?.train;
        let imputer: Box<dyn Imputer> = match method {
            "mean" => Box::new(MeanImputer::fit(&ds)),
            "softimpute" => Box::new(SoftImputeImputer::new(&ds, &ds.fit_stats()?, cfg)?),
            other => {
                return Err(ViganError::InvalidArgument(format!(
                    "unknown method {other:?}"
                )))
            }
        };
        score(imputer.as_ref(), data_dir)
    });
    Ok(rows_of(report.map_err(py_err)?))
}

/// A trained imputation model.
#[pyclass(module = "vigan_py")]
struct Model {
    inner: ViganModel,
}

#[pymethods]
impl Model {
    /// Trains on a dataset directory. `train_json` and `architecture_json`
    /// take the same keys as the CLI config's `train` and `architecture`.
    #[staticmethod]
    #[pyo3(signature = (data_dir, train_json=None, architecture_json=None))]
    fn train(
        py: Python<'_>,
        data_dir: PathBuf,
        train_json: Option<&str>,
        architecture_json: Option<&str>,
    ) -> PyResult<Model> {
        let cfg: TrainConfig = from_json(train_json)?;
        let arch: Architecture = from_json(architecture_json)?;
        let model = py.detach(|| -> Result<ViganModel, ViganError> {
            cfg.validate()?;
            let ds = load_dir(&data_dir)?.train;
            let model = ViganModel::for_dataset(&ds, &arch, cfg.seed)?;
            Ok(run_schedule(model, &ds, &cfg)?.0)
        });
        Ok(Model {
            inner: model.map_err(py_err)?,
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Model> {
        Ok(Model {
            inner: ViganModel::load(path).map_err(py_err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(path).map_err(py_err)
    }

    #[getter]
    fn dim_x(&self) -> usize {
        self.inner.dim_x()
    }

    #[getter]
    fn dim_y(&self) -> usize {
        self.inner.dim_y()
    }

    /// Imputes the missing view. `direction` is `x2y` or `y2x`; `mode` is
    /// `full`, `generator-only` or `dae-only`.
    #[pyo3(signature = (rows, direction, mode="full"))]
    fn impute(&self, rows: Vec<Vec<f64>>, direction: &str, mode: &str) -> PyResult<Vec<Vec<f64>>> {
        let dir = parse_direction(direction)?;
        let mode = parse_mode(mode)?;
        let width = match dir {
            Direction::XToY => self.inner.dim_x(),
            Direction::YToX => self.inner.dim_y(),
        };
        let input = RowSet::from_rows(width, &rows).map_err(py_err)?;
        let out = self.inner.impute_with(&input, dir, mode).map_err(py_err)?;
        Ok(out.iter().map(<[f64]>::to_vec).collect())
    }

    /// Scores the model on a dataset directory's held-out rows. Returns
    /// `(method, direction, metric, value, n)` tuples.
    #[pyo3(signature = (data_dir, mode="full"))]
    fn evaluate(&self, py: Python<'_>, data_dir: PathBuf, mode: &str) -> PyResult<Vec<ReportRow>> {
        let imputer = ModelImputer::new(&self.inner, parse_mode(mode)?);
        let report = py.detach(|| score(&imputer, data_dir)).map_err(py_err)?;
        Ok(rows_of(report))
    }

    fn __repr__(&self) -> String {
        format!(
            "Model(dim_x={}, dim_y={}, params={})",
            self.inner.dim_x(),
            self.inner.dim_y(),
            self.inner.param_count()
        )
    }
}

#[pymodule]
fn vigan_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(gen_data, m)?)?;
    m.add_function(wrap_pyfunction!(gradcheck, m)?)?;
    m.add_function(wrap_pyfunction!(baseline, m)?)?;
    m.add_class::<Model>()?;
    Ok(())
}
