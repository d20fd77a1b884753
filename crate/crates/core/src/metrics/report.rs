use std::path::Path;

use serde::{Deserialize, Serialize};

use super::imputers::Imputer;
use super::scores::{hamming_accuracy, rmse};
use crate::data::{Direction, EvalSet};
use crate::error::{Result, ViganError};
use crate::fsutil::atomic_write;

pub const METRIC_RMSE: &str = "rmse";
pub const METRIC_ACCURACY: &str = "accuracy";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub method: String,
    /// `V1->V2` or `V2->V1`.
    pub direction: String,
    pub metric: String,
    pub value: f64,
    pub n: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
}

impl EvalReport {
    pub fn extend(&mut self, other: EvalReport) {
        self.rows.extend(other.rows);
    }

    pub fn get(&self, method: &str, dir: Direction, metric: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.direction == dir.label() && r.metric == metric)
            .map(|r| r.value)
    }

    /// Mean of `metric` over the directions present for `method`.
    pub fn average(&self, method: &str, metric: &str) -> Option<f64> {
        let vals: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.method == method && r.metric == metric)
            .map(|r| r.value)
            .collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        if self.rows.is_empty() {
            w.write_record(["method", "direction", "metric", "value", "n"])?;
        }
        for r in &self.rows {
            w.serialize(r)?;
        }
        Ok(w.into_inner().map_err(|e| e.into_error())?)
    }

    pub fn from_csv(bytes: &[u8]) -> Result<EvalReport> {
        let mut r = csv::Reader::from_reader(bytes);
        let rows = r
            .deserialize()
            .collect::<std::result::Result<Vec<EvalRow>, _>>()?;
        Ok(EvalReport { rows })
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        atomic_write(path.as_ref(), &self.to_csv()?)
    }
}

/// Hides the target view of every evaluation row, imputes it and scores
/// the result. Accuracy is added when the target view is binary.
pub fn evaluate(
    imputer: &dyn Imputer,
    eval: &EvalSet,
    dir: Direction,
    target_binary: bool,
) -> Result<EvalReport> {
    let inputs = eval.inputs(dir);
    let targets = eval.targets(dir);
    if inputs.is_empty() {
        return Err(ViganError::Empty("evaluation set"));
    }
    let pred = imputer.impute(inputs, dir)?;
    let row = |metric: &str, value: f64| EvalRow {
        method: imputer.label(),
        direction: dir.label().to_string(),
        metric: metric.to_string(),
        value,
        n: inputs.len(),
    };
    let mut rows = vec![row(METRIC_RMSE, rmse(&pred, targets)?)];
    if target_binary {
        rows.push(row(METRIC_ACCURACY, hamming_accuracy(&pred, targets)?));
    }
    if let Some(bad) = rows.iter().find(|r| !r.value.is_finite()) {
        return Err(ViganError::NonFinite {
            param: format!("{} {}", bad.method, bad.metric),
        });
    }
    Ok(EvalReport { rows })
}

/// Both directions; a direction without evaluation rows is skipped.
pub fn evaluate_both(
    imputer: &dyn Imputer,
    eval: &EvalSet,
    x_binary: bool,
    y_binary: bool,
) -> Result<EvalReport> {
    let mut report = EvalReport::default();
    for dir in Direction::BOTH {
        if eval.inputs(dir).is_empty() {
            continue;
        }
        let target_binary = match dir {
            Direction::XToY => y_binary,
            Direction::YToX => x_binary,
        };
        report.extend(evaluate(imputer, eval, dir, target_binary)?);
    }
    if report.rows.is_empty() {
        return Err(ViganError::Empty("evaluation set"));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::RowSet;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    struct Oracle(EvalSet);

    impl Imputer for Oracle {
        fn label(&self) -> String {
            "oracle".into()
        }
        fn impute(&self, _: &RowSet, dir: Direction) -> Result<RowSet> {
            Ok(self.0.targets(dir).clone())
        }
    }

    struct Coin(u64);

    impl Imputer for Coin {
        fn label(&self) -> String {
            "coin".into()
        }
        fn impute(&self, input: &RowSet, _: Direction) -> Result<RowSet> {
            let mut rng = ChaCha8Rng::seed_from_u64(self.0);
            let bits = (0..input.len() * 11)
                .map(|_| rng.random_bool(0.5) as u8 as f64)
                .collect();
            RowSet::from_flat(11, bits)
        }
    }

    fn bits(rows: usize, seed: u64) -> RowSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        RowSet::from_flat(
            11,
            (0..rows * 11)
                .map(|_| rng.random_bool(0.5) as u8 as f64)
                .collect(),
        )
        .unwrap()
    }

    fn eval_set(rows: usize) -> EvalSet {
        EvalSet {
            x2y_inputs: bits(rows, 1),
            x2y_targets: bits(rows, 2),
            y2x_inputs: bits(rows, 3),
            y2x_targets: bits(rows, 4),
        }
    }

    #[test]
    fn perfect_imputer_scores_perfectly() {
        let e = eval_set(20);
        let r = evaluate_both(&Oracle(e.clone()), &e, true, true).unwrap();
        assert_eq!(r.rows.len(), 4);
        for dir in Direction::BOTH {
            assert_eq!(r.get("oracle", dir, METRIC_RMSE), Some(0.0));
            assert_eq!(r.get("oracle", dir, METRIC_ACCURACY), Some(100.0));
        }
    }

    #[test]
    fn coin_flips_score_about_half() {
        let e = eval_set(2000);
        let r = evaluate(&Coin(9), &e, Direction::XToY, true).unwrap();
        let acc = r.get("coin", Direction::XToY, METRIC_ACCURACY).unwrap();
        assert!((acc - 50.0).abs() < 3.0, "{acc}");
        assert_eq!(r, evaluate(&Coin(9), &e, Direction::XToY, true).unwrap());
    }

    #[test]
    fn empty_set_errors() {
        let e = EvalSet {
            x2y_inputs: RowSet::new(11),
            x2y_targets: RowSet::new(11),
            y2x_inputs: RowSet::new(11),
            y2x_targets: RowSet::new(11),
        };
        assert!(evaluate_both(&Coin(1), &e, true, true).is_err());
    }

    #[test]
    fn csv_layout() {
        let e = eval_set(5);
        let r = evaluate(&Oracle(e.clone()), &e, Direction::YToX, false).unwrap();
        let text = String::from_utf8(r.to_csv().unwrap()).unwrap();
        assert_eq!(
            text,
            "method,direction,metric,value,n\noracle,V2->V1,rmse,0.0,5\n"
        );
        assert_eq!(EvalReport::from_csv(text.as_bytes()).unwrap(), r);
    }
}
