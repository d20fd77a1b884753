use crate::data::RowSet;
use crate::error::{Result, ViganError};

fn check_pair(pred: &RowSet, target: &RowSet, op: &'static str) -> Result<()> {
    if pred.width() != target.width() || pred.len() != target.len() {
        return Err(ViganError::shape(
            op,
            &[pred.len(), pred.width()],
            &[target.len(), target.width()],
        ));
    }
    if pred.is_empty() {
        return Err(ViganError::Empty("examples to score"));
    }
    Ok(())
}

/// Root mean squared error over every entry.
pub fn rmse(pred: &RowSet, target: &RowSet) -> Result<f64> {
    check_pair(pred, target, "rmse")?;
    let a = pred.as_flat();
    let b = target.as_flat();
    let sse: f64 = a.iter().zip(b).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok((sse / a.len() as f64).sqrt())
}

/// `100 · (1 − d/len)` per example, averaged over examples, where `d` is the
/// number of differing bits.
pub fn hamming_accuracy(pred: &RowSet, target: &RowSet) -> Result<f64> {
    check_pair(pred, target, "hamming_accuracy")?;
    if let Some(v) = pred
        .as_flat()
        .iter()
        .chain(target.as_flat())
        .find(|&&v| v != 0.0 && v != 1.0)
    {
        return Err(ViganError::invalid(format!(
            "hamming accuracy needs 0/1 values, got {v}"
        )));
    }
    let width = pred.width() as f64;
    let total: f64 = pred
        .iter()
        .zip(target.iter())
        .map(|(p, t)| {
            let same = p.iter().zip(t).filter(|(a, b)| a == b).count();
            same as f64 / width
        })
        .sum();
    Ok(100.0 * total / pred.len() as f64)
}
