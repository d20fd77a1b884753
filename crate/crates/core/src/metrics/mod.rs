//! Scores, comparison imputers and evaluation reports.

mod imputers;
mod report;
mod scores;
pub mod softimpute;

pub use imputers::{Imputer, MeanImputer, ModelImputer, SoftImputeImputer};
pub use report::{evaluate, evaluate_both, EvalReport, EvalRow, METRIC_ACCURACY, METRIC_RMSE};
pub use scores::{hamming_accuracy, rmse};
pub use softimpute::{soft_impute, Matrix, SoftImputeConfig, SoftImputeResult};
