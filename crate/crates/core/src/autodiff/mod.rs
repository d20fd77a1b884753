//! Reverse-mode automatic differentiation over dense `f64` arrays.

mod gradcheck;
mod graph;
mod tensor;

pub use gradcheck::{
    compare_gradients, grad_check, numeric_gradient, relative_error, GradCheckReport, ParamCheck,
    DEFAULT_STEP, DEFAULT_TOLERANCE,
};
pub use graph::{Graph, Var, LOG_EPS};
pub use tensor::Tensor;
