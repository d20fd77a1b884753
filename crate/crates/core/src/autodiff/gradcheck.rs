//! Central finite-difference verification of analytic gradients.

use std::fmt;

use super::graph::{Graph, Var};
use super::tensor::Tensor;
use crate::error::{Result, ViganError};

/// Finite-difference step used by the built-in checks.
pub const DEFAULT_STEP: f64 = 1e-5;
/// Maximum relative error tolerated by the built-in checks.
pub const DEFAULT_TOLERANCE: f64 = 1e-4;

/// Worst disagreement found for one named input.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamCheck {
    pub name: String,
    pub max_rel_err: f64,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub params: Vec<ParamCheck>,
    pub step: f64,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn max_rel_err(&self) -> f64 {
        self.params
            .iter()
            .map(|p| p.max_rel_err)
            .fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.max_rel_err() < self.tolerance
    }

    pub fn failures(&self) -> impl Iterator<Item = &ParamCheck> {
        self.params
            .iter()
            .filter(|p| p.max_rel_err >= self.tolerance)
    }
}

impl fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed() { "PASS" } else { "FAIL" };
        let cmp = if self.passed() { "<" } else { ">=" };
        write!(
            f,
            "{verdict} max_rel_err={:.3e} {cmp} {:e}",
            self.max_rel_err(),
            self.tolerance
        )
    }
}

/// `|a - n| / max(|a|, |n|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

fn check_step(step: f64) -> Result<()> {
    if !(1e-7..=1e-3).contains(&step) {
        return Err(ViganError::invalid(format!(
            "finite-difference step {step} outside [1e-7, 1e-3]"
        )));
    }
    Ok(())
}

/// Central-difference gradient of a scalar function of several tensors.
pub fn numeric_gradient<F>(f: F, inputs: &[(String, Tensor)], step: f64) -> Result<Vec<Tensor>>
where
    F: Fn(&[Tensor]) -> Result<f64>,
{
    check_step(step)?;
    let mut point: Vec<Tensor> = inputs.iter().map(|(_, t)| t.clone()).collect();
    let mut out = Vec::with_capacity(inputs.len());
    for (k, (name, original)) in inputs.iter().enumerate() {
        let mut grad = vec![0.0; original.len()];
        for (i, g) in grad.iter_mut().enumerate() {
            let x0 = original.data()[i];
            point[k].data_mut()[i] = x0 + step;
            let plus = f(&point)?;
            point[k].data_mut()[i] = x0 - step;
            let minus = f(&point)?;
            point[k].data_mut()[i] = x0;
            *g = (plus - minus) / (2.0 * step);
            if !g.is_finite() {
                return Err(ViganError::NonFinite {
                    param: format!("{name}[{i}]"),
                });
            }
        }
        out.push(Tensor::new(original.shape().to_vec(), grad)?);
    }
    Ok(out)
}

/// Compares analytic gradients against numeric ones, input by input.
pub fn compare_gradients(
    inputs: &[(String, Tensor)],
    analytic: &[Tensor],
    numeric: &[Tensor],
    step: f64,
    tolerance: f64,
) -> Result<GradCheckReport> {
    let mut params = Vec::with_capacity(inputs.len());
    for (((name, _), a), n) in inputs.iter().zip(analytic).zip(numeric) {
        if a.shape() != n.shape() {
            return Err(ViganError::shape("compare_gradients", a.shape(), n.shape()));
        }
        if !a.is_finite() {
            return Err(ViganError::NonFinite {
                param: name.clone(),
            });
        }
        let mut worst = ParamCheck {
            name: name.clone(),
            max_rel_err: 0.0,
            worst_index: 0,
            analytic: 0.0,
            numeric: 0.0,
        };
        for (i, (&av, &nv)) in a.data().iter().zip(n.data()).enumerate() {
            let err = relative_error(av, nv);
            if err > worst.max_rel_err || i == 0 {
                worst.max_rel_err = err;
                worst.worst_index = i;
                worst.analytic = av;
                worst.numeric = nv;
            }
        }
        params.push(worst);
    }
    Ok(GradCheckReport {
        params,
        step,
        tolerance,
    })
}

/// Checks the graph-computed gradient of `f` against central differences.
///
/// `f` receives one parameter leaf per entry of `inputs`, in order, and
/// must return a scalar node. It is re-run on a fresh graph for every
/// perturbed coordinate.
pub fn grad_check<F>(
    f: F,
    inputs: &[(String, Tensor)],
    step: f64,
    tolerance: f64,
) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var>,
{
    check_step(step)?;
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|(_, t)| g.param(t.clone())).collect();
    let loss = f(&mut g, &vars)?;
    g.backward(loss)?;
    let analytic: Vec<Tensor> = vars.iter().map(|&v| g.grad_or_zero(v)).collect();

    let eval = |point: &[Tensor]| -> Result<f64> {
        let mut g = Graph::new();
        let vars: Vec<Var> = point.iter().map(|t| g.constant(t.clone())).collect();
        let loss = f(&mut g, &vars)?;
        g.scalar(loss)
            .ok_or_else(|| ViganError::invalid("grad_check function must return a scalar"))
    };
    let numeric = numeric_gradient(eval, inputs, step)?;
    compare_gradients(inputs, &analytic, &numeric, step, tolerance)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn named(name: &str, t: Tensor) -> (String, Tensor) {
        (name.to_string(), t)
    }

    #[test]
    fn linear_function_is_exact() {
        let inputs = vec![named("x", Tensor::vector(vec![0.3, -1.2, 2.0]).unwrap())];
        let report = grad_check(
            |g, v| {
                let s = g.scale(v[0], 3.0);
                Ok(g.sum(s))
            },
            &inputs,
            DEFAULT_STEP,
            DEFAULT_TOLERANCE,
        )
        .unwrap();
        assert!(report.max_rel_err() < 1e-9, "{report}");
    }

    #[test]
    fn sigmoid_chain_within_tolerance() {
        let inputs = vec![named(
            "x",
            Tensor::vector(vec![0.3, -1.2, 1.7, 0.05]).unwrap(),
        )];
        let report = grad_check(
            |g, v| {
                let a = g.sigmoid(v[0]);
                let b = g.sigmoid(a);
                let c = g.mul(b, a)?;
                Ok(g.sum(c))
            },
            &inputs,
            1e-5,
            1e-6,
        )
        .unwrap();
        assert!(report.passed(), "{report}");
    }

    #[test]
    fn wrong_analytic_gradient_is_flagged() {
        // f(x) = sum(x^2); supply 2x the true gradient.
        let x = Tensor::vector(vec![0.5, -1.5, 1.0]).unwrap();
        let inputs = vec![named("x", x.clone())];
        let wrong = Tensor::vector(x.data().iter().map(|v| 4.0 * v).collect()).unwrap();
        let numeric = numeric_gradient(
            |p| Ok(p[0].data().iter().map(|v| v * v).sum()),
            &inputs,
            DEFAULT_STEP,
        )
        .unwrap();
        let report =
            compare_gradients(&inputs, &[wrong], &numeric, DEFAULT_STEP, DEFAULT_TOLERANCE)
                .unwrap();
        assert!((report.max_rel_err() - 0.5).abs() < 1e-6);
        assert!(!report.passed());
        assert_eq!(report.failures().count(), 1);
    }

    #[test]
    fn step_out_of_range_rejected() {
        let inputs = vec![named("x", Tensor::scalar(1.0))];
        assert!(grad_check(|_, v| Ok(v[0]), &inputs, 1e-2, 1e-4).is_err());
    }

    #[test]
    fn non_finite_names_parameter() {
        let inputs = vec![named("weights", Tensor::scalar(1.0))];
        let err = numeric_gradient(|_| Ok(f64::NAN), &inputs, 1e-5).unwrap_err();
        assert!(err.to_string().contains("weights"));
    }
}
