use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::error::{Result, ViganError};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 2e-4,
            beta1: 0.5,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Adam with bias-corrected moment estimates.
#[derive(Clone, Debug)]
pub struct AdamState {
    config: AdamConfig,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: u64,
}

impl AdamState {
    /// Zeroed moments mirroring `params`.
    pub fn new(config: AdamConfig, params: &[&Tensor]) -> Self {
        let zeros = || {
            params
                .iter()
                .map(|p| vec![0.0; p.len()])
                .collect::<Vec<_>>()
        };
        AdamState {
            config,
            m: zeros(),
            v: zeros(),
            t: 0,
        }
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// One update `θ ← θ − lr·m̂/(√v̂+ε)` for every parameter.
    ///
    /// Gradients are validated before anything is modified, so a non-finite
    /// gradient leaves both parameters and moments untouched.
    pub fn step(
        &mut self,
        params: &mut [&mut Tensor],
        grads: &[Tensor],
        names: &[String],
    ) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != params.len() {
            return Err(ViganError::invalid(format!(
                "adam expected {} parameters, got {} params / {} grads",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.shape() != g.shape() || g.len() != self.m[i].len() {
                return Err(ViganError::shape("adam step", p.shape(), g.shape()));
            }
            if !g.is_finite() {
                let param = names.get(i).cloned().unwrap_or_else(|| format!("param{i}"));
                return Err(ViganError::NonFinite { param });
            }
        }

        self.t += 1;
        let AdamConfig {
            learning_rate: lr,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let c1 = 1.0 - beta1.powi(self.t as i32);
        let c2 = 1.0 - beta2.powi(self.t as i32);
        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            for (((theta, &gi), mi), vi) in p.data_mut().iter_mut().zip(g.data()).zip(m).zip(v) {
                *mi = beta1 * *mi + (1.0 - beta1) * gi;
                *vi = beta2 * *vi + (1.0 - beta2) * gi * gi;
                let m_hat = *mi / c1;
                let v_hat = *vi / c2;
                *theta -= lr * m_hat / (v_hat.sqrt() + epsilon);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("p{i}")).collect()
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = Tensor::vector(vec![0.3, -0.7]).unwrap();
        let before = p.clone();
        let mut adam = AdamState::new(AdamConfig::default(), &[&p]);
        let g = Tensor::vector(vec![0.0, 0.0]).unwrap();
        for _ in 0..5 {
            adam.step(&mut [&mut p], std::slice::from_ref(&g), &names(1))
                .unwrap();
        }
        assert_eq!(p, before);
        assert_eq!(adam.steps(), 5);
    }

    #[test]
    fn first_step_is_learning_rate_sized() {
        let cfg = AdamConfig::default();
        for g in [1e-3, 1.0, 1e3, -5.0] {
            let mut p = Tensor::scalar(0.0);
            let mut adam = AdamState::new(cfg, &[&p]);
            adam.step(&mut [&mut p], &[Tensor::scalar(g)], &names(1))
                .unwrap();
            let expected = cfg.learning_rate * g.abs() / (g.abs() + cfg.epsilon);
            let moved = p.data()[0].abs();
            assert!(
                (moved - expected).abs() <= 1e-12 * expected.max(1.0),
                "g={g}"
            );
            assert!(p.data()[0] * g < 0.0);
        }
    }

    #[test]
    fn quadratic_descent_converges() {
        let cfg = AdamConfig {
            learning_rate: 0.1,
            ..AdamConfig::default()
        };
        let mut theta = Tensor::scalar(1.0);
        let mut adam = AdamState::new(cfg, &[&theta]);
        for _ in 0..200 {
            let g = Tensor::scalar(2.0 * theta.data()[0]);
            adam.step(&mut [&mut theta], &[g], &names(1)).unwrap();
        }
        assert!(theta.data()[0].abs() < 0.05, "theta = {}", theta.data()[0]);
    }

    #[test]
    fn non_finite_gradient_names_param_and_aborts() {
        let mut p = Tensor::scalar(1.0);
        let mut adam = AdamState::new(AdamConfig::default(), &[&p]);
        let err = adam
            .step(
                &mut [&mut p],
                &[Tensor::scalar(f64::NAN)],
                &["d_x.0.weight".to_string()],
            )
            .unwrap_err();
        assert!(err.to_string().contains("d_x.0.weight"));
        assert_eq!(p.data()[0], 1.0);
        assert_eq!(adam.steps(), 0);
    }

    /// Worst-case |m̂|/√v̂ after `t` steps: √(Σ wᵢ²/uᵢ) by Cauchy–Schwarz,
    /// with wᵢ, uᵢ the bias-corrected moment weights of gradient i.
    fn step_ratio_bound(cfg: &AdamConfig, t: usize) -> f64 {
        let c1 = 1.0 - cfg.beta1.powi(t as i32);
        let c2 = 1.0 - cfg.beta2.powi(t as i32);
        (1..=t)
            .map(|i| {
                let w = (1.0 - cfg.beta1) * cfg.beta1.powi((t - i) as i32) / c1;
                let u = (1.0 - cfg.beta2) * cfg.beta2.powi((t - i) as i32) / c2;
                w * w / u
            })
            .sum::<f64>()
            .sqrt()
    }

    proptest! {
        #[test]
        fn constant_gradient_steps_bounded_by_lr(g in prop_oneof![-1e3..-1e-3f64, 1e-3..1e3f64], steps in 1usize..40) {
            let cfg = AdamConfig::default();
            let mut p = Tensor::scalar(0.0);
            let mut adam = AdamState::new(cfg, &[&p]);
            for _ in 0..steps {
                let before = p.data()[0];
                adam.step(&mut [&mut p], &[Tensor::scalar(g)], &names(1)).unwrap();
                let moved = (p.data()[0] - before).abs();
                prop_assert!(moved <= cfg.learning_rate * (1.0 + 1e-3));
            }
        }

        #[test]
        fn arbitrary_gradient_steps_within_moment_bound(grads in prop::collection::vec(-10.0..10.0f64, 1..30)) {
            let cfg = AdamConfig::default();
            let mut p = Tensor::scalar(0.0);
            let mut adam = AdamState::new(cfg, &[&p]);
            for (t, g) in grads.iter().enumerate() {
                let before = p.data()[0];
                adam.step(&mut [&mut p], &[Tensor::scalar(*g)], &names(1)).unwrap();
                let moved = (p.data()[0] - before).abs();
                prop_assert!(moved <= cfg.learning_rate * step_ratio_bound(&cfg, t + 1) * (1.0 + 1e-9));
            }
        }
    }
}
