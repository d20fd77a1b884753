use serde::{Deserialize, Serialize};

use crate::data::UnpairedPool;
use crate::error::{Result, ViganError};
use crate::model::{GeneratorLoss, LossWeights};
use crate::nn::AdamConfig;

/// Settings for the three-stage schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Iterations for stages 1, 2 and 3.
    pub iterations: [usize; 3],
    pub batch_paired: usize,
    pub batch_unpaired: usize,
    pub weights: LossWeights,
    pub adam: AdamConfig,
    pub seed: u64,
    /// Enabled stage ids; always executed in ascending order.
    pub stages: Vec<u8>,
    pub generator_loss: GeneratorLoss,
    /// Restrict stage-3 adversarial and cycle batches to paired rows.
    pub stage3_paired_only: bool,
    /// Progress is reported through `log` every this many iterations
    /// (0 disables it). The returned log always has every iteration.
    pub log_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            iterations: [2000, 5000, 5000],
            batch_paired: 64,
            batch_unpaired: 64,
            weights: LossWeights::default(),
            adam: AdamConfig::default(),
            seed: 0,
            stages: vec![1, 2, 3],
            generator_loss: GeneratorLoss::default(),
            stage3_paired_only: false,
            log_every: 500,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_paired == 0 || self.batch_unpaired == 0 {
            return Err(ViganError::invalid("batch sizes must be at least 1"));
        }
        if let Some(s) = self.stages.iter().find(|s| !(1..=3).contains(*s)) {
            return Err(ViganError::invalid(format!(
                "unknown stage {s}; stages are 1, 2, 3"
            )));
        }
        self.weights.validate()?;
        let a = &self.adam;
        let ok = a.learning_rate.is_finite()
            && a.learning_rate > 0.0
            && (0.0..1.0).contains(&a.beta1)
            && (0.0..1.0).contains(&a.beta2)
            && a.epsilon.is_finite()
            && a.epsilon > 0.0;
        if !ok {
            return Err(ViganError::invalid(format!(
                "invalid optimizer settings {a:?}"
            )));
        }
        Ok(())
    }

    pub fn stage_enabled(&self, stage: u8) -> bool {
        self.stages.contains(&stage)
    }

    pub(crate) fn stage3_pool(&self) -> UnpairedPool {
        if self.stage3_paired_only {
            UnpairedPool::PairedOnly
        } else {
            UnpairedPool::All
        }
    }

    /// Seed for the batch sampler of one stage.
    pub fn stage_seed(&self, stage: u8) -> u64 {
        self.seed
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(stage as u64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        TrainConfig::default().validate().unwrap();
        assert_eq!(TrainConfig::default().adam.learning_rate, 2e-4);
    }

    #[test]
    fn bad_values_rejected() {
        let mut c = TrainConfig {
            batch_paired: 0,
            ..Default::default()
        };
        assert!(c.validate().is_err());
        c.batch_paired = 4;
        c.stages = vec![1, 4];
        assert!(c.validate().is_err());
        c.stages = vec![2];
        c.adam.beta1 = 1.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn partial_json_fills_defaults() {
        let c: TrainConfig =
            serde_json::from_str(r#"{"seed": 7, "adam": {"learning_rate": 0.001}}"#).unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.adam.learning_rate, 1e-3);
        assert_eq!(c.adam.beta1, 0.5);
        assert_eq!(c.iterations, [2000, 5000, 5000]);
        assert!(serde_json::from_str::<TrainConfig>(r#"{"sead": 7}"#).is_err());
    }
}
