use serde::{Deserialize, Serialize};

use super::adamw::AdamWConfig;
use crate::error::{Error, Result};
use crate::losses::LossWeights;
use crate::textproc::PerturbationKind;

/// Optimization settings shared by every training loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub steps: usize,
    pub seed: u64,
    /// Event probability of every token-level perturbation.
    pub p: f64,
    pub kinds: Vec<PerturbationKind>,
    pub weights: LossWeights,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let opt = AdamWConfig::default();
        Self {
            lr: opt.lr,
            beta1: opt.beta1,
            beta2: opt.beta2,
            eps: opt.eps,
            weight_decay: opt.weight_decay,
            batch_size: 32,
            steps: 1000,
            seed: 0,
            p: 0.4,
            kinds: PerturbationKind::ALL.to_vec(),
            weights: LossWeights::default(),
        }
    }
}

impl TrainConfig {
    pub fn optimizer(&self) -> AdamWConfig {
        AdamWConfig {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
            weight_decay: self.weight_decay,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.optimizer().validate()?;
        self.weights.validate()?;
        if self.batch_size == 0 {
            return Err(Error::ShapeMismatch("batch size must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::ShapeMismatch(format!(
                "perturbation probability {} outside [0, 1]",
                self.p
            )));
        }
        if self.kinds.is_empty() {
            return Err(Error::ShapeMismatch(
                "at least one perturbation kind must be enabled".into(),
            ));
        }
        Ok(())
    }
}
