//! Optimization settings.

use serde::{Deserialize, Serialize};

use crate::data::{AugmentConfig, Regime};
use crate::error::{Error, Result};

/// Epochs after which the step schedule divides the rate by ten.
pub const STEP_MILESTONES: [usize; 2] = [60, 85];
pub const STEP_GAMMA: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    #[default]
    Sgd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LrSchedule {
    #[default]
    Constant,
    Step,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    #[serde(default = "defaults::epochs")]
    pub epochs: usize,
    #[serde(default = "defaults::lr")]
    pub lr: f64,
    #[serde(default = "defaults::momentum")]
    pub momentum: f64,
    #[serde(default = "defaults::batch_size")]
    pub batch_size: usize,
    pub seed: u64,
    #[serde(default)]
    pub optimizer: Optimizer,
    /// Overrides the variant's default augmentation regime.
    #[serde(default)]
    pub regime: Option<Regime>,
    #[serde(default)]
    pub augment: AugmentConfig,
    #[serde(default = "defaults::trainable_backbone")]
    pub trainable_backbone: bool,
    #[serde(default)]
    pub lr_schedule: LrSchedule,
    #[serde(default)]
    pub weight_decay: f64,
    /// Decode/augment threads per batch.
    #[serde(default = "defaults::workers")]
    pub workers: usize,
}

mod defaults {
    pub fn epochs() -> usize {
        100
    }
    pub fn lr() -> f64 {
        0.001
    }
    pub fn momentum() -> f64 {
        0.9
    }
    pub fn batch_size() -> usize {
        32
    }
    pub fn trainable_backbone() -> bool {
        true
    }
    pub fn workers() -> usize {
        1
    }
}

impl TrainConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            epochs: defaults::epochs(),
            lr: defaults::lr(),
            momentum: defaults::momentum(),
            batch_size: defaults::batch_size(),
            seed,
            optimizer: Optimizer::Sgd,
            regime: None,
            augment: AugmentConfig::default(),
            trainable_backbone: true,
            lr_schedule: LrSchedule::Constant,
            weight_decay: 0.0,
            workers: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        // lr = 0 is allowed: it is a useful no-op run.
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("learning rate {} must be finite and non-negative", self.lr)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!("momentum {} outside [0, 1)", self.momentum)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::Config("weight decay must be non-negative".into()));
        }
        self.augment.validate()
    }

    /// Learning rate for 1-based `epoch`.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        match self.lr_schedule {
            LrSchedule::Constant => self.lr,
            LrSchedule::Step => {
                let passed = STEP_MILESTONES.iter().filter(|&&m| epoch > m).count();
                self.lr * STEP_GAMMA.powi(passed as i32)
            }
        }
    }

    /// Augmentation for training, with the regime resolved.
    pub fn augment_for(&self, default_regime: Regime) -> AugmentConfig {
        AugmentConfig {
            regime: self.regime.unwrap_or(default_regime),
            ..self.augment
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_schedule() {
        let mut c = TrainConfig::new(0);
        c.lr_schedule = LrSchedule::Step;
        assert_eq!(c.lr_at(60), 0.001);
        assert!((c.lr_at(61) - 1e-4).abs() < 1e-18);
        assert!((c.lr_at(86) - 1e-5).abs() < 1e-18);
    }

    #[test]
    fn defaults_from_minimal_json() {
        let c: TrainConfig = serde_json::from_str(r#"{"seed": 3}"#).unwrap();
        assert_eq!(c, TrainConfig::new(3));
        assert!(serde_json::from_str::<TrainConfig>("{}").is_err());
    }
}
