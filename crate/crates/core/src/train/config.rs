use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr0: f64,
    /// Multiplicative learning-rate decay per epoch.
    pub gamma: f64,
    pub batch: usize,
    pub max_epochs: usize,
    /// Epochs without a strict validation-accuracy improvement before stopping.
    pub patience: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Owned by the run configuration; not read from config files.
    #[serde(skip)]
    pub seed: u64,
    pub augment: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr0: 1e-4,
            gamma: 0.9,
            batch: 16,
            max_epochs: 25,
            patience: 7,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            seed: 42,
            augment: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [("lr0", self.lr0), ("gamma", self.gamma), ("eps", self.eps)];
        if let Some((k, v)) = positive.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::config(format!("{k} must be positive, got {v}")));
        }
        for (k, v) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&v) || v == 0.0 {
                return Err(Error::config(format!("{k} must lie in (0, 1), got {v}")));
            }
        }
        if self.batch == 0 || self.max_epochs == 0 || self.patience == 0 {
            return Err(Error::config("batch, max_epochs and patience must be positive"));
        }
        if self.patience > self.max_epochs {
            return Err(Error::config(format!(
                "patience {} exceeds max_epochs {}",
                self.patience, self.max_epochs
            )));
        }
        Ok(())
    }

    pub fn lr_at(&self, epoch: usize) -> f64 {
        self.lr0 * self.gamma.powi(epoch as i32)
    }
}

/// Learning rate for zero-based `epoch` under the default schedule.
pub fn lr_at(epoch: usize) -> f64 {
    TrainConfig::default().lr_at(epoch)
}
