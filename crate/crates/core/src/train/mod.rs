//! Masked node pretraining and the AdamW optimizer.

mod adamw;
mod masked;

use serde::{Deserialize, Serialize};

pub use adamw::{adamw_step, AdamState, AdamWConfig};
pub use masked::{
    eval_masked_loss, mask_for_kind, maskable_kinds, masked_loss, masked_loss_and_grad, pretrain,
    sample_mask, MaskPlan, StepLog,
};

use crate::gnn::{GnnDims, GnnError};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum TrainError {
    #[error("graph has no maskable nodes")]
    EmptyGraph,
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Gnn(#[from] GnnError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub mask_rate: f64,
    pub seed: u64,
    /// Overrides `epochs`: run exactly this many optimizer steps.
    pub steps: Option<usize>,
    pub dims: GnnDims,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let a = AdamWConfig::default();
        TrainConfig {
            learning_rate: a.lr,
            beta1: a.beta1,
            beta2: a.beta2,
            eps: a.eps,
            weight_decay: a.weight_decay,
            epochs: 1,
            batch_size: 8,
            mask_rate: 0.15,
            seed: 0,
            steps: None,
            dims: GnnDims::default(),
        }
    }
}

impl TrainConfig {
    pub fn check(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.into()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.mask_rate > 0.0 && self.mask_rate <= 1.0) {
            return bad("mask_rate must be in (0, 1]");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("betas must be in [0, 1)");
        }
        if self.dims.h1 == 0 || self.dims.h2 == 0 || self.dims.embed == 0 {
            return bad("dims must be positive");
        }
        Ok(())
    }

    pub fn adamw(&self) -> AdamWConfig {
        AdamWConfig {
            lr: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
            weight_decay: self.weight_decay,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_and_checks() {
        let c: TrainConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(c, TrainConfig::default());
        assert_eq!(c.learning_rate, 1e-4);
        assert_eq!(c.mask_rate, 0.15);
        assert!(c.check().is_ok());
        for bad in [
            r#"{"mask_rate":0}"#,
            r#"{"mask_rate":1.5}"#,
            r#"{"learning_rate":-1}"#,
        ] {
            let c: TrainConfig = serde_json::from_str(bad).unwrap();
            assert!(matches!(c.check(), Err(TrainError::InvalidConfig(_))), "{bad}");
        }
        assert!(serde_json::from_str::<TrainConfig>(r#"{"lr":1}"#).is_err());
    }
}
