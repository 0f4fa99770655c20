//! Self-contained deep Q-learning kernel: a plain MLP with ReLU hidden
//! layers, RMSProp updates on the mean squared temporal-difference error,
//! uniform replay memory and an epsilon-greedy policy.
//!
//! Nothing here knows about radios or clusters; the [`crate::marl`] module
//! wires these pieces to the environment.

mod learn;
mod mlp;
mod replay;

pub use learn::{
    greedy_action, select_action, td_targets, train_step, DqnError, EpsilonSchedule, RmsProp,
    RmsPropHyper,
};
pub use mlp::{Gradients, QNetwork};
pub use replay::{ReplayMemory, Transition};

use serde::{Deserialize, Serialize};

/// Fixed affine observation normalization, `(raw - offset) / scale` per
/// feature. Stored inside checkpoints so a saved policy carries its own
/// input transform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaler {
    pub offsets: Vec<f64>,
    pub scales: Vec<f64>,
}

impl FeatureScaler {
    pub fn identity(dim: usize) -> Self {
        Self { offsets: vec![0.0; dim], scales: vec![1.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.offsets.len()
    }

    pub fn normalize(&self, raw: &[f64]) -> Vec<f64> {
        assert_eq!(raw.len(), self.offsets.len(), "feature dimension mismatch");
        raw.iter()
            .zip(self.offsets.iter().zip(&self.scales))
            .map(|(&x, (&off, &sc))| (x - off) / sc)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_scaler_is_identity() {
        let s = FeatureScaler::identity(3);
        assert_eq!(s.normalize(&[1.0, -2.0, 0.5]), vec![1.0, -2.0, 0.5]);
    }

    #[test]
    fn affine_normalization() {
        let s = FeatureScaler { offsets: vec![-104.0, 0.0], scales: vec![10.0, 2.0] };
        assert_eq!(s.normalize(&[-104.0, 4.0]), vec![0.0, 2.0]);
    }
}
