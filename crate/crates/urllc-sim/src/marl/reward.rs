//! The cooperative common reward: each leader contributes its rate in Mbps
//! until its payload is complete, then a fixed bonus; every agent receives
//! the same sum.

use serde::{Deserialize, Serialize};

use crate::env::SlotOutcome;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    /// Per-slot bonus for a leader whose payload is already delivered.
    pub completion_bonus: f64,
    /// Divisor turning bit/s into reward units (1e6 for Mbps).
    pub rate_unit: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self { completion_bonus: 40.0, rate_unit: 1e6 }
    }
}

/// Sum over leaders of rate-or-bonus. `completed[n]` holds whether leader
/// `n` has delivered its payload as of the end of this slot, so the slot
/// that completes a delivery already pays the bonus.
pub fn common_reward(config: &RewardConfig, outcome: &SlotOutcome, completed: &[bool]) -> f64 {
    outcome
        .rate_bps
        .iter()
        .zip(completed)
        .map(|(&rate, &done)| if done { config.completion_bonus } else { rate / config.rate_unit })
        .sum()
}
