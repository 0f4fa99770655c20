//! Per-agent observation vector: direct channel gains, last-slot
//! interference, payload and time budgets, plus the training progress
//! features.

use crate::dqn::FeatureScaler;
use crate::env::FactoryEnv;
use crate::units::{linear_to_db, mw_to_dbm};

/// Raw (un-normalized) state vector of one agent. Layout:
///
/// - `[0, K)`    composite gain (dB) of each AP link on the agent's
///   last-used sub-band (sub-band 0 on the first slot),
/// - `[K, K+M)`  interference plus noise (dBm) measured at the agent last
///   slot per sub-band (the noise floor on the first slot),
/// - `K+M`       remaining payload as a fraction of the initial payload,
///   clamped below at -1,
/// - `K+M+1`     remaining Phase-I time as a fraction,
/// - `K+M+2`     training episode fraction,
/// - `K+M+3`     current exploration probability.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentObservation {
    pub features: Vec<f64>,
}

impl AgentObservation {
    pub fn dim_for(num_aps: usize, num_subbands: usize) -> usize {
        num_aps + num_subbands + 4
    }
}

/// Builds the raw observation of `agent` from the environment's current
/// state. `episode_fraction` and `epsilon` are supplied by the caller: the
/// annealed values during training, fixed constants at test time.
pub fn encode_observation(
    env: &FactoryEnv,
    agent: usize,
    episode_fraction: f64,
    epsilon: f64,
) -> AgentObservation {
    let topo = env.topology();
    let mut features = Vec::with_capacity(AgentObservation::dim_for(
        topo.num_aps(),
        topo.num_subbands,
    ));
    let band = env.last_subband(agent);
    for k in 0..topo.num_aps() {
        features.push(linear_to_db(env.ap_gain(k, agent).composite(band)));
    }
    for &inm in env.prev_interference_mw(agent) {
        features.push(mw_to_dbm(inm));
    }
    let initial = env.ledger().leader_initial_bits();
    let payload_fraction = if initial > 0.0 {
        (env.ledger().leader_remaining_bits(agent) / initial).max(-1.0)
    } else {
        0.0
    };
    features.push(payload_fraction);
    let slots = env.params().phase1_slots;
    features.push((slots.saturating_sub(env.slot())) as f64 / slots as f64);
    features.push(episode_fraction);
    features.push(epsilon);
    AgentObservation { features }
}

/// The fixed normalization recorded in checkpoints: channel features are
/// centered on typical dB ranges for the factory floor. The payload feature
/// is amplified so the network can tell "a sliver left" from "done" (one
/// good slot often leaves only a couple percent of the payload).
pub fn default_scaler(num_aps: usize, num_subbands: usize) -> FeatureScaler {
    let mut offsets = Vec::new();
    let mut scales = Vec::new();
    for _ in 0..num_aps {
        offsets.push(-75.0);
        scales.push(35.0);
    }
    for _ in 0..num_subbands {
        offsets.push(-70.0);
        scales.push(35.0);
    }
    // remaining payload, remaining time, episode fraction, epsilon
    offsets.extend([0.0, 0.0, 0.0, 0.0]);
    scales.extend([0.1, 1.0, 1.0, 1.0]);
    FeatureScaler { offsets, scales }
}
