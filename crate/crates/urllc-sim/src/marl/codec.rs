//! Bijective codec between flat action indices and
//! (AP subset, sub-band, power level) triples.
//!
//! Index layout is subset-major: `index = subset·(M·P) + subband·P + power`,
//! with subsets ordered as all singletons followed by all pairs in
//! lexicographic order.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{ApSet, LeaderAction};

#[derive(Debug, Error, PartialEq)]
pub enum CodecError {
    #[error("action index {index} out of range (action space has {size} entries)")]
    IndexOutOfRange { index: usize, size: usize },
    #[error("sub-band {0} out of range")]
    SubbandOutOfRange(usize),
    #[error("power level {0} dBm is not one of the configured levels")]
    UnknownPowerLevel(f64),
    #[error("AP subset not representable in this codec: {0}")]
    UnknownSubset(String),
    #[error("invalid codec parameters: {0}")]
    InvalidParams(&'static str),
}

/// Whether leaders may pick two APs or only one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Connectivity {
    Single,
    Dual,
}

/// Enumerates the legal discrete actions for one agent.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionCodec {
    num_aps: usize,
    num_subbands: usize,
    power_levels_dbm: Vec<f64>,
    connectivity: Connectivity,
    subsets: Vec<ApSet>,
}

impl ActionCodec {
    pub fn new(
        num_aps: usize,
        num_subbands: usize,
        power_levels_dbm: Vec<f64>,
        connectivity: Connectivity,
    ) -> Result<Self, CodecError> {
        if num_aps == 0 {
            return Err(CodecError::InvalidParams("no APs"));
        }
        if num_subbands == 0 {
            return Err(CodecError::InvalidParams("no sub-bands"));
        }
        if power_levels_dbm.is_empty() {
            return Err(CodecError::InvalidParams("no power levels"));
        }
        let mut subsets: Vec<ApSet> = (0..num_aps).map(ApSet::single).collect();
        if connectivity == Connectivity::Dual {
            for a in 0..num_aps {
                for b in a + 1..num_aps {
                    subsets.push(ApSet::pair(a, b));
                }
            }
        }
        Ok(Self { num_aps, num_subbands, power_levels_dbm, connectivity, subsets })
    }

    pub fn num_aps(&self) -> usize {
        self.num_aps
    }

    pub fn num_subbands(&self) -> usize {
        self.num_subbands
    }

    pub fn power_levels_dbm(&self) -> &[f64] {
        &self.power_levels_dbm
    }

    pub fn connectivity(&self) -> Connectivity {
        self.connectivity
    }

    pub fn subsets(&self) -> &[ApSet] {
        &self.subsets
    }

    pub fn num_actions(&self) -> usize {
        self.subsets.len() * self.num_subbands * self.power_levels_dbm.len()
    }

    pub fn decode(&self, index: usize) -> Result<LeaderAction, CodecError> {
        let size = self.num_actions();
        if index >= size {
            return Err(CodecError::IndexOutOfRange { index, size });
        }
        let p = self.power_levels_dbm.len();
        let per_subset = self.num_subbands * p;
        let subset = index / per_subset;
        let rem = index % per_subset;
        Ok(LeaderAction {
            ap_set: self.subsets[subset],
            subband: rem / p,
            power_dbm: self.power_levels_dbm[rem % p],
        })
    }

    pub fn encode(&self, action: &LeaderAction) -> Result<usize, CodecError> {
        if action.subband >= self.num_subbands {
            return Err(CodecError::SubbandOutOfRange(action.subband));
        }
        let subset = self
            .subsets
            .iter()
            .position(|s| *s == action.ap_set)
            .ok_or_else(|| CodecError::UnknownSubset(format!("{:?}", action.ap_set)))?;
        let power = self
            .power_levels_dbm
            .iter()
            .position(|&lvl| lvl == action.power_dbm)
            .ok_or(CodecError::UnknownPowerLevel(action.power_dbm))?;
        let p = self.power_levels_dbm.len();
        Ok(subset * self.num_subbands * p + action.subband * p + power)
    }
}
