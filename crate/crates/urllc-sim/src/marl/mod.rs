//! Multi-agent deep Q-learning on top of the factory environment: state
//! encoding, the discrete action codec, the cooperative common reward, and
//! the training and evaluation loops.

mod codec;
mod eval;
mod obs;
mod reward;
mod train;

pub use codec::{ActionCodec, CodecError, Connectivity};
pub use eval::{evaluate, EvalSpec, EvalSummary};
pub use obs::{default_scaler, encode_observation, AgentObservation};
pub use reward::{common_reward, RewardConfig};
pub use train::{train, TrainResult, TrainSpec};

use thiserror::Error;

use crate::baselines::PolicyError;
use crate::env::EnvError;

#[derive(Debug, Error)]
pub enum MarlError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("training diverged at episode {episode}, agent {agent}: loss {loss}")]
    Diverged { episode: usize, agent: usize, loss: f64 },
    #[error("invalid training setup: {0}")]
    InvalidSpec(String),
}
