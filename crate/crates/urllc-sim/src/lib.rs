//! Link-level simulator for downlink URLLC in a factory floor populated by
//! clustered mobile robots, together with a self-contained multi-agent deep
//! Q-learning allocator and a set of baseline policies.
//!
//! The crate is organized around the two-phase delivery protocol:
//!
//! - [`channel`] computes propagation quantities (path loss, shadowing,
//!   Rayleigh fading, noise) from reproducible seeded streams.
//! - [`env`] owns the floor topology, cluster mobility, payload ledgers and
//!   the per-slot SINR/rate bookkeeping for both phases.
//! - [`dqn`] is a from-scratch deep Q-learning kernel (MLP, RMSProp, replay
//!   memory, epsilon-greedy policy).
//! - [`marl`] binds the two: observation encoding, the discrete action codec
//!   over (AP subset, sub-band, power), the common reward, and the training
//!   and evaluation loops.
//! - [`baselines`] implements the hand-crafted comparison policies behind the
//!   same policy interface as the learned ones.
//! - [`config`] and [`checkpoint`] define the on-disk formats; both parsers
//!   accept untrusted input and are fuzzed (see `fuzz/`).

pub mod baselines;
pub mod channel;
pub mod checkpoint;
pub mod config;
pub mod dqn;
pub mod env;
pub mod marl;
pub mod metrics;
pub mod rng;
pub mod selfcheck;
pub mod units;

pub use config::ExperimentConfig;
pub use env::FactoryEnv;



