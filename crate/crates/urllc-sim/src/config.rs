//! Experiment configuration: a single TOML file whose defaults reproduce
//! the reference factory setup, with dotted-path overrides
//! (`--rl.episodes=10`) applied on top before validation.
//!
//! Every run freezes its resolved config next to its outputs; the SHA-256
//! of that canonical serialization identifies the run.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::channel::{NoiseModel, PathLossParams, ShadowingParams};
use crate::env::{EnvParams, Position, Topology};
use crate::marl::{ActionCodec, Connectivity, EvalSpec, RewardConfig, TrainSpec};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("override '{0}' is not of the form path.to.key=value")]
    MalformedOverride(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn default_floor() -> (f64, f64) {
    (40.0, 40.0)
}

fn default_ap_positions() -> Vec<(f64, f64)> {
    vec![(10.0, 10.0), (10.0, 30.0), (30.0, 10.0), (30.0, 30.0)]
}

fn default_clusters() -> usize {
    4
}

fn default_members() -> usize {
    4
}

fn default_member_distance() -> f64 {
    3.0
}

fn default_speed() -> f64 {
    1.0
}

fn default_episode_spacing() -> f64 {
    1.0
}

/// Floor layout block; defaults are the 40x40 m floor with a 4-AP grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyConfig {
    #[serde(default = "default_floor")]
    pub floor_m: (f64, f64),
    #[serde(default = "default_ap_positions")]
    pub ap_positions: Vec<(f64, f64)>,
    #[serde(default = "default_clusters")]
    pub num_clusters: usize,
    #[serde(default = "default_members")]
    pub members_per_cluster: usize,
    /// Defaults to `num_clusters / 2` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_subbands: Option<usize>,
    #[serde(default = "default_member_distance")]
    pub max_member_distance_m: f64,
    #[serde(default = "default_speed")]
    pub speed_mps: f64,
    /// Wall-clock spacing between successive episodes along the robot
    /// trajectories; one mobility step covers `speed_mps x` this.
    #[serde(default = "default_episode_spacing")]
    pub episode_spacing_s: f64,
    /// Explicit per-episode mobility step in meters, overriding the
    /// spacing-derived default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mobility_step_m: Option<f64>,
    /// Permits sub-band counts other than `num_clusters / 2`.
    #[serde(default)]
    pub allow_subband_mismatch: bool,
}

impl Default for TopologyConfig {
    fn default() -> Self {
        Self {
            floor_m: default_floor(),
            ap_positions: default_ap_positions(),
            num_clusters: default_clusters(),
            members_per_cluster: default_members(),
            num_subbands: None,
            max_member_distance_m: default_member_distance(),
            speed_mps: default_speed(),
            episode_spacing_s: default_episode_spacing(),
            mobility_step_m: None,
            allow_subband_mismatch: false,
        }
    }
}

fn default_carrier() -> f64 {
    3.0
}

fn default_bandwidth() -> f64 {
    1e6
}

fn default_pl_a() -> f64 {
    18.7
}

fn default_pl_b() -> f64 {
    46.8
}

fn default_pl_c() -> f64 {
    20.0
}

fn default_min_distance() -> f64 {
    1.0
}

fn default_shadowing() -> f64 {
    3.0
}

fn default_noise_psd() -> f64 {
    -169.0
}

fn default_noise_figure() -> f64 {
    5.0
}

/// Propagation block: indoor line-of-sight path loss, log-normal shadowing,
/// receiver noise. The same coefficients apply to AP and D2D links.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    #[serde(default = "default_carrier")]
    pub carrier_ghz: f64,
    #[serde(default = "default_bandwidth")]
    pub bandwidth_hz: f64,
    #[serde(default = "default_pl_a")]
    pub path_loss_a: f64,
    #[serde(default = "default_pl_b")]
    pub path_loss_b: f64,
    #[serde(default = "default_pl_c")]
    pub path_loss_c: f64,
    #[serde(default = "default_min_distance")]
    pub min_distance_m: f64,
    #[serde(default = "default_shadowing")]
    pub shadowing_std_db: f64,
    #[serde(default = "default_noise_psd")]
    pub noise_psd_dbm_per_hz: f64,
    #[serde(default = "default_noise_figure")]
    pub noise_figure_db: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            carrier_ghz: default_carrier(),
            bandwidth_hz: default_bandwidth(),
            path_loss_a: default_pl_a(),
            path_loss_b: default_pl_b(),
            path_loss_c: default_pl_c(),
            min_distance_m: default_min_distance(),
            shadowing_std_db: default_shadowing(),
            noise_psd_dbm_per_hz: default_noise_psd(),
            noise_figure_db: default_noise_figure(),
        }
    }
}

fn default_latency_ms() -> f64 {
    1.0
}

fn default_phase1_ms() -> f64 {
    0.667
}

fn default_phase2_ms() -> f64 {
    0.333
}

fn default_slot_ms() -> f64 {
    1.0 / 6.0
}

/// Timing block: the 1 ms budget split into six slots, two thirds for
/// Phase I.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimingConfig {
    #[serde(default = "default_latency_ms")]
    pub latency_ms: f64,
    #[serde(default = "default_phase1_ms")]
    pub phase1_ms: f64,
    #[serde(default = "default_phase2_ms")]
    pub phase2_ms: f64,
    #[serde(default = "default_slot_ms")]
    pub slot_ms: f64,
}

impl Default for TimingConfig {
    fn default() -> Self {
        Self {
            latency_ms: default_latency_ms(),
            phase1_ms: default_phase1_ms(),
            phase2_ms: default_phase2_ms(),
            slot_ms: default_slot_ms(),
        }
    }
}

impl TimingConfig {
    pub fn phase1_slots(&self) -> usize {
        (self.phase1_ms / self.slot_ms).round() as usize
    }

    pub fn phase2_slots(&self) -> usize {
        (self.phase2_ms / self.slot_ms).round() as usize
    }

    pub fn slot_duration_s(&self) -> f64 {
        self.slot_ms * 1e-3
    }
}

/// Payload sizes: either one value or a sweep list, in bytes per robot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PayloadSpec {
    One(f64),
    Sweep(Vec<f64>),
}

impl PayloadSpec {
    pub fn values(&self) -> Vec<f64> {
        match self {
            PayloadSpec::One(v) => vec![*v],
            PayloadSpec::Sweep(v) => v.clone(),
        }
    }
}

fn default_payload_bytes() -> PayloadSpec {
    PayloadSpec::Sweep(vec![20.0, 40.0, 60.0, 80.0, 100.0])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PayloadConfig {
    /// Payload sizes evaluated by `eval` and `baseline`.
    #[serde(default = "default_payload_bytes")]
    pub bytes: PayloadSpec,
}

impl Default for PayloadConfig {
    fn default() -> Self {
        Self { bytes: default_payload_bytes() }
    }
}

fn default_episodes() -> usize {
    6000
}

fn default_lr() -> f64 {
    0.001
}

fn default_gamma() -> f64 {
    0.9
}

fn default_eps_start() -> f64 {
    1.0
}

fn default_eps_end() -> f64 {
    0.02
}

fn default_anneal() -> f64 {
    0.8
}

fn default_replay() -> usize {
    4000
}

fn default_batch() -> usize {
    256
}

fn default_target_sync() -> usize {
    50
}

fn default_hidden() -> Vec<usize> {
    vec![83, 41, 20]
}

fn default_bonus() -> f64 {
    40.0
}

fn default_train_payload() -> f64 {
    100.0
}

fn default_eval_episodes() -> usize {
    1000
}

fn default_rms_decay() -> f64 {
    0.9
}

fn default_rms_epsilon() -> f64 {
    1e-8
}

fn default_connectivity() -> Connectivity {
    Connectivity::Dual
}

fn default_test_episode_feature() -> f64 {
    1.0
}

fn default_test_epsilon_feature() -> f64 {
    0.02
}

fn default_optimistic_init_q() -> f64 {
    300.0
}

/// Learning block. The episode length defaults to the Phase-I slot count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RlConfig {
    #[serde(default = "default_episodes")]
    pub episodes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub episode_slots: Option<usize>,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_eps_start")]
    pub eps_start: f64,
    #[serde(default = "default_eps_end")]
    pub eps_end: f64,
    #[serde(default = "default_anneal")]
    pub eps_anneal_fraction: f64,
    #[serde(default = "default_replay")]
    pub replay_capacity: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_target_sync")]
    pub target_sync_interval: usize,
    #[serde(default = "default_hidden")]
    pub hidden_dims: Vec<usize>,
    #[serde(default = "default_bonus")]
    pub reward_bonus: f64,
    #[serde(default = "default_train_payload")]
    pub train_payload_bytes: f64,
    #[serde(default = "default_connectivity")]
    pub connectivity: Connectivity,
    #[serde(default = "default_eval_episodes")]
    pub eval_episodes: usize,
    #[serde(default = "default_rms_decay")]
    pub rms_decay: f64,
    #[serde(default = "default_rms_epsilon")]
    pub rms_epsilon: f64,
    /// Training-progress feature value used at test time.
    #[serde(default = "default_test_episode_feature")]
    pub test_episode_feature: f64,
    /// Exploration feature value used at test time.
    #[serde(default = "default_test_epsilon_feature")]
    pub test_epsilon_feature: f64,
    /// Initial Q-value for all actions at the start of training.
    #[serde(default = "default_optimistic_init_q")]
    pub optimistic_init_q: f64,
}

impl Default for RlConfig {
    fn default() -> Self {
        Self {
            episodes: default_episodes(),
            episode_slots: None,
            learning_rate: default_lr(),
            gamma: default_gamma(),
            eps_start: default_eps_start(),
            eps_end: default_eps_end(),
            eps_anneal_fraction: default_anneal(),
            replay_capacity: default_replay(),
            batch_size: default_batch(),
            target_sync_interval: default_target_sync(),
            hidden_dims: default_hidden(),
            reward_bonus: default_bonus(),
            train_payload_bytes: default_train_payload(),
            connectivity: default_connectivity(),
            eval_episodes: default_eval_episodes(),
            rms_decay: default_rms_decay(),
            rms_epsilon: default_rms_epsilon(),
            test_episode_feature: default_test_episode_feature(),
            test_epsilon_feature: default_test_epsilon_feature(),
            optimistic_init_q: default_optimistic_init_q(),
        }
    }
}

fn default_d2d_power() -> f64 {
    20.0
}

/// Phase-II block: broadcast power and the per-member success rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Phase2Config {
    #[serde(default = "default_d2d_power")]
    pub d2d_power_dbm: f64,
    /// Require each member to receive the combined cluster payload instead
    /// of its own share.
    #[serde(default)]
    pub require_combined_payload: bool,
}

impl Default for Phase2Config {
    fn default() -> Self {
        Self { d2d_power_dbm: default_d2d_power(), require_combined_payload: false }
    }
}

/// Metric block: whether the delivery probability averages members only.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricConfig {
    #[serde(default)]
    pub members_only: bool,
}

fn default_power_levels() -> Vec<f64> {
    vec![-100.0, 20.0, 25.0, 30.0]
}

fn default_seed() -> u64 {
    1
}

/// The whole experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "default_power_levels")]
    pub power_levels_dbm: Vec<f64>,
    #[serde(default)]
    pub topology: TopologyConfig,
    #[serde(default)]
    pub channel: ChannelConfig,
    #[serde(default)]
    pub timing: TimingConfig,
    #[serde(default)]
    pub payload: PayloadConfig,
    #[serde(default)]
    pub rl: RlConfig,
    #[serde(default)]
    pub phase2: Phase2Config,
    #[serde(default)]
    pub metric: MetricConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        toml::from_str("").expect("empty config must deserialize to defaults")
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    /// Parses `text` with `key.path=value` overrides applied before typed
    /// deserialization. Values are parsed as TOML scalars/arrays, falling
    /// back to strings.
    pub fn parse_with_overrides(text: &str, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut value: toml::Value =
            toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        for entry in overrides {
            let (path, raw) = entry
                .split_once('=')
                .ok_or_else(|| ConfigError::MalformedOverride(entry.clone()))?;
            let path = path.trim();
            if path.is_empty() {
                return Err(ConfigError::MalformedOverride(entry.clone()));
            }
            set_path(&mut value, path, parse_override_value(raw.trim()))
                .map_err(|e| ConfigError::Invalid(format!("override '{entry}': {e}")))?;
        }
        let cfg: Self =
            value.try_into().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.power_levels_dbm.is_empty() {
            return Err(ConfigError::Invalid("power_levels_dbm must not be empty".into()));
        }
        if self.rl.episodes == 0 {
            return Err(ConfigError::Invalid("rl.episodes must be positive".into()));
        }
        if self.rl.batch_size == 0 || self.rl.replay_capacity < self.rl.batch_size {
            return Err(ConfigError::Invalid(
                "rl.replay_capacity must be at least rl.batch_size".into(),
            ));
        }
        if self.rl.hidden_dims.is_empty() || self.rl.hidden_dims.iter().any(|&d| d == 0) {
            return Err(ConfigError::Invalid("rl.hidden_dims must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.rl.eps_start)
            || !(0.0..=1.0).contains(&self.rl.eps_end)
            || self.rl.eps_end > self.rl.eps_start
        {
            return Err(ConfigError::Invalid("epsilon schedule out of range".into()));
        }
        let timing = &self.timing;
        if timing.slot_ms <= 0.0 || timing.phase1_ms <= 0.0 || timing.phase2_ms < 0.0 {
            return Err(ConfigError::Invalid("timing values must be positive".into()));
        }
        if timing.phase1_slots() == 0 {
            return Err(ConfigError::Invalid("phase I shorter than one slot".into()));
        }
        let p1 = timing.phase1_slots() as f64 * timing.slot_ms;
        if (p1 - timing.phase1_ms).abs() > timing.slot_ms {
            return Err(ConfigError::Invalid(format!(
                "phase1_ms {} is not within one slot of {} slots x {} ms",
                timing.phase1_ms,
                timing.phase1_slots(),
                timing.slot_ms
            )));
        }
        let p2 = timing.phase2_slots() as f64 * timing.slot_ms;
        if (p2 - timing.phase2_ms).abs() > timing.slot_ms {
            return Err(ConfigError::Invalid(
                "phase2_ms inconsistent with the slot length".into(),
            ));
        }
        // Full environment validation (topology invariants etc.).
        self.env_params(self.rl.train_payload_bytes)
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(())
    }

    pub fn num_subbands(&self) -> usize {
        self.topology.num_subbands.unwrap_or(self.topology.num_clusters / 2)
    }

    pub fn path_loss(&self) -> PathLossParams {
        PathLossParams {
            carrier_freq_ghz: self.channel.carrier_ghz,
            a_coeff: self.channel.path_loss_a,
            b_coeff: self.channel.path_loss_b,
            c_coeff: self.channel.path_loss_c,
            min_distance_m: self.channel.min_distance_m,
        }
    }

    pub fn env_params(&self, payload_bytes: f64) -> EnvParams {
        let topo = Topology {
            floor_size_m: self.topology.floor_m,
            ap_positions: self
                .topology
                .ap_positions
                .iter()
                .map(|&(x, y)| Position::new(x, y))
                .collect(),
            num_clusters: self.topology.num_clusters,
            members_per_cluster: self.topology.members_per_cluster,
            num_subbands: self.num_subbands(),
            max_member_distance_m: self.topology.max_member_distance_m,
        };
        EnvParams {
            topology: topo,
            allow_subband_mismatch: self.topology.allow_subband_mismatch,
            ap_path_loss: self.path_loss(),
            d2d_path_loss: self.path_loss(),
            shadowing: ShadowingParams { std_db: self.channel.shadowing_std_db },
            noise: NoiseModel {
                psd_dbm_per_hz: self.channel.noise_psd_dbm_per_hz,
                noise_figure_db: self.channel.noise_figure_db,
                bandwidth_hz: self.channel.bandwidth_hz,
            },
            slot_duration_s: self.timing.slot_duration_s(),
            phase1_slots: self.timing.phase1_slots(),
            phase2_slots: self.timing.phase2_slots(),
            speed_mps: self.topology.speed_mps,
            episode_spacing_s: self.topology.episode_spacing_s,
            mobility_step_m: self.topology.mobility_step_m,
            payload_bytes,
            d2d_power_dbm: self.phase2.d2d_power_dbm,
            phase2_combined_payload: self.phase2.require_combined_payload,
        }
    }

    pub fn train_spec(&self) -> TrainSpec {
        TrainSpec {
            episodes: self.rl.episodes,
            episode_slots: self.rl.episode_slots.unwrap_or_else(|| self.timing.phase1_slots()),
            gamma: self.rl.gamma,
            learning_rate: self.rl.learning_rate,
            rms_decay: self.rl.rms_decay,
            rms_epsilon: self.rl.rms_epsilon,
            replay_capacity: self.rl.replay_capacity,
            batch_size: self.rl.batch_size,
            target_sync_interval: self.rl.target_sync_interval,
            hidden_dims: self.rl.hidden_dims.clone(),
            eps_start: self.rl.eps_start,
            eps_end: self.rl.eps_end,
            eps_anneal_fraction: self.rl.eps_anneal_fraction,
            reward: RewardConfig { completion_bonus: self.rl.reward_bonus, rate_unit: 1e6 },
            power_levels_dbm: self.power_levels_dbm.clone(),
            connectivity: self.rl.connectivity,
            train_payload_bytes: self.rl.train_payload_bytes,
            optimistic_init_q: self.rl.optimistic_init_q,
            config_hash: self.hash(),
        }
    }

    pub fn eval_spec(&self, payload_bytes: f64) -> EvalSpec {
        EvalSpec {
            episodes: self.rl.eval_episodes,
            payload_bytes,
            members_only: self.metric.members_only,
            episode_feature: self.rl.test_episode_feature,
            epsilon_feature: self.rl.test_epsilon_feature,
        }
    }

    pub fn codec(&self, connectivity: Connectivity) -> Result<ActionCodec, ConfigError> {
        ActionCodec::new(
            self.topology.ap_positions.len(),
            self.num_subbands(),
            self.power_levels_dbm.clone(),
            connectivity,
        )
        .map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    /// Canonical serialization written beside run outputs.
    pub fn resolved_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the canonical serialization.
    pub fn hash(&self) -> [u8; 32] {
        let digest = Sha256::digest(self.resolved_toml().as_bytes());
        let mut out = [0u8; 32];
        out.copy_from_slice(&digest);
        out
    }

    pub fn hash_hex(&self) -> String {
        self.hash().iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn parse_override_value(raw: &str) -> toml::Value {
    let wrapped = format!("v = {raw}");
    if let Ok(table) = toml::from_str::<toml::Table>(&wrapped) {
        if let Some(v) = table.get("v") {
            return v.clone();
        }
    }
    toml::Value::String(raw.to_string())
}

fn set_path(root: &mut toml::Value, path: &str, new_value: toml::Value) -> Result<(), String> {
    let mut current = root;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if part.is_empty() {
            return Err("empty path segment".into());
        }
        let table = current
            .as_table_mut()
            .ok_or_else(|| format!("'{}' is not a table", parts[..i].join(".")))?;
        if i == parts.len() - 1 {
            table.insert(part.to_string(), new_value);
            return Ok(());
        }
        current = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    }
    unreachable!("paths have at least one segment")
}

/// Metadata frozen beside each run's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub seed: u64,
    pub command: String,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
    pub artifacts: Vec<String>,
    pub code_version: String,
}

impl RunManifest {
    pub fn new(config: &ExperimentConfig, command: &str) -> Self {
        Self {
            config_hash: config.hash_hex(),
            seed: config.seed,
            command: command.to_string(),
            started_unix_ms: unix_ms(),
            finished_unix_ms: 0,
            artifacts: Vec::new(),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    pub fn finish(&mut self) {
        self.finished_unix_ms = unix_ms();
    }

    pub fn write(&self, path: &Path) -> Result<(), ConfigError> {
        let json =
            serde_json::to_string_pretty(self).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        std::fs::write(path, json)?;
        Ok(())
    }
}

fn unix_ms() -> u128 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_reproduces_reference_defaults() {
        let cfg = ExperimentConfig::from_toml_str("").unwrap();
        assert_eq!(cfg.channel.carrier_ghz, 3.0);
        assert_eq!(cfg.channel.bandwidth_hz, 1e6);
        assert_eq!(cfg.topology.floor_m, (40.0, 40.0));
        assert_eq!(cfg.topology.num_clusters, 4);
        assert_eq!(cfg.topology.members_per_cluster, 4);
        assert_eq!(cfg.topology.speed_mps, 1.0);
        assert_eq!(cfg.power_levels_dbm, vec![-100.0, 20.0, 25.0, 30.0]);
        assert_eq!(cfg.channel.noise_figure_db, 5.0);
        assert_eq!(cfg.channel.noise_psd_dbm_per_hz, -169.0);
        assert_eq!(cfg.timing.latency_ms, 1.0);
        assert_eq!(cfg.timing.phase1_ms, 0.667);
        assert_eq!(cfg.timing.phase2_ms, 0.333);
        assert_eq!(cfg.topology.max_member_distance_m, 3.0);
        assert_eq!(cfg.payload.bytes.values(), vec![20.0, 40.0, 60.0, 80.0, 100.0]);
        assert_eq!(cfg.rl.episodes, 6000);
        assert_eq!(cfg.rl.learning_rate, 0.001);
        assert_eq!(cfg.rl.gamma, 0.9);
        assert_eq!(cfg.rl.hidden_dims, vec![83, 41, 20]);
        assert_eq!(cfg.rl.eval_episodes, 1000);
        assert_eq!(cfg.rl.train_payload_bytes, 100.0);
        assert_eq!(cfg.rl.reward_bonus, 40.0);
        // Derived timing: 4 Phase-I slots, 2 Phase-II slots.
        assert_eq!(cfg.timing.phase1_slots(), 4);
        assert_eq!(cfg.timing.phase2_slots(), 2);
        assert_eq!(cfg.num_subbands(), 2);
    }

    #[test]
    fn resolved_config_round_trips_with_equal_hash() {
        let cfg = ExperimentConfig::from_toml_str("seed = 9\n[rl]\nepisodes = 12").unwrap();
        let frozen = cfg.resolved_toml();
        let reparsed = ExperimentConfig::from_toml_str(&frozen).unwrap();
        assert_eq!(cfg, reparsed);
        assert_eq!(cfg.hash(), reparsed.hash());
    }

    #[test]
    fn unknown_keys_are_named_in_the_error() {
        let err = ExperimentConfig::from_toml_str("[rl]\nlerning_rate = 0.1").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("lerning_rate"), "{msg}");
    }

    #[test]
    fn overrides_apply_with_dotted_paths() {
        let cfg = ExperimentConfig::parse_with_overrides(
            "",
            &[
                "rl.episodes=10".to_string(),
                "topology.num_clusters=6".to_string(),
                "payload.bytes=[40,60]".to_string(),
                "rl.connectivity=\"single\"".to_string(),
                "seed=42".to_string(),
            ],
        )
        .unwrap();
        assert_eq!(cfg.rl.episodes, 10);
        assert_eq!(cfg.topology.num_clusters, 6);
        assert_eq!(cfg.num_subbands(), 3);
        assert_eq!(cfg.payload.bytes.values(), vec![40.0, 60.0]);
        assert_eq!(cfg.rl.connectivity, Connectivity::Single);
        assert_eq!(cfg.seed, 42);
    }

    #[test]
    fn override_strings_fall_back_without_quotes() {
        let cfg =
            ExperimentConfig::parse_with_overrides("", &["rl.connectivity=single".to_string()])
                .unwrap();
        assert_eq!(cfg.rl.connectivity, Connectivity::Single);
    }

    #[test]
    fn malformed_overrides_rejected() {
        assert!(matches!(
            ExperimentConfig::parse_with_overrides("", &["rl.episodes".to_string()]),
            Err(ConfigError::MalformedOverride(_))
        ));
        assert!(ExperimentConfig::parse_with_overrides("", &["rl.nope=3".to_string()]).is_err());
    }

    #[test]
    fn topology_invariants_enforced_through_config() {
        // M != N/2 without the override flag.
        let err =
            ExperimentConfig::parse_with_overrides("", &["topology.num_subbands=3".to_string()])
                .unwrap_err();
        assert!(err.to_string().contains("spectrum sharing"), "{err}");
        ExperimentConfig::parse_with_overrides(
            "",
            &[
                "topology.num_subbands=3".to_string(),
                "topology.allow_subband_mismatch=true".to_string(),
            ],
        )
        .unwrap();
    }

    #[test]
    fn hash_changes_iff_resolved_config_changes() {
        let a = ExperimentConfig::from_toml_str("").unwrap();
        let b = ExperimentConfig::from_toml_str("seed = 1").unwrap(); // the default seed
        let c = ExperimentConfig::from_toml_str("seed = 2").unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn train_spec_pins_reference_hyperparameters() {
        let cfg = ExperimentConfig::from_toml_str("").unwrap();
        let spec = cfg.train_spec();
        assert_eq!(spec.episodes, 6000);
        assert_eq!(spec.episode_slots, 4);
        assert_eq!(spec.gamma, 0.9);
        assert_eq!(spec.learning_rate, 0.001);
        assert_eq!(spec.eps_start, 1.0);
        assert_eq!(spec.eps_end, 0.02);
        assert_eq!(spec.eps_anneal_fraction, 0.8);
        assert_eq!(spec.reward.completion_bonus, 40.0);
        assert_eq!(spec.train_payload_bytes, 100.0);
        assert_eq!(spec.hidden_dims, vec![83, 41, 20]);
    }
}
