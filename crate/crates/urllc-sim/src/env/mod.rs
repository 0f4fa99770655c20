//! The factory environment: topology and mobility, per-slot channel state,
//! payload ledgers, and the two-phase delivery protocol.
//!
//! Phase I is interference-limited downlink from APs to cluster leaders
//! driven by a joint action profile; Phase II is the fixed orthogonal
//! leader-to-member broadcast. One environment instance is stepped by one
//! logical thread; independent instances share nothing.

mod payload;
mod topology;

pub use payload::PayloadLedger;
pub use topology::{ClusterState, Heading, Position, Topology};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{
    composite_link_gain, draw_rayleigh_power, draw_shadowing_db, noise_power_dbm, path_loss_db,
    LinkGain, NoiseModel, PathLossParams, ShadowingParams,
};
use crate::rng::SeedSplitter;
use crate::units::dbm_to_mw;

#[derive(Debug, Error, PartialEq)]
pub enum EnvError {
    #[error("invalid topology: {0}")]
    InvalidTopology(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("expected {expected} actions, got {got}")]
    ActionCountMismatch { expected: usize, got: usize },
    #[error("action for leader {leader} is invalid: {reason}")]
    InvalidAction { leader: usize, reason: String },
    #[error("phase already finished")]
    PhaseFinished,
    #[error("phase I has not finished yet")]
    Phase1NotFinished,
    #[error("environment not reset")]
    NotReset,
    #[error("infeasible schedule: {clusters} clusters exceed {capacity} time-frequency slots")]
    InfeasibleSchedule { clusters: usize, capacity: usize },
}

/// Set of one or two serving APs. A pair always shares one sub-band and one
/// power level, carried by the surrounding [`LeaderAction`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ApSet {
    first: usize,
    second: Option<usize>,
}

impl ApSet {
    pub fn single(ap: usize) -> Self {
        Self { first: ap, second: None }
    }

    /// Unordered pair; stored sorted. Panics if both indices are equal.
    pub fn pair(a: usize, b: usize) -> Self {
        assert_ne!(a, b, "AP pair must contain two distinct APs");
        Self { first: a.min(b), second: Some(a.max(b)) }
    }

    pub fn len(&self) -> usize {
        if self.second.is_some() { 2 } else { 1 }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        std::iter::once(self.first).chain(self.second)
    }

    pub fn contains(&self, ap: usize) -> bool {
        self.first == ap || self.second == Some(ap)
    }
}

/// One leader's decoded choice for one slot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeaderAction {
    pub ap_set: ApSet,
    pub subband: usize,
    pub power_dbm: f64,
}

/// Per-slot Phase-I result across all leaders.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotOutcome {
    pub sinr_linear: Vec<f64>,
    pub rate_bps: Vec<f64>,
    pub delivered_bits: Vec<f64>,
    /// Interference plus noise measured at each leader on every sub-band
    /// (linear mW), fed into the next observation.
    pub interference_plus_noise_mw: Vec<Vec<f64>>,
}

/// Result of stepping Phase I by one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct Phase1Step {
    pub outcome: SlotOutcome,
    pub done: bool,
}

/// Result of the Phase-II broadcast.
#[derive(Debug, Clone, PartialEq)]
pub struct Phase2Outcome {
    /// Cluster -> (phase-2 slot, sub-band).
    pub schedule: Vec<(usize, usize)>,
    pub member_sinr: Vec<Vec<f64>>,
    pub member_rate_bps: Vec<Vec<f64>>,
    pub member_delivered_bits: Vec<Vec<f64>>,
    /// Co-channel interference seen by each member; identically zero under
    /// the orthogonal schedule.
    pub member_interference_mw: Vec<Vec<f64>>,
    pub member_success: Vec<Vec<bool>>,
}

/// Delivery outcome for every robot of one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct DeliveryOutcome {
    pub leader_success: Vec<bool>,
    pub member_success: Vec<Vec<bool>>,
}

impl DeliveryOutcome {
    /// Fraction of all `N·(O+1)` robots that received their payload in time.
    pub fn fraction_all(&self) -> f64 {
        let mut ok = 0usize;
        let mut total = 0usize;
        for (n, &ls) in self.leader_success.iter().enumerate() {
            total += 1 + self.member_success[n].len();
            ok += ls as usize;
            ok += self.member_success[n].iter().filter(|&&s| s).count();
        }
        ok as f64 / total as f64
    }

    /// Fraction over members only.
    pub fn fraction_members(&self) -> f64 {
        let total: usize = self.member_success.iter().map(|m| m.len()).sum();
        if total == 0 {
            return 1.0;
        }
        let ok: usize =
            self.member_success.iter().map(|m| m.iter().filter(|&&s| s).count()).sum();
        ok as f64 / total as f64
    }
}

/// Everything needed to build a [`FactoryEnv`].
#[derive(Debug, Clone, PartialEq)]
pub struct EnvParams {
    pub topology: Topology,
    pub allow_subband_mismatch: bool,
    pub ap_path_loss: PathLossParams,
    pub d2d_path_loss: PathLossParams,
    pub shadowing: ShadowingParams,
    pub noise: NoiseModel,
    pub slot_duration_s: f64,
    pub phase1_slots: usize,
    pub phase2_slots: usize,
    pub speed_mps: f64,
    /// Wall-clock spacing between successive episodes along the robots'
    /// trajectories. Payload rounds recur far more often than the channel
    /// decorrelates, so episodes subsample the mobility process.
    pub episode_spacing_s: f64,
    /// Distance of one per-episode mobility step; defaults to
    /// `speed_mps x episode_spacing_s` when unset.
    pub mobility_step_m: Option<f64>,
    pub payload_bytes: f64,
    pub d2d_power_dbm: f64,
    /// When set, a member must receive the full combined cluster payload in
    /// Phase II; otherwise only its own share.
    pub phase2_combined_payload: bool,
}

impl EnvParams {
    pub fn validate(&self) -> Result<(), EnvError> {
        self.topology.validate(self.allow_subband_mismatch)?;
        self.ap_path_loss.validate().map_err(|e| EnvError::InvalidParameter(e.to_string()))?;
        self.d2d_path_loss.validate().map_err(|e| EnvError::InvalidParameter(e.to_string()))?;
        self.shadowing.validate().map_err(|e| EnvError::InvalidParameter(e.to_string()))?;
        self.noise.validate().map_err(|e| EnvError::InvalidParameter(e.to_string()))?;
        if !(self.slot_duration_s > 0.0) {
            return Err(EnvError::InvalidParameter("slot_duration_s must be positive".into()));
        }
        if self.phase1_slots == 0 {
            return Err(EnvError::InvalidParameter("phase1_slots must be positive".into()));
        }
        if self.payload_bytes < 0.0 {
            return Err(EnvError::InvalidParameter("payload_bytes must be non-negative".into()));
        }
        if self.speed_mps < 0.0 {
            return Err(EnvError::InvalidParameter("speed_mps must be non-negative".into()));
        }
        if self.mobility_step_m.is_some_and(|s| s < 0.0) {
            return Err(EnvError::InvalidParameter("mobility_step_m must be non-negative".into()));
        }
        if self.episode_spacing_s < 0.0 {
            return Err(EnvError::InvalidParameter("episode_spacing_s must be non-negative".into()));
        }
        Ok(())
    }

    /// Combined cluster payload delivered to the leader in Phase I, in bits.
    pub fn leader_payload_bits(&self) -> f64 {
        8.0 * self.payload_bytes * (self.topology.members_per_cluster + 1) as f64
    }

    /// Phase-II success threshold per member, in bits.
    pub fn member_payload_bits(&self) -> f64 {
        if self.phase2_combined_payload {
            self.leader_payload_bits()
        } else {
            8.0 * self.payload_bytes
        }
    }

    /// Episode duration: the full latency budget `T`.
    pub fn episode_duration_s(&self) -> f64 {
        self.slot_duration_s * (self.phase1_slots + self.phase2_slots) as f64
    }

    /// Per-episode leader displacement.
    pub fn mobility_step(&self) -> f64 {
        self.mobility_step_m.unwrap_or(self.speed_mps * self.episode_spacing_s)
    }
}

/// The simulated factory floor.
#[derive(Debug, Clone)]
pub struct FactoryEnv {
    params: EnvParams,
    splitter: SeedSplitter,
    noise_mw: f64,
    episode: Option<u64>,
    slot: usize,
    phase2_done: bool,
    clusters: Vec<ClusterState>,
    /// Per-episode shadowing in dB, `[ap][leader]` and `[leader][member]`.
    ap_shadow_db: Vec<Vec<f64>>,
    d2d_shadow_db: Vec<Vec<f64>>,
    /// Current-slot AP->leader gains, `[ap][leader]`.
    ap_gains: Vec<Vec<LinkGain>>,
    ledger: PayloadLedger,
    /// Interference plus noise per leader per sub-band measured last slot.
    prev_interference_mw: Vec<Vec<f64>>,
    last_subband: Vec<usize>,
    #[cfg(test)]
    d2d_gain_override: std::collections::HashMap<(usize, usize), LinkGain>,
}

impl FactoryEnv {
    pub fn new(params: EnvParams, splitter: SeedSplitter) -> Result<Self, EnvError> {
        params.validate()?;
        let noise_mw = dbm_to_mw(noise_power_dbm(&params.noise));
        let n = params.topology.num_clusters;
        let o = params.topology.members_per_cluster;
        let ledger = PayloadLedger::new(
            n,
            o,
            params.leader_payload_bits(),
            params.member_payload_bits(),
            params.slot_duration_s,
            params.phase1_slots,
            params.phase2_slots,
        );
        Ok(Self {
            params,
            splitter,
            noise_mw,
            episode: None,
            slot: 0,
            phase2_done: false,
            clusters: Vec::new(),
            ap_shadow_db: Vec::new(),
            d2d_shadow_db: Vec::new(),
            ap_gains: Vec::new(),
            ledger,
            prev_interference_mw: Vec::new(),
            last_subband: Vec::new(),
            #[cfg(test)]
            d2d_gain_override: std::collections::HashMap::new(),
        })
    }

    pub fn params(&self) -> &EnvParams {
        &self.params
    }

    pub fn topology(&self) -> &Topology {
        &self.params.topology
    }

    pub fn noise_mw(&self) -> f64 {
        self.noise_mw
    }

    pub fn ledger(&self) -> &PayloadLedger {
        &self.ledger
    }

    pub fn episode(&self) -> Option<u64> {
        self.episode
    }

    pub fn slot(&self) -> usize {
        self.slot
    }

    pub fn phase1_done(&self) -> bool {
        self.slot >= self.params.phase1_slots
    }

    pub fn cluster(&self, n: usize) -> &ClusterState {
        &self.clusters[n]
    }

    /// Current-slot gain of the `ap -> leader` link.
    pub fn ap_gain(&self, ap: usize, leader: usize) -> &LinkGain {
        &self.ap_gains[ap][leader]
    }

    /// Interference plus noise (mW) per sub-band measured at `leader` during
    /// the previous slot; the noise floor right after a reset.
    pub fn prev_interference_mw(&self, leader: usize) -> &[f64] {
        &self.prev_interference_mw[leader]
    }

    /// The sub-band `leader` transmitted on last slot (0 after a reset).
    pub fn last_subband(&self, leader: usize) -> usize {
        self.last_subband[leader]
    }

    /// Changes the per-robot payload; takes effect at the next reset.
    pub fn set_payload_bytes(&mut self, bytes: f64) {
        self.params.payload_bytes = bytes;
    }

    /// Starts the next episode: one mobility step (or the initial draw),
    /// fresh member placement, fresh shadowing and slot-0 fading, and reset
    /// ledgers. Returns the new episode index.
    pub fn reset_episode(&mut self) -> u64 {
        let e = self.episode.map_or(0, |x| x + 1);
        self.episode = Some(e);
        let topo = self.params.topology.clone();
        let n_clusters = topo.num_clusters;

        if e == 0 {
            self.clusters = (0..n_clusters)
                .map(|n| {
                    let mut rng = self.splitter.stream("layout", &[n as u64]);
                    ClusterState::spawn(&topo, self.params.speed_mps, &mut rng)
                })
                .collect();
        } else {
            let step = self.params.mobility_step();
            for (n, cluster) in self.clusters.iter_mut().enumerate() {
                let mut rng = self.splitter.stream("mobility", &[e, n as u64]);
                cluster.advance(&topo, step, &mut rng);
            }
        }
        for (n, cluster) in self.clusters.iter_mut().enumerate() {
            let mut rng = self.splitter.stream("placement", &[e, n as u64]);
            cluster.place_members(topo.members_per_cluster, topo.max_member_distance_m, &mut rng);
        }

        self.ap_shadow_db = (0..topo.num_aps())
            .map(|k| {
                (0..n_clusters)
                    .map(|n| {
                        let mut rng = self.splitter.stream("shadow-ap", &[e, k as u64, n as u64]);
                        draw_shadowing_db(&self.params.shadowing, &mut rng)
                    })
                    .collect()
            })
            .collect();
        self.d2d_shadow_db = (0..n_clusters)
            .map(|n| {
                (0..topo.members_per_cluster)
                    .map(|o| {
                        let mut rng = self.splitter.stream("shadow-d2d", &[e, n as u64, o as u64]);
                        draw_shadowing_db(&self.params.shadowing, &mut rng)
                    })
                    .collect()
            })
            .collect();

        self.ledger = PayloadLedger::new(
            n_clusters,
            topo.members_per_cluster,
            self.params.leader_payload_bits(),
            self.params.member_payload_bits(),
            self.params.slot_duration_s,
            self.params.phase1_slots,
            self.params.phase2_slots,
        );
        self.slot = 0;
        self.phase2_done = false;
        self.last_subband = vec![0; n_clusters];
        self.prev_interference_mw =
            vec![vec![self.noise_mw; topo.num_subbands]; n_clusters];
        self.draw_ap_gains();
        e
    }

    fn draw_ap_gains(&mut self) {
        let e = self.episode.expect("reset first");
        let t = self.slot as u64;
        let topo = &self.params.topology;
        self.ap_gains = (0..topo.num_aps())
            .map(|k| {
                (0..topo.num_clusters)
                    .map(|n| {
                        let dist = topo.ap_positions[k].distance_to(self.clusters[n].leader);
                        let pl = path_loss_db(&self.params.ap_path_loss, dist);
                        let mut rng =
                            self.splitter.stream("fading-ap", &[e, t, k as u64, n as u64]);
                        let fading: Vec<f64> = (0..topo.num_subbands)
                            .map(|_| draw_rayleigh_power(&mut rng))
                            .collect();
                        composite_link_gain(pl, self.ap_shadow_db[k][n], fading)
                            .expect("finite channel draw")
                    })
                    .collect()
            })
            .collect();
    }

    fn validate_actions(&self, actions: &[LeaderAction]) -> Result<(), EnvError> {
        let topo = &self.params.topology;
        if actions.len() != topo.num_clusters {
            return Err(EnvError::ActionCountMismatch {
                expected: topo.num_clusters,
                got: actions.len(),
            });
        }
        for (n, a) in actions.iter().enumerate() {
            if a.subband >= topo.num_subbands {
                return Err(EnvError::InvalidAction {
                    leader: n,
                    reason: format!("sub-band {} out of range", a.subband),
                });
            }
            for k in a.ap_set.iter() {
                if k >= topo.num_aps() {
                    return Err(EnvError::InvalidAction {
                        leader: n,
                        reason: format!("AP {k} out of range"),
                    });
                }
            }
        }
        Ok(())
    }

    /// Interference plus noise (mW) at every leader on every sub-band under
    /// the given joint action profile, using current-slot gains.
    pub fn interference_map_mw(&self, actions: &[LeaderAction]) -> Vec<Vec<f64>> {
        let topo = &self.params.topology;
        let mut map = vec![vec![self.noise_mw; topo.num_subbands]; topo.num_clusters];
        for (n, row) in map.iter_mut().enumerate() {
            for (j, a) in actions.iter().enumerate() {
                if j == n {
                    continue;
                }
                let p_mw = dbm_to_mw(a.power_dbm);
                for i in a.ap_set.iter() {
                    row[a.subband] += p_mw * self.ap_gains[i][n].composite(a.subband);
                }
            }
        }
        map
    }

    /// Phase-I SINR of every leader on its chosen sub-band.
    pub fn phase1_sinr(&self, actions: &[LeaderAction]) -> Result<Vec<f64>, EnvError> {
        if self.episode.is_none() {
            return Err(EnvError::NotReset);
        }
        self.validate_actions(actions)?;
        let interference = self.interference_map_mw(actions);
        Ok(actions
            .iter()
            .enumerate()
            .map(|(n, a)| {
                let p_mw = dbm_to_mw(a.power_dbm);
                let signal: f64 = a
                    .ap_set
                    .iter()
                    .map(|k| p_mw * self.ap_gains[k][n].composite(a.subband))
                    .sum();
                signal / interference[n][a.subband]
            })
            .collect())
    }

    /// Runs one Phase-I slot: SINRs, rates, ledger updates, interference
    /// measurements, then advances the small-scale fading.
    pub fn phase1_step(&mut self, actions: &[LeaderAction]) -> Result<Phase1Step, EnvError> {
        if self.episode.is_none() {
            return Err(EnvError::NotReset);
        }
        if self.phase1_done() {
            return Err(EnvError::PhaseFinished);
        }
        self.validate_actions(actions)?;

        let w = self.params.noise.bandwidth_hz;
        let dt = self.params.slot_duration_s;
        let interference = self.interference_map_mw(actions);
        let mut sinr = Vec::with_capacity(actions.len());
        let mut rate = Vec::with_capacity(actions.len());
        let mut delivered = Vec::with_capacity(actions.len());
        for (n, a) in actions.iter().enumerate() {
            let p_mw = dbm_to_mw(a.power_dbm);
            let signal: f64 = a
                .ap_set
                .iter()
                .map(|k| p_mw * self.ap_gains[k][n].composite(a.subband))
                .sum();
            let s = signal / interference[n][a.subband];
            let r = w * (1.0 + s).log2();
            let bits = dt * r;
            self.ledger.deliver_to_leader(n, bits);
            self.last_subband[n] = a.subband;
            sinr.push(s);
            rate.push(r);
            delivered.push(bits);
        }
        self.prev_interference_mw = interference.clone();
        self.slot += 1;
        let done = self.phase1_done();
        if !done {
            self.draw_ap_gains();
        }
        Ok(Phase1Step {
            outcome: SlotOutcome {
                sinr_linear: sinr,
                rate_bps: rate,
                delivered_bits: delivered,
                interference_plus_noise_mw: interference,
            },
            done,
        })
    }

    /// Deterministic orthogonal Phase-II assignment: cluster `c` gets slot
    /// `c / M` and sub-band `c % M`, row-major over the slot x sub-band grid.
    pub fn phase2_schedule(&self) -> Result<Vec<(usize, usize)>, EnvError> {
        let topo = &self.params.topology;
        let capacity = self.params.phase2_slots * topo.num_subbands;
        if topo.num_clusters > capacity {
            return Err(EnvError::InfeasibleSchedule { clusters: topo.num_clusters, capacity });
        }
        Ok((0..topo.num_clusters)
            .map(|c| (c / topo.num_subbands, c % topo.num_subbands))
            .collect())
    }

    /// Runs the whole Phase-II broadcast. Requires Phase I to have finished.
    pub fn phase2_run(&mut self) -> Result<Phase2Outcome, EnvError> {
        if self.episode.is_none() {
            return Err(EnvError::NotReset);
        }
        if !self.phase1_done() {
            return Err(EnvError::Phase1NotFinished);
        }
        if self.phase2_done {
            return Err(EnvError::PhaseFinished);
        }
        let schedule = self.phase2_schedule()?;
        let e = self.episode.unwrap();
        let topo = self.params.topology.clone();
        let w = self.params.noise.bandwidth_hz;
        let dt = self.params.slot_duration_s;
        let p_mw = dbm_to_mw(self.params.d2d_power_dbm);
        let threshold = self.ledger.member_initial_bits();

        let mut sinr = vec![Vec::new(); topo.num_clusters];
        let mut rate = vec![Vec::new(); topo.num_clusters];
        let mut delivered = vec![Vec::new(); topo.num_clusters];
        let mut interference = vec![Vec::new(); topo.num_clusters];
        let mut success = vec![Vec::new(); topo.num_clusters];

        for n in 0..topo.num_clusters {
            let (p2_slot, m) = schedule[n];
            // No other cluster shares this (slot, sub-band) cell, so the
            // co-channel term of the member SINR is exactly zero.
            debug_assert!(schedule
                .iter()
                .enumerate()
                .all(|(j, &cell)| j == n || cell != (p2_slot, m)));
            let t = (self.params.phase1_slots + p2_slot) as u64;
            let leader_ok = self.ledger.leader_complete(n);
            for o in 0..topo.members_per_cluster {
                let gain = self.d2d_gain(e, t, n, o);
                let s = p_mw * gain.composite(m) / self.noise_mw;
                let r = w * (1.0 + s).log2();
                let bits = dt * r;
                self.ledger.deliver_to_member(n, o, bits);
                sinr[n].push(s);
                rate[n].push(r);
                delivered[n].push(bits);
                interference[n].push(0.0);
                success[n].push(bits >= threshold && leader_ok);
            }
        }
        self.phase2_done = true;
        Ok(Phase2Outcome {
            schedule,
            member_sinr: sinr,
            member_rate_bps: rate,
            member_delivered_bits: delivered,
            member_interference_mw: interference,
            member_success: success,
        })
    }

    fn d2d_gain(&self, e: u64, t: u64, n: usize, o: usize) -> LinkGain {
        #[cfg(test)]
        if let Some(gain) = self.d2d_gain_override.get(&(n, o)) {
            return gain.clone();
        }
        let cluster = &self.clusters[n];
        let dist = cluster.leader.distance_to(cluster.members[o]);
        let pl = path_loss_db(&self.params.d2d_path_loss, dist);
        let mut rng = self.splitter.stream("fading-d2d", &[e, t, n as u64, o as u64]);
        let fading: Vec<f64> = (0..self.params.topology.num_subbands)
            .map(|_| draw_rayleigh_power(&mut rng))
            .collect();
        composite_link_gain(pl, self.d2d_shadow_db[n][o], fading).expect("finite channel draw")
    }

    /// Per-robot delivery verdict once both phases have run.
    pub fn robot_delivery_outcome(&self, phase2: &Phase2Outcome) -> DeliveryOutcome {
        let leader_success: Vec<bool> = (0..self.params.topology.num_clusters)
            .map(|n| self.ledger.leader_complete(n))
            .collect();
        DeliveryOutcome { leader_success, member_success: phase2.member_success.clone() }
    }

    #[cfg(test)]
    pub(crate) fn force_ap_gain(&mut self, ap: usize, leader: usize, gain: LinkGain) {
        self.ap_gains[ap][leader] = gain;
    }

    #[cfg(test)]
    pub(crate) fn force_noise_mw(&mut self, noise_mw: f64) {
        self.noise_mw = noise_mw;
        for row in &mut self.prev_interference_mw {
            for v in row.iter_mut() {
                *v = noise_mw;
            }
        }
    }

    #[cfg(test)]
    pub(crate) fn force_d2d_gain(&mut self, n: usize, o: usize, gain: LinkGain) {
        self.d2d_gain_override.insert((n, o), gain);
    }
}
