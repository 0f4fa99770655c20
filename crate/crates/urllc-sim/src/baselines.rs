//! Comparison policies behind one shared interface, so the evaluator treats
//! hand-crafted allocators and trained agents uniformly.
//!
//! - `random`:  nearest AP, uniform sub-band and power
//! - `central`: nearest AP, centralized sum-rate search over the joint
//!   (sub-band, power) profile
//! - `greedy1`: best single link at maximum power
//! - `greedy2`: two best links on one sub-band at maximum power
//! - `marl1` / `marl2`: greedy rollout of trained checkpoints

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::checkpoint::Checkpoint;
use crate::dqn::{greedy_action, FeatureScaler, QNetwork};
use crate::env::{ApSet, FactoryEnv, LeaderAction, Position};
use crate::marl::{ActionCodec, AgentObservation, CodecError, Connectivity};
use crate::units::dbm_to_mw;

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error("checkpoint mismatch: {0}")]
    CheckpointMismatch(String),
    #[error("this policy requires trained checkpoints")]
    MissingCheckpoints,
    #[error("environment rejected the action profile: {0}")]
    Env(String),
}

/// Joint action selection for one slot. Implementations must be pure
/// functions of the environment state, the observations and the supplied
/// stream, so evaluation stays reproducible.
pub trait Policy: Send {
    fn name(&self) -> &'static str;

    fn select(
        &mut self,
        env: &FactoryEnv,
        observations: &[AgentObservation],
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<LeaderAction>, PolicyError>;
}

/// The six selectable allocators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PolicyKind {
    RandomNearest,
    CentralizedExhaustive,
    GreedySingle,
    GreedyMulti,
    MarlSingle,
    MarlMulti,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 6] = [
        PolicyKind::RandomNearest,
        PolicyKind::CentralizedExhaustive,
        PolicyKind::GreedySingle,
        PolicyKind::GreedyMulti,
        PolicyKind::MarlSingle,
        PolicyKind::MarlMulti,
    ];

    pub fn cli_name(&self) -> &'static str {
        match self {
            PolicyKind::RandomNearest => "random",
            PolicyKind::CentralizedExhaustive => "central",
            PolicyKind::GreedySingle => "greedy1",
            PolicyKind::GreedyMulti => "greedy2",
            PolicyKind::MarlSingle => "marl1",
            PolicyKind::MarlMulti => "marl2",
        }
    }

    pub fn needs_checkpoints(&self) -> bool {
        matches!(self, PolicyKind::MarlSingle | PolicyKind::MarlMulti)
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.cli_name())
    }
}

impl FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "random" => Ok(PolicyKind::RandomNearest),
            "central" => Ok(PolicyKind::CentralizedExhaustive),
            "greedy1" => Ok(PolicyKind::GreedySingle),
            "greedy2" => Ok(PolicyKind::GreedyMulti),
            "marl1" => Ok(PolicyKind::MarlSingle),
            "marl2" => Ok(PolicyKind::MarlMulti),
            other => Err(format!(
                "unknown policy '{other}' (expected random|central|greedy1|greedy2|marl1|marl2)"
            )),
        }
    }
}

/// Index of the geometrically nearest AP; ties break to the lowest index.
pub fn nearest_ap(env: &FactoryEnv, leader: Position) -> usize {
    let mut best = 0;
    let mut best_dist = f64::INFINITY;
    for (k, ap) in env.topology().ap_positions.iter().enumerate() {
        let d = ap.distance_to(leader);
        if d < best_dist {
            best = k;
            best_dist = d;
        }
    }
    best
}

/// Nearest AP with uniformly random sub-band and power level.
pub struct RandomNearest {
    power_levels_dbm: Vec<f64>,
}

impl RandomNearest {
    pub fn new(power_levels_dbm: Vec<f64>) -> Self {
        Self { power_levels_dbm }
    }
}

impl Policy for RandomNearest {
    fn name(&self) -> &'static str {
        "random"
    }

    fn select(
        &mut self,
        env: &FactoryEnv,
        _observations: &[AgentObservation],
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<LeaderAction>, PolicyError> {
        let m = env.topology().num_subbands;
        Ok((0..env.topology().num_clusters)
            .map(|n| LeaderAction {
                ap_set: ApSet::single(nearest_ap(env, env.cluster(n).leader)),
                subband: rng.random_range(0..m),
                power_dbm: self.power_levels_dbm[rng.random_range(0..self.power_levels_dbm.len())],
            })
            .collect())
    }
}

/// Best single (AP, sub-band) link by composite gain, maximum power.
pub struct GreedySingle {
    max_power_dbm: f64,
}

impl GreedySingle {
    pub fn new(max_power_dbm: f64) -> Self {
        Self { max_power_dbm }
    }
}

impl Policy for GreedySingle {
    fn name(&self) -> &'static str {
        "greedy1"
    }

    fn select(
        &mut self,
        env: &FactoryEnv,
        _observations: &[AgentObservation],
        _rng: &mut ChaCha8Rng,
    ) -> Result<Vec<LeaderAction>, PolicyError> {
        let topo = env.topology();
        Ok((0..topo.num_clusters)
            .map(|n| {
                let mut best = (0usize, 0usize);
                let mut best_gain = f64::NEG_INFINITY;
                for k in 0..topo.num_aps() {
                    for m in 0..topo.num_subbands {
                        let g = env.ap_gain(k, n).composite(m);
                        if g > best_gain {
                            best_gain = g;
                            best = (k, m);
                        }
                    }
                }
                LeaderAction {
                    ap_set: ApSet::single(best.0),
                    subband: best.1,
                    power_dbm: self.max_power_dbm,
                }
            })
            .collect())
    }
}

/// Two best AP links sharing the sub-band that maximizes their summed
/// composite gain, maximum power.
pub struct GreedyMulti {
    max_power_dbm: f64,
}

impl GreedyMulti {
    pub fn new(max_power_dbm: f64) -> Self {
        Self { max_power_dbm }
    }
}

impl Policy for GreedyMulti {
    fn name(&self) -> &'static str {
        "greedy2"
    }

    fn select(
        &mut self,
        env: &FactoryEnv,
        _observations: &[AgentObservation],
        _rng: &mut ChaCha8Rng,
    ) -> Result<Vec<LeaderAction>, PolicyError> {
        let topo = env.topology();
        assert!(topo.num_aps() >= 2, "dual connectivity needs at least two APs");
        Ok((0..topo.num_clusters)
            .map(|n| {
                let mut best_band = 0;
                let mut best_pair = (0usize, 1usize);
                let mut best_sum = f64::NEG_INFINITY;
                for m in 0..topo.num_subbands {
                    // Top two APs on this band; ties keep the lower index.
                    let mut first = 0usize;
                    let mut second = 1usize;
                    let g = |k: usize| env.ap_gain(k, n).composite(m);
                    if g(1) > g(0) {
                        (first, second) = (1, 0);
                    }
                    for k in 2..topo.num_aps() {
                        if g(k) > g(first) {
                            second = first;
                            first = k;
                        } else if g(k) > g(second) {
                            second = k;
                        }
                    }
                    let sum = g(first) + g(second);
                    if sum > best_sum {
                        best_sum = sum;
                        best_band = m;
                        best_pair = (first, second);
                    }
                }
                LeaderAction {
                    ap_set: ApSet::pair(best_pair.0, best_pair.1),
                    subband: best_band,
                    power_dbm: self.max_power_dbm,
                }
            })
            .collect())
    }
}

/// Centralized sum-rate maximizer over the joint (sub-band, power) profile
/// with every leader pinned to its nearest AP. Enumerates exhaustively while
/// the profile space is at most `enumeration_limit`; beyond that it runs
/// iterated best-response sweeps from a random profile.
pub struct CentralizedExhaustive {
    power_levels_dbm: Vec<f64>,
    pub enumeration_limit: u64,
    pub max_sweeps: usize,
}

impl CentralizedExhaustive {
    pub fn new(power_levels_dbm: Vec<f64>) -> Self {
        Self { power_levels_dbm, enumeration_limit: 1_000_000, max_sweeps: 50 }
    }

    /// Sum over leaders of `W·log2(1 + SINR)` for a nearest-AP profile where
    /// leader `n` uses option `digits[n] = subband·P + power_index`.
    fn sum_rate(&self, env: &FactoryEnv, serving_ap: &[usize], digits: &[usize]) -> f64 {
        let p = self.power_levels_dbm.len();
        let w = env.params().noise.bandwidth_hz;
        let n_leaders = digits.len();
        let mut total = 0.0;
        for n in 0..n_leaders {
            let m = digits[n] / p;
            let p_mw = dbm_to_mw(self.power_levels_dbm[digits[n] % p]);
            let signal = p_mw * env.ap_gain(serving_ap[n], n).composite(m);
            let mut denom = env.noise_mw();
            for j in 0..n_leaders {
                if j != n && digits[j] / p == m {
                    denom += dbm_to_mw(self.power_levels_dbm[digits[j] % p])
                        * env.ap_gain(serving_ap[j], n).composite(m);
                }
            }
            total += w * (1.0 + signal / denom).log2();
        }
        total
    }

    fn digits_to_actions(&self, serving_ap: &[usize], digits: &[usize]) -> Vec<LeaderAction> {
        let p = self.power_levels_dbm.len();
        digits
            .iter()
            .zip(serving_ap)
            .map(|(&d, &k)| LeaderAction {
                ap_set: ApSet::single(k),
                subband: d / p,
                power_dbm: self.power_levels_dbm[d % p],
            })
            .collect()
    }
}

impl Policy for CentralizedExhaustive {
    fn name(&self) -> &'static str {
        "central"
    }

    fn select(
        &mut self,
        env: &FactoryEnv,
        _observations: &[AgentObservation],
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<LeaderAction>, PolicyError> {
        let topo = env.topology();
        let n_leaders = topo.num_clusters;
        let serving_ap: Vec<usize> =
            (0..n_leaders).map(|n| nearest_ap(env, env.cluster(n).leader)).collect();
        let options = topo.num_subbands * self.power_levels_dbm.len();
        let total = (options as u64).checked_pow(n_leaders as u32);

        let mut digits = vec![0usize; n_leaders];
        if total.is_some_and(|t| t <= self.enumeration_limit) {
            // Exhaustive joint enumeration; first best wins ties, so the
            // result is the lexicographically smallest maximizer.
            let mut best_digits = digits.clone();
            let mut best_rate = f64::NEG_INFINITY;
            let total = total.unwrap();
            for profile in 0..total {
                let mut rem = profile as usize;
                for d in digits.iter_mut().rev() {
                    *d = rem % options;
                    rem /= options;
                }
                let rate = self.sum_rate(env, &serving_ap, &digits);
                if rate > best_rate {
                    best_rate = rate;
                    best_digits.copy_from_slice(&digits);
                }
            }
            Ok(self.digits_to_actions(&serving_ap, &best_digits))
        } else {
            // Iterated best response from a random profile until no single
            // leader can improve the sum-rate.
            for d in digits.iter_mut() {
                *d = rng.random_range(0..options);
            }
            let mut current_rate = self.sum_rate(env, &serving_ap, &digits);
            for _ in 0..self.max_sweeps {
                let mut improved = false;
                for n in 0..n_leaders {
                    let original = digits[n];
                    let mut best_option = original;
                    let mut best_rate = current_rate;
                    for option in 0..options {
                        if option == original {
                            continue;
                        }
                        digits[n] = option;
                        let rate = self.sum_rate(env, &serving_ap, &digits);
                        if rate > best_rate {
                            best_rate = rate;
                            best_option = option;
                        }
                    }
                    digits[n] = best_option;
                    if best_option != original {
                        current_rate = best_rate;
                        improved = true;
                    }
                }
                if !improved {
                    break;
                }
            }
            Ok(self.digits_to_actions(&serving_ap, &digits))
        }
    }
}

/// Greedy rollout of trained per-agent Q-networks.
pub struct MarlPolicy {
    kind: PolicyKind,
    codec: ActionCodec,
    scaler: FeatureScaler,
    networks: Vec<QNetwork>,
}

impl MarlPolicy {
    /// Builds the policy from per-agent checkpoints, validating them against
    /// each other, the expected connectivity mode, and the topology.
    pub fn from_checkpoints(
        checkpoints: &[Checkpoint],
        kind: PolicyKind,
        num_clusters: usize,
        num_aps: usize,
        num_subbands: usize,
        power_levels_dbm: &[f64],
    ) -> Result<Self, PolicyError> {
        let connectivity = match kind {
            PolicyKind::MarlSingle => Connectivity::Single,
            PolicyKind::MarlMulti => Connectivity::Dual,
            other => {
                return Err(PolicyError::CheckpointMismatch(format!(
                    "policy {other} does not take checkpoints"
                )))
            }
        };
        if checkpoints.is_empty() {
            return Err(PolicyError::MissingCheckpoints);
        }
        if checkpoints.len() != num_clusters {
            return Err(PolicyError::CheckpointMismatch(format!(
                "{} checkpoints for {} clusters",
                checkpoints.len(),
                num_clusters
            )));
        }
        let head = &checkpoints[0];
        for c in checkpoints {
            if c.action_space != head.action_space || c.scaler != head.scaler {
                return Err(PolicyError::CheckpointMismatch(
                    "checkpoints disagree on action space or normalization".into(),
                ));
            }
        }
        if head.action_space.connectivity != connectivity {
            return Err(PolicyError::CheckpointMismatch(format!(
                "checkpoints were trained for {:?} connectivity",
                head.action_space.connectivity
            )));
        }
        if head.action_space.num_aps as usize != num_aps
            || head.action_space.num_subbands as usize != num_subbands
        {
            return Err(PolicyError::CheckpointMismatch(format!(
                "checkpoints expect {} APs and {} sub-bands, topology has {num_aps} and {num_subbands}",
                head.action_space.num_aps, head.action_space.num_subbands
            )));
        }
        if head.action_space.power_levels_dbm != power_levels_dbm {
            return Err(PolicyError::CheckpointMismatch(
                "checkpoint power levels differ from the configured levels".into(),
            ));
        }
        let codec = ActionCodec::new(
            num_aps,
            num_subbands,
            power_levels_dbm.to_vec(),
            connectivity,
        )?;
        for c in checkpoints {
            if c.network.output_dim() != codec.num_actions()
                || c.network.input_dim() != c.scaler.dim()
            {
                return Err(PolicyError::CheckpointMismatch(
                    "network dimensions do not match the action space".into(),
                ));
            }
        }
        Ok(Self {
            kind,
            codec,
            scaler: head.scaler.clone(),
            networks: checkpoints.iter().map(|c| c.network.clone()).collect(),
        })
    }

    pub fn num_actions(&self) -> usize {
        self.codec.num_actions()
    }
}

impl Policy for MarlPolicy {
    fn name(&self) -> &'static str {
        self.kind.cli_name()
    }

    fn select(
        &mut self,
        _env: &FactoryEnv,
        observations: &[AgentObservation],
        _rng: &mut ChaCha8Rng,
    ) -> Result<Vec<LeaderAction>, PolicyError> {
        observations
            .iter()
            .zip(&self.networks)
            .map(|(obs, net)| {
                let q = net.forward(&self.scaler.normalize(&obs.features));
                Ok(self.codec.decode(greedy_action(&q))?)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::tests::table1_params;
    use crate::rng::SeedSplitter;

    const POWERS: [f64; 4] = [-100.0, 20.0, 25.0, 30.0];

    fn ready_env(seed: u64) -> FactoryEnv {
        let mut env = FactoryEnv::new(table1_params(4), SeedSplitter::new(seed)).unwrap();
        env.reset_episode();
        env
    }

    fn dummy_obs(env: &FactoryEnv) -> Vec<AgentObservation> {
        (0..env.topology().num_clusters)
            .map(|n| crate::marl::encode_observation(env, n, 1.0, 0.02))
            .collect()
    }

    #[test]
    fn policy_kind_names_round_trip() {
        for kind in PolicyKind::ALL {
            assert_eq!(kind.cli_name().parse::<PolicyKind>().unwrap(), kind);
        }
        assert!("bogus".parse::<PolicyKind>().is_err());
    }

    #[test]
    fn random_nearest_picks_nearest_ap_and_single_subset() {
        let env = ready_env(1);
        let obs = dummy_obs(&env);
        let mut policy = RandomNearest::new(POWERS.to_vec());
        let mut rng = SeedSplitter::new(2).stream("t", &[]);
        let actions = policy.select(&env, &obs, &mut rng).unwrap();
        for (n, a) in actions.iter().enumerate() {
            assert_eq!(a.ap_set.len(), 1);
            let chosen = a.ap_set.iter().next().unwrap();
            let leader = env.cluster(n).leader;
            let chosen_dist = env.topology().ap_positions[chosen].distance_to(leader);
            for ap in &env.topology().ap_positions {
                assert!(chosen_dist <= ap.distance_to(leader) + 1e-12);
            }
        }
    }

    #[test]
    fn random_nearest_subband_frequencies_uniform() {
        let env = ready_env(3);
        let obs = dummy_obs(&env);
        let mut policy = RandomNearest::new(POWERS.to_vec());
        let mut rng = SeedSplitter::new(4).stream("freq", &[]);
        let trials = 25_000; // 4 leaders per trial -> 1e5 draws
        let mut counts = [0usize; 2];
        for _ in 0..trials {
            for a in policy.select(&env, &obs, &mut rng).unwrap() {
                counts[a.subband] += 1;
            }
        }
        let total = (trials * 4) as f64;
        for &c in &counts {
            assert!((c as f64 / total - 0.5).abs() < 0.01);
        }
    }

    #[test]
    fn greedy_single_takes_best_link_at_max_power() {
        let env = ready_env(5);
        let obs = dummy_obs(&env);
        let mut policy = GreedySingle::new(30.0);
        let mut rng = SeedSplitter::new(6).stream("t", &[]);
        let actions = policy.select(&env, &obs, &mut rng).unwrap();
        for (n, a) in actions.iter().enumerate() {
            assert_eq!(a.power_dbm, 30.0);
            let chosen = env.ap_gain(a.ap_set.iter().next().unwrap(), n).composite(a.subband);
            for k in 0..4 {
                for m in 0..2 {
                    assert!(chosen >= env.ap_gain(k, n).composite(m));
                }
            }
        }
    }

    #[test]
    fn greedy_multi_pair_beats_every_other_pair_on_its_band() {
        let env = ready_env(7);
        let obs = dummy_obs(&env);
        let mut policy = GreedyMulti::new(30.0);
        let mut rng = SeedSplitter::new(8).stream("t", &[]);
        let actions = policy.select(&env, &obs, &mut rng).unwrap();
        for (n, a) in actions.iter().enumerate() {
            assert_eq!(a.ap_set.len(), 2);
            assert_eq!(a.power_dbm, 30.0);
            let m = a.subband;
            let chosen: f64 = a.ap_set.iter().map(|k| env.ap_gain(k, n).composite(m)).sum();
            for x in 0..4 {
                for y in x + 1..4 {
                    let other =
                        env.ap_gain(x, n).composite(m) + env.ap_gain(y, n).composite(m);
                    assert!(chosen >= other - 1e-15);
                }
            }
        }
    }

    #[test]
    fn greedy_policies_are_permutation_equivariant() {
        // A leader's greedy action depends only on its own gains, so it must
        // be identical across environments that share those gains.
        let env_a = ready_env(9);
        let env_b = {
            let mut p = table1_params(6);
            p.topology.num_subbands = 2;
            p.allow_subband_mismatch = true;
            let mut env = FactoryEnv::new(p, SeedSplitter::new(10)).unwrap();
            env.reset_episode();
            // Copy leader 0's gains from env_a into slot 3 of env_b.
            for k in 0..4 {
                env.force_ap_gain(k, 3, env_a.ap_gain(k, 0).clone());
            }
            env
        };
        let mut rng = SeedSplitter::new(11).stream("t", &[]);
        let mut g1 = GreedySingle::new(30.0);
        let a = g1.select(&env_a, &dummy_obs(&env_a), &mut rng).unwrap()[0];
        let b = g1.select(&env_b, &dummy_obs(&env_b), &mut rng).unwrap()[3];
        assert_eq!(a, b);
        let mut g2 = GreedyMulti::new(30.0);
        let a = g2.select(&env_a, &dummy_obs(&env_a), &mut rng).unwrap()[0];
        let b = g2.select(&env_b, &dummy_obs(&env_b), &mut rng).unwrap()[3];
        assert_eq!(a, b);
    }

    #[test]
    fn centralized_single_leader_takes_best_band_at_max_power() {
        let mut p = table1_params(4);
        p.topology.num_clusters = 1;
        p.topology.num_subbands = 2;
        p.topology.members_per_cluster = 0;
        p.allow_subband_mismatch = true;
        let mut env = FactoryEnv::new(p, SeedSplitter::new(12)).unwrap();
        env.reset_episode();
        let obs = dummy_obs(&env);
        let mut policy = CentralizedExhaustive::new(POWERS.to_vec());
        let mut rng = SeedSplitter::new(13).stream("t", &[]);
        let actions = policy.select(&env, &obs, &mut rng).unwrap();
        // Alone on the floor, rate is monotone in power.
        assert_eq!(actions[0].power_dbm, 30.0);
        let k = nearest_ap(&env, env.cluster(0).leader);
        assert_eq!(actions[0].ap_set, ApSet::single(k));
        let best_band = actions[0].subband;
        assert!(
            env.ap_gain(k, 0).composite(best_band)
                >= env.ap_gain(k, 0).composite(1 - best_band)
        );
    }

    #[test]
    fn best_response_mode_reaches_a_fixed_point() {
        let mut env = FactoryEnv::new(table1_params(8), SeedSplitter::new(14)).unwrap();
        env.reset_episode();
        let obs = dummy_obs(&env);
        let mut policy = CentralizedExhaustive::new(POWERS.to_vec());
        // 16 options ^ 8 leaders is far past any reasonable enumeration.
        assert!(policy.enumeration_limit < 16u64.pow(8));
        let mut rng = SeedSplitter::new(15).stream("t", &[]);
        let actions = policy.select(&env, &obs, &mut rng).unwrap();

        // No unilateral (sub-band, power) deviation improves the sum-rate.
        let serving: Vec<usize> =
            (0..8).map(|n| nearest_ap(&env, env.cluster(n).leader)).collect();
        let to_digit = |a: &LeaderAction| {
            a.subband * POWERS.len() + POWERS.iter().position(|&x| x == a.power_dbm).unwrap()
        };
        let digits: Vec<usize> = actions.iter().map(to_digit).collect();
        let base = policy.sum_rate(&env, &serving, &digits);
        for n in 0..8 {
            let mut trial = digits.clone();
            for option in 0..4 * POWERS.len() {
                trial[n] = option;
                assert!(policy.sum_rate(&env, &serving, &trial) <= base + 1e-9);
            }
        }
    }

    #[test]
    fn marl_policy_validates_checkpoints() {
        use crate::checkpoint::ActionSpaceDesc;
        use crate::marl::default_scaler;

        let scaler = default_scaler(4, 2);
        let mk = |connectivity, actions: usize| Checkpoint {
            action_space: ActionSpaceDesc {
                num_aps: 4,
                num_subbands: 2,
                connectivity,
                power_levels_dbm: POWERS.to_vec(),
            },
            scaler: scaler.clone(),
            train_episodes: 10,
            config_hash: [0; 32],
            network: QNetwork::zeros(&[10, 8, actions]),
        };

        let good: Vec<Checkpoint> = (0..4).map(|_| mk(Connectivity::Dual, 80)).collect();
        let policy =
            MarlPolicy::from_checkpoints(&good, PolicyKind::MarlMulti, 4, 4, 2, &POWERS);
        assert_eq!(policy.unwrap().num_actions(), 80);

        // Wrong connectivity for the requested kind.
        assert!(MarlPolicy::from_checkpoints(&good, PolicyKind::MarlSingle, 4, 4, 2, &POWERS)
            .is_err());
        // Wrong count for the topology.
        assert!(MarlPolicy::from_checkpoints(&good[..2], PolicyKind::MarlMulti, 4, 4, 2, &POWERS)
            .is_err());
        // Output layer inconsistent with the action space.
        let bad: Vec<Checkpoint> = (0..4).map(|_| mk(Connectivity::Dual, 79)).collect();
        assert!(MarlPolicy::from_checkpoints(&bad, PolicyKind::MarlMulti, 4, 4, 2, &POWERS)
            .is_err());
        // Power levels differ from the configured ones.
        assert!(
            MarlPolicy::from_checkpoints(&good, PolicyKind::MarlMulti, 4, 4, 2, &[20.0, 30.0])
                .is_err()
        );
    }

    #[test]
    fn marl_policy_actions_are_greedy_and_legal() {
        use crate::checkpoint::ActionSpaceDesc;
        use crate::marl::default_scaler;

        let env = ready_env(16);
        let obs = dummy_obs(&env);
        let mut rng_src = SeedSplitter::new(17).stream("nets", &[]);
        let checkpoints: Vec<Checkpoint> = (0..4)
            .map(|_| Checkpoint {
                action_space: ActionSpaceDesc {
                    num_aps: 4,
                    num_subbands: 2,
                    connectivity: Connectivity::Dual,
                    power_levels_dbm: POWERS.to_vec(),
                },
                scaler: default_scaler(4, 2),
                train_episodes: 0,
                config_hash: [0; 32],
                network: QNetwork::glorot_uniform(&[10, 16, 80], &mut rng_src),
            })
            .collect();
        let mut policy =
            MarlPolicy::from_checkpoints(&checkpoints, PolicyKind::MarlMulti, 4, 4, 2, &POWERS)
                .unwrap();
        let mut rng = SeedSplitter::new(18).stream("t", &[]);
        let actions = policy.select(&env, &obs, &mut rng).unwrap();
        assert_eq!(actions.len(), 4);
        for a in &actions {
            assert!(a.subband < 2);
            assert!(POWERS.contains(&a.power_dbm));
        }
        // Greedy and deterministic: same inputs, same actions.
        let again = policy.select(&env, &obs, &mut rng).unwrap();
        assert_eq!(actions, again);
    }
}
