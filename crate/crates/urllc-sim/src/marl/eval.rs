//! The testing loop: greedy policy rollouts over Phase I followed by the
//! fixed orthogonal Phase-II broadcast, producing per-episode delivery
//! outcomes.

use super::obs::{encode_observation, AgentObservation};
use super::MarlError;
use crate::baselines::Policy;
use crate::env::{EnvParams, FactoryEnv};
use crate::metrics::{EpisodeMetrics, TraceRow};
use crate::rng::SeedSplitter;
use crate::units::linear_to_db;

/// Evaluation settings for one sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSpec {
    pub episodes: usize,
    pub payload_bytes: f64,
    /// Average the delivery metric over members only instead of all robots.
    pub members_only: bool,
    /// Value of the training-progress observation feature at test time.
    pub episode_feature: f64,
    /// Value of the exploration-probability observation feature at test time.
    pub epsilon_feature: f64,
}

impl Default for EvalSpec {
    fn default() -> Self {
        Self {
            episodes: 1000,
            payload_bytes: 100.0,
            members_only: false,
            episode_feature: 1.0,
            epsilon_feature: 0.02,
        }
    }
}

/// Aggregate of one evaluation run.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSummary {
    pub delivery_probability: f64,
    pub episodes: usize,
    pub payload_bytes: f64,
}

/// Rolls the policy through `spec.episodes` full episodes (Phase I and
/// Phase II). `on_episode` receives per-episode metrics; `trace` receives
/// one row per (slot, leader) when provided.
pub fn evaluate(
    base_env: &EnvParams,
    policy: &mut dyn Policy,
    spec: &EvalSpec,
    seed: u64,
    mut on_episode: impl FnMut(&EpisodeMetrics),
    mut trace: Option<&mut dyn FnMut(&TraceRow)>,
) -> Result<EvalSummary, MarlError> {
    let mut env_params = base_env.clone();
    env_params.payload_bytes = spec.payload_bytes;
    let splitter = SeedSplitter::new(seed);
    let mut env = FactoryEnv::new(env_params, splitter)?;
    let n_agents = env.topology().num_clusters;
    let phase1_slots = env.params().phase1_slots;

    let mut fraction_sum = 0.0;
    for _ in 0..spec.episodes {
        let e = env.reset_episode();
        let mut observations: Vec<AgentObservation> = (0..n_agents)
            .map(|n| encode_observation(&env, n, spec.episode_feature, spec.epsilon_feature))
            .collect();

        let mut rate_sum = 0.0;
        for slot in 0..phase1_slots {
            let mut rng = splitter.stream("policy", &[e, slot as u64]);
            let actions = policy.select(&env, &observations, &mut rng)?;
            let step = env.phase1_step(&actions)?;
            if let Some(tracer) = trace.as_mut() {
                for (n, action) in actions.iter().enumerate() {
                    let aps: Vec<String> =
                        action.ap_set.iter().map(|k| k.to_string()).collect();
                    tracer(&TraceRow {
                        episode: e,
                        slot,
                        leader: n,
                        aps: aps.join("+"),
                        subband: action.subband,
                        power_dbm: action.power_dbm,
                        sinr_db: linear_to_db(step.outcome.sinr_linear[n]),
                        rate_mbps: step.outcome.rate_bps[n] / 1e6,
                        remaining_bits: env.ledger().leader_remaining_bits(n),
                    });
                }
            }
            rate_sum += step.outcome.rate_bps.iter().sum::<f64>() / 1e6;
            observations = (0..n_agents)
                .map(|n| encode_observation(&env, n, spec.episode_feature, spec.epsilon_feature))
                .collect();
        }

        let phase2 = env.phase2_run()?;
        let outcome = env.robot_delivery_outcome(&phase2);
        let fraction =
            if spec.members_only { outcome.fraction_members() } else { outcome.fraction_all() };
        fraction_sum += fraction;
        on_episode(&EpisodeMetrics {
            episode: e,
            payload_bytes: spec.payload_bytes,
            success_fraction: fraction,
            leaders_succeeded: outcome.leader_success.iter().filter(|&&s| s).count(),
            members_succeeded: outcome
                .member_success
                .iter()
                .map(|m| m.iter().filter(|&&s| s).count())
                .sum(),
            mean_leader_rate_mbps: rate_sum / (phase1_slots * n_agents) as f64,
        });
    }

    Ok(EvalSummary {
        delivery_probability: fraction_sum / spec.episodes as f64,
        episodes: spec.episodes,
        payload_bytes: spec.payload_bytes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::{GreedySingle, PolicyError, RandomNearest};
    use crate::env::tests::table1_params;
    use crate::env::LeaderAction;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn summary_is_mean_of_episode_fractions() {
        let params = table1_params(4);
        let mut policy = GreedySingle::new(30.0);
        let mut fractions = Vec::new();
        let spec = EvalSpec { episodes: 25, payload_bytes: 20.0, ..Default::default() };
        let summary =
            evaluate(&params, &mut policy, &spec, 11, |m| fractions.push(m.success_fraction), None)
                .unwrap();
        assert_eq!(fractions.len(), 25);
        let mean = fractions.iter().sum::<f64>() / 25.0;
        assert!((summary.delivery_probability - mean).abs() < 1e-12);
        assert!((0.0..=1.0).contains(&summary.delivery_probability));
    }

    #[test]
    fn evaluation_is_deterministic() {
        let params = table1_params(4);
        let spec = EvalSpec { episodes: 10, payload_bytes: 60.0, ..Default::default() };
        let mut p1 = RandomNearest::new(vec![-100.0, 20.0, 25.0, 30.0]);
        let mut p2 = RandomNearest::new(vec![-100.0, 20.0, 25.0, 30.0]);
        let a = evaluate(&params, &mut p1, &spec, 3, |_| {}, None).unwrap();
        let b = evaluate(&params, &mut p2, &spec, 3, |_| {}, None).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn policy_errors_propagate() {
        struct Broken;
        impl Policy for Broken {
            fn name(&self) -> &'static str {
                "broken"
            }
            fn select(
                &mut self,
                _env: &FactoryEnv,
                _obs: &[AgentObservation],
                _rng: &mut ChaCha8Rng,
            ) -> Result<Vec<LeaderAction>, PolicyError> {
                Err(PolicyError::MissingCheckpoints)
            }
        }
        let params = table1_params(4);
        let spec = EvalSpec { episodes: 1, ..Default::default() };
        assert!(evaluate(&params, &mut Broken, &spec, 1, |_| {}, None).is_err());
    }
}
