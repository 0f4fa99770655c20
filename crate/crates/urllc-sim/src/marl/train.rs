//! The centralized-training loop: distinct per-agent Q-networks driven by a
//! shared environment and a common reward, trained once per episode from
//! uniform replay.

use rayon::prelude::*;

use super::codec::{ActionCodec, Connectivity};
use super::obs::{default_scaler, encode_observation};
use super::reward::{common_reward, RewardConfig};
use super::MarlError;
use crate::checkpoint::{ActionSpaceDesc, Checkpoint};
use crate::dqn::{
    select_action, train_step, DqnError, EpsilonSchedule, QNetwork, ReplayMemory, RmsProp,
    RmsPropHyper, Transition,
};
use crate::env::{EnvParams, FactoryEnv};
use crate::metrics::TrainEpisodeRow;
use crate::rng::SeedSplitter;

/// Hyperparameters of one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSpec {
    pub episodes: usize,
    /// Slots per training episode (training runs Phase I only).
    pub episode_slots: usize,
    pub gamma: f64,
    pub learning_rate: f64,
    pub rms_decay: f64,
    pub rms_epsilon: f64,
    pub replay_capacity: usize,
    pub batch_size: usize,
    /// Target network refresh period, in train steps.
    pub target_sync_interval: usize,
    pub hidden_dims: Vec<usize>,
    pub eps_start: f64,
    pub eps_end: f64,
    pub eps_anneal_fraction: f64,
    pub reward: RewardConfig,
    pub power_levels_dbm: Vec<f64>,
    pub connectivity: Connectivity,
    pub train_payload_bytes: f64,
    /// Initial Q-value of the output layer (optimistic initialization keeps
    /// rarely-tried actions attractive until they are actually valued).
    pub optimistic_init_q: f64,
    /// Hash of the resolved experiment config, embedded in checkpoints.
    pub config_hash: [u8; 32],
}

/// Trained policies plus run bookkeeping.
#[derive(Debug, Clone)]
pub struct TrainResult {
    pub checkpoints: Vec<Checkpoint>,
    pub episodes_run: usize,
    pub final_epsilon: f64,
    pub final_mean_loss: f64,
}

struct AgentRuntime {
    net: QNetwork,
    target: QNetwork,
    opt: RmsProp,
    replay: ReplayMemory,
    replay_rng: rand_chacha::ChaCha8Rng,
    train_steps: usize,
    obs: Vec<f64>,
}

/// Runs the full training loop. `resume` continues from saved checkpoints
/// (with a fresh replay memory and optimizer state); `on_episode` receives
/// one metrics row per episode.
pub fn train(
    base_env: &EnvParams,
    spec: &TrainSpec,
    seed: u64,
    resume: Option<Vec<Checkpoint>>,
    mut on_episode: impl FnMut(&TrainEpisodeRow),
) -> Result<TrainResult, MarlError> {
    if spec.episodes == 0 || spec.episode_slots == 0 {
        return Err(MarlError::InvalidSpec("episodes and episode_slots must be positive".into()));
    }
    if spec.batch_size == 0 || spec.replay_capacity < spec.batch_size {
        return Err(MarlError::InvalidSpec(
            "replay capacity must be at least the batch size".into(),
        ));
    }

    // Training runs Phase I only; the episode length is the configured slot
    // count rather than the timing-derived one.
    let mut env_params = base_env.clone();
    env_params.phase1_slots = spec.episode_slots;
    env_params.payload_bytes = spec.train_payload_bytes;

    let splitter = SeedSplitter::new(seed);
    let mut env = FactoryEnv::new(env_params, splitter)?;
    let topo = env.topology().clone();
    let n_agents = topo.num_clusters;

    let codec = ActionCodec::new(
        topo.num_aps(),
        topo.num_subbands,
        spec.power_levels_dbm.clone(),
        spec.connectivity,
    )?;
    let scaler = default_scaler(topo.num_aps(), topo.num_subbands);
    let obs_dim = scaler.dim();
    let mut dims = vec![obs_dim];
    dims.extend_from_slice(&spec.hidden_dims);
    dims.push(codec.num_actions());

    let schedule = EpsilonSchedule {
        eps_start: spec.eps_start,
        eps_end: spec.eps_end,
        anneal_fraction: spec.eps_anneal_fraction,
        total_episodes: spec.episodes,
    };
    let hyper = RmsPropHyper {
        learning_rate: spec.learning_rate,
        decay: spec.rms_decay,
        epsilon: spec.rms_epsilon,
    };

    let start_episode = match &resume {
        Some(ckpts) => {
            if ckpts.len() != n_agents {
                return Err(MarlError::InvalidSpec(format!(
                    "resume provided {} checkpoints for {} agents",
                    ckpts.len(),
                    n_agents
                )));
            }
            ckpts[0].train_episodes as usize
        }
        None => 0,
    };
    if start_episode >= spec.episodes {
        return Err(MarlError::InvalidSpec(format!(
            "resume point {start_episode} is past the configured {} episodes",
            spec.episodes
        )));
    }

    let mut agents: Vec<AgentRuntime> = (0..n_agents)
        .map(|n| {
            let net = match &resume {
                Some(ckpts) => ckpts[n].network.clone(),
                None => {
                    let mut rng = splitter.stream("init", &[n as u64]);
                    let mut net = QNetwork::glorot_uniform(&dims, &mut rng);
                    net.set_output_bias(spec.optimistic_init_q);
                    net
                }
            };
            AgentRuntime {
                target: net.clone(),
                opt: RmsProp::new(&net, hyper),
                replay: ReplayMemory::new(spec.replay_capacity),
                replay_rng: splitter.stream("replay", &[n as u64]),
                train_steps: 0,
                net,
                obs: Vec::new(),
            }
        })
        .collect();

    // A resumed run replays the mobility chain so episode e sees the same
    // floor state as an uninterrupted run.
    for _ in 0..start_episode {
        env.reset_episode();
    }

    let mut final_epsilon = schedule.epsilon_at(spec.episodes.saturating_sub(1));
    let mut final_mean_loss = f64::NAN;
    for episode in start_episode..spec.episodes {
        let wall_start = std::time::Instant::now();
        let epsilon = schedule.epsilon_at(episode);
        let episode_fraction = episode as f64 / spec.episodes as f64;
        let e = env.reset_episode();
        for (n, agent) in agents.iter_mut().enumerate() {
            agent.obs =
                scaler.normalize(&encode_observation(&env, n, episode_fraction, epsilon).features);
        }
        let mut explore_rngs: Vec<_> =
            (0..n_agents).map(|n| splitter.stream("explore", &[n as u64, e])).collect();

        let mut sum_reward = 0.0;
        for _ in 0..spec.episode_slots {
            let action_ix: Vec<usize> = agents
                .iter()
                .zip(explore_rngs.iter_mut())
                .map(|(a, rng)| select_action(&a.net, &a.obs, epsilon, rng))
                .collect();
            let actions = action_ix
                .iter()
                .map(|&ix| codec.decode(ix))
                .collect::<Result<Vec<_>, _>>()?;
            let step = env.phase1_step(&actions)?;
            let completed: Vec<bool> =
                (0..n_agents).map(|n| env.ledger().leader_complete(n)).collect();
            let reward = common_reward(&spec.reward, &step.outcome, &completed);
            sum_reward += reward;
            for (n, agent) in agents.iter_mut().enumerate() {
                let next = scaler
                    .normalize(&encode_observation(&env, n, episode_fraction, epsilon).features);
                agent.replay.push(Transition {
                    state: std::mem::take(&mut agent.obs),
                    action: action_ix[n],
                    reward,
                    next_state: next.clone(),
                    terminal: step.done,
                });
                agent.obs = next;
            }
        }

        let losses: Vec<Option<f64>> = agents
            .par_iter_mut()
            .map(|agent| -> Result<Option<f64>, DqnError> {
                if agent.replay.len() < spec.batch_size {
                    return Ok(None);
                }
                let AgentRuntime { net, target, opt, replay, replay_rng, train_steps, .. } = agent;
                let batch = replay.sample(spec.batch_size, replay_rng);
                let loss = train_step(net, target, &batch, opt, spec.gamma)?;
                *train_steps += 1;
                if *train_steps % spec.target_sync_interval == 0 {
                    *target = net.clone();
                }
                Ok(Some(loss))
            })
            .collect::<Result<_, _>>()
            .map_err(|err| match err {
                DqnError::Diverged { loss } => MarlError::Diverged { episode, agent: 0, loss },
            })?;

        let trained: Vec<f64> = losses.into_iter().flatten().collect();
        let mean_loss = if trained.is_empty() {
            f64::NAN
        } else {
            trained.iter().sum::<f64>() / trained.len() as f64
        };
        final_mean_loss = mean_loss;
        final_epsilon = epsilon;
        on_episode(&TrainEpisodeRow {
            episode: e,
            mean_loss,
            sum_reward,
            epsilon,
            wall_ms: wall_start.elapsed().as_secs_f64() * 1e3,
        });
    }

    let action_space = ActionSpaceDesc {
        num_aps: topo.num_aps() as u32,
        num_subbands: topo.num_subbands as u32,
        connectivity: spec.connectivity,
        power_levels_dbm: spec.power_levels_dbm.clone(),
    };
    let checkpoints = agents
        .into_iter()
        .map(|a| Checkpoint {
            action_space: action_space.clone(),
            scaler: scaler.clone(),
            train_episodes: spec.episodes as u64,
            config_hash: spec.config_hash,
            network: a.net,
        })
        .collect();

    Ok(TrainResult {
        checkpoints,
        episodes_run: spec.episodes - start_episode,
        final_epsilon,
        final_mean_loss,
    })
}
