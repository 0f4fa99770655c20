//! TD targets, the RMSProp training step and the epsilon-greedy policy.

use rand::Rng;
use thiserror::Error;

use super::mlp::QNetwork;
use super::replay::Transition;

#[derive(Debug, Error)]
pub enum DqnError {
    #[error("training diverged: non-finite loss {loss}")]
    Diverged { loss: f64 },
}

/// RMSProp hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RmsPropHyper {
    pub learning_rate: f64,
    pub decay: f64,
    pub epsilon: f64,
}

impl Default for RmsPropHyper {
    fn default() -> Self {
        Self { learning_rate: 0.001, decay: 0.9, epsilon: 1e-8 }
    }
}

/// Per-parameter squared-gradient accumulator.
#[derive(Debug, Clone)]
pub struct RmsProp {
    pub hyper: RmsPropHyper,
    cache: Vec<f64>,
}

impl RmsProp {
    pub fn new(net: &QNetwork, hyper: RmsPropHyper) -> Self {
        Self { hyper, cache: vec![0.0; net.param_count()] }
    }

    fn apply(&mut self, net: &mut QNetwork, grad_flat: &[f64]) {
        assert_eq!(grad_flat.len(), self.cache.len());
        let mut params = net.flat_params();
        for ((p, c), &g) in params.iter_mut().zip(self.cache.iter_mut()).zip(grad_flat) {
            *c = self.hyper.decay * *c + (1.0 - self.hyper.decay) * g * g;
            *p -= self.hyper.learning_rate * g / (c.sqrt() + self.hyper.epsilon);
        }
        net.set_flat_params(&params);
    }
}

/// Linear anneal from `eps_start` to `eps_end` over the first
/// `anneal_fraction` of training, constant afterwards.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonSchedule {
    pub eps_start: f64,
    pub eps_end: f64,
    pub anneal_fraction: f64,
    pub total_episodes: usize,
}

impl EpsilonSchedule {
    pub fn epsilon_at(&self, episode: usize) -> f64 {
        let span = self.anneal_fraction * self.total_episodes as f64;
        if span <= 0.0 || episode as f64 >= span {
            return self.eps_end;
        }
        let eps = self.eps_start + (self.eps_end - self.eps_start) * episode as f64 / span;
        eps.clamp(self.eps_end.min(self.eps_start), self.eps_start.max(self.eps_end))
    }
}

/// `r + gamma·max_a' Q_target(s', a')`, or plain `r` for terminal samples.
pub fn td_targets(batch: &[&Transition], target_net: &QNetwork, gamma: f64) -> Vec<f64> {
    assert!(!batch.is_empty(), "empty batch");
    batch
        .iter()
        .map(|t| {
            if t.terminal {
                t.reward
            } else {
                let q = target_net.forward(&t.next_state);
                let best = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                t.reward + gamma * best
            }
        })
        .collect()
}

/// One RMSProp step on the mean squared TD error of the taken actions.
/// Returns the pre-update loss.
pub fn train_step(
    net: &mut QNetwork,
    target_net: &QNetwork,
    batch: &[&Transition],
    opt: &mut RmsProp,
    gamma: f64,
) -> Result<f64, DqnError> {
    let targets = td_targets(batch, target_net, gamma);
    let states: Vec<&[f64]> = batch.iter().map(|t| t.state.as_slice()).collect();
    let actions: Vec<usize> = batch.iter().map(|t| t.action).collect();
    let (loss, grads) = net.loss_and_gradients(&states, &actions, &targets);
    if !loss.is_finite() {
        return Err(DqnError::Diverged { loss });
    }
    opt.apply(net, &grads.flat());
    Ok(loss)
}

/// Epsilon-greedy action selection; greedy ties break to the lowest index.
/// With `epsilon == 0` the stream is not consumed.
pub fn select_action<R: Rng>(
    net: &QNetwork,
    obs: &[f64],
    epsilon: f64,
    rng: &mut R,
) -> usize {
    assert!((0.0..=1.0).contains(&epsilon), "epsilon out of range");
    if epsilon > 0.0 && rng.random::<f64>() < epsilon {
        return rng.random_range(0..net.output_dim());
    }
    greedy_action(&net.forward(obs))
}

/// Index of the maximum Q-value, lowest index on ties.
pub fn greedy_action(q_values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &q) in q_values.iter().enumerate().skip(1) {
        if q > q_values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedSplitter;

    fn transition(reward: f64, terminal: bool) -> Transition {
        Transition {
            state: vec![0.5, -0.25],
            action: 1,
            reward,
            next_state: vec![0.1, 0.2],
            terminal,
        }
    }

    #[test]
    fn terminal_target_is_reward() {
        let net = QNetwork::zeros(&[2, 3]);
        let t = transition(40.0, true);
        assert_eq!(td_targets(&[&t], &net, 0.9), vec![40.0]);
    }

    #[test]
    fn zero_gamma_target_is_reward() {
        let mut net = QNetwork::zeros(&[2, 3]);
        net.layers[0].biases = vec![5.0, 9.0, 1.0];
        let t = transition(10.0, false);
        assert_eq!(td_targets(&[&t], &net, 0.0), vec![10.0]);
    }

    #[test]
    fn discounted_target_uses_max_next_q() {
        let mut net = QNetwork::zeros(&[2, 3]);
        net.layers[0].biases = vec![5.0, 20.0, 1.0];
        let t = transition(10.0, false);
        assert_eq!(td_targets(&[&t], &net, 0.9), vec![10.0 + 0.9 * 20.0]);
    }

    #[test]
    fn perfect_predictions_leave_weights_unchanged() {
        // Bias-only network predicting exactly the targets: zero loss, zero
        // gradient, and RMSProp moves nothing.
        let mut net = QNetwork::zeros(&[2, 2]);
        net.layers[0].biases = vec![3.0, 40.0];
        let target = net.clone();
        let t = Transition {
            state: vec![0.0, 0.0],
            action: 1,
            reward: 40.0,
            next_state: vec![0.0, 0.0],
            terminal: true,
        };
        let mut opt = RmsProp::new(&net, RmsPropHyper::default());
        let before = net.flat_params();
        let loss = train_step(&mut net, &target, &[&t], &mut opt, 0.9).unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(net.flat_params(), before);
    }

    #[test]
    fn repeated_training_drives_td_error_down() {
        let mut rng = SeedSplitter::new(31).stream("converge", &[]);
        let mut net = QNetwork::glorot_uniform(&[3, 8, 4], &mut rng);
        let target = net.clone();
        let t = Transition {
            state: vec![0.2, -0.7, 1.1],
            action: 2,
            reward: 12.5,
            next_state: vec![0.0, 0.0, 0.0],
            terminal: true,
        };
        let mut opt = RmsProp::new(&net, RmsPropHyper::default());
        let mut losses = Vec::new();
        for _ in 0..3000 {
            losses.push(train_step(&mut net, &target, &[&t], &mut opt, 0.9).unwrap());
        }
        let first = losses[0];
        let last = *losses.last().unwrap();
        assert!(last < 1e-6, "final TD error {last}");
        assert!(last < first / 1e4);
        // Monotone after burn-in.
        let burn = 500;
        for w in losses[burn..].windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-9), "non-monotone: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn greedy_when_epsilon_zero() {
        let mut net = QNetwork::zeros(&[2, 4]);
        net.layers[0].biases = vec![0.0, 3.0, 1.0, -2.0];
        let mut rng = SeedSplitter::new(1).stream("greedy", &[]);
        for _ in 0..50 {
            assert_eq!(select_action(&net, &[0.0, 0.0], 0.0, &mut rng), 1);
        }
    }

    #[test]
    fn equal_q_values_tie_break_to_lowest_index() {
        let net = QNetwork::zeros(&[2, 5]);
        let mut rng = SeedSplitter::new(2).stream("ties", &[]);
        assert_eq!(select_action(&net, &[1.0, -1.0], 0.0, &mut rng), 0);
    }

    #[test]
    fn epsilon_one_is_uniform() {
        let net = QNetwork::zeros(&[2, 80]);
        let mut rng = SeedSplitter::new(3).stream("uniform", &[]);
        let n = 100_000;
        let mut counts = vec![0usize; 80];
        for _ in 0..n {
            counts[select_action(&net, &[0.0, 0.0], 1.0, &mut rng)] += 1;
        }
        for &c in &counts {
            let freq = c as f64 / n as f64;
            assert!((freq - 1.0 / 80.0).abs() < 0.004, "freq {freq}");
        }
    }

    #[test]
    fn epsilon_greedy_mixture_distribution() {
        let mut net = QNetwork::zeros(&[1, 5]);
        net.layers[0].biases = vec![0.0, 0.0, 2.0, 0.0, 0.0];
        let eps = 0.4;
        let mut rng = SeedSplitter::new(4).stream("mixture", &[]);
        let n = 100_000;
        let mut counts = vec![0usize; 5];
        for _ in 0..n {
            counts[select_action(&net, &[0.0], eps, &mut rng)] += 1;
        }
        for (a, &c) in counts.iter().enumerate() {
            let expect = eps / 5.0 + if a == 2 { 1.0 - eps } else { 0.0 };
            let freq = c as f64 / n as f64;
            assert!((freq - expect).abs() < 0.006, "action {a}: {freq} vs {expect}");
        }
    }

    #[test]
    fn schedule_endpoints() {
        let s = EpsilonSchedule {
            eps_start: 1.0,
            eps_end: 0.02,
            anneal_fraction: 0.8,
            total_episodes: 6000,
        };
        assert_eq!(s.epsilon_at(0), 1.0);
        assert!((s.epsilon_at(2400) - 0.51).abs() < 1e-12);
        assert_eq!(s.epsilon_at(5999), 0.02);
        assert_eq!(s.epsilon_at(4800), 0.02);
        assert_eq!(s.epsilon_at(10_000), 0.02);
    }

    #[test]
    fn schedule_is_non_increasing_and_bounded() {
        let s = EpsilonSchedule {
            eps_start: 1.0,
            eps_end: 0.02,
            anneal_fraction: 0.8,
            total_episodes: 1000,
        };
        let mut prev = f64::INFINITY;
        for e in 0..1200 {
            let eps = s.epsilon_at(e);
            assert!((0.02..=1.0).contains(&eps));
            assert!(eps <= prev);
            prev = eps;
        }
    }

    #[test]
    fn target_network_staleness() {
        // Targets depend only on the frozen copy; training the online net
        // must not change them.
        let mut rng = SeedSplitter::new(77).stream("stale", &[]);
        let mut net = QNetwork::glorot_uniform(&[2, 6, 3], &mut rng);
        let frozen = net.clone();
        let t = transition(1.5, false);
        let before = td_targets(&[&t], &frozen, 0.9);
        let mut opt = RmsProp::new(&net, RmsPropHyper::default());
        for _ in 0..10 {
            train_step(&mut net, &frozen, &[&t], &mut opt, 0.9).unwrap();
        }
        assert_eq!(td_targets(&[&t], &frozen, 0.9), before);
        assert_ne!(net, frozen);
    }
}
