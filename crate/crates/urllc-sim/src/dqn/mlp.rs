//! Multilayer perceptron with ReLU hidden activations and an identity
//! output layer, plus analytic gradients of the masked mean-squared TD loss.

use rand::Rng;

/// One affine layer. Weights are row-major `[out][in]`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Layer {
    pub(crate) in_dim: usize,
    pub(crate) out_dim: usize,
    pub(crate) weights: Vec<f64>,
    pub(crate) biases: Vec<f64>,
}

impl Layer {
    fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self { in_dim, out_dim, weights: vec![0.0; in_dim * out_dim], biases: vec![0.0; out_dim] }
    }

    /// `y = W·x + b` into `out`.
    #[inline]
    fn affine(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.in_dim);
        debug_assert_eq!(out.len(), self.out_dim);
        for (o, y) in out.iter_mut().enumerate() {
            let row = &self.weights[o * self.in_dim..(o + 1) * self.in_dim];
            let mut acc = self.biases[o];
            for (w, xi) in row.iter().zip(x) {
                acc += w * xi;
            }
            *y = acc;
        }
    }
}

/// Gradient accumulator shaped like a [`QNetwork`]'s parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub(crate) weights: Vec<Vec<f64>>,
    pub(crate) biases: Vec<Vec<f64>>,
}

impl Gradients {
    fn zeros_like(net: &QNetwork) -> Self {
        Self {
            weights: net.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            biases: net.layers.iter().map(|l| vec![0.0; l.biases.len()]).collect(),
        }
    }

    /// Flattened view in the same order as [`QNetwork::flat_params`].
    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w);
            out.extend_from_slice(b);
        }
        out
    }
}

/// Fully connected Q-network: ReLU on hidden layers, identity on the output
/// layer, double precision throughout.
#[derive(Debug, Clone, PartialEq)]
pub struct QNetwork {
    pub(crate) layers: Vec<Layer>,
}

impl QNetwork {
    /// All-zero network with the given `[input, hidden.., output]` dims.
    pub fn zeros(dims: &[usize]) -> Self {
        assert!(dims.len() >= 2, "need at least input and output dims");
        assert!(dims.iter().all(|&d| d > 0), "zero-width layer");
        let layers = dims.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect();
        Self { layers }
    }

    /// Glorot-style init: each layer uniform in ±sqrt(6/(fan_in+fan_out)).
    pub fn glorot_uniform<R: Rng>(dims: &[usize], rng: &mut R) -> Self {
        let mut net = Self::zeros(dims);
        for layer in &mut net.layers {
            let bound = (6.0 / (layer.in_dim + layer.out_dim) as f64).sqrt();
            for w in &mut layer.weights {
                *w = rng.random_range(-bound..bound);
            }
        }
        net
    }

    /// Sets every output-layer bias to `value` (optimistic initialization).
    pub fn set_output_bias(&mut self, value: f64) {
        for b in &mut self.layers.last_mut().unwrap().biases {
            *b = value;
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().out_dim
    }

    /// `[input, hidden.., output]`.
    pub fn layer_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.layers[0].in_dim];
        dims.extend(self.layers.iter().map(|l| l.out_dim));
        dims
    }

    /// Per-action Q-values for one observation.
    ///
    /// Panics if `obs` does not match the input dimension.
    pub fn forward(&self, obs: &[f64]) -> Vec<f64> {
        assert_eq!(obs.len(), self.input_dim(), "observation dimension mismatch");
        let last = self.layers.len() - 1;
        let mut current = obs.to_vec();
        let mut next = Vec::new();
        for (li, layer) in self.layers.iter().enumerate() {
            next.resize(layer.out_dim, 0.0);
            layer.affine(&current, &mut next);
            if li != last {
                for v in next.iter_mut() {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
            }
            std::mem::swap(&mut current, &mut next);
        }
        current
    }

    /// Mean squared error on the taken actions against fixed `targets`,
    /// with analytic parameter gradients. Off-action outputs get zero
    /// gradient. `states`, `actions` and `targets` must have equal length.
    pub fn loss_and_gradients(
        &self,
        states: &[&[f64]],
        actions: &[usize],
        targets: &[f64],
    ) -> (f64, Gradients) {
        assert!(!states.is_empty(), "empty batch");
        assert_eq!(states.len(), actions.len());
        assert_eq!(states.len(), targets.len());
        let batch = states.len() as f64;
        let last = self.layers.len() - 1;

        let mut grads = Gradients::zeros_like(self);
        // Post-activation values per layer, reused across samples.
        let mut acts: Vec<Vec<f64>> =
            self.layers.iter().map(|l| vec![0.0; l.out_dim]).collect();
        let mut deltas: Vec<Vec<f64>> =
            self.layers.iter().map(|l| vec![0.0; l.out_dim]).collect();

        let mut loss = 0.0;
        for ((&state, &action), &target) in states.iter().zip(actions).zip(targets) {
            assert_eq!(state.len(), self.input_dim(), "observation dimension mismatch");
            assert!(action < self.output_dim(), "action index out of range");

            // Forward, keeping every post-activation.
            for li in 0..self.layers.len() {
                let (done, rest) = acts.split_at_mut(li);
                let input: &[f64] = if li == 0 { state } else { &done[li - 1] };
                self.layers[li].affine(input, &mut rest[0]);
                if li != last {
                    for v in rest[0].iter_mut() {
                        if *v < 0.0 {
                            *v = 0.0;
                        }
                    }
                }
            }

            let err = acts[last][action] - target;
            loss += err * err;

            // Output delta: masked to the taken action, d(mean sq err)/dq.
            for d in deltas[last].iter_mut() {
                *d = 0.0;
            }
            deltas[last][action] = 2.0 * err / batch;

            // Backpropagate. ReLU derivative read off the post-activation.
            for li in (0..self.layers.len()).rev() {
                let input: &[f64] = if li == 0 { state } else { &acts[li - 1] };
                let layer = &self.layers[li];
                {
                    let gw = &mut grads.weights[li];
                    let gb = &mut grads.biases[li];
                    for o in 0..layer.out_dim {
                        let d = deltas[li][o];
                        if d == 0.0 {
                            continue;
                        }
                        gb[o] += d;
                        let row = &mut gw[o * layer.in_dim..(o + 1) * layer.in_dim];
                        for (g, xi) in row.iter_mut().zip(input) {
                            *g += d * xi;
                        }
                    }
                }
                if li > 0 {
                    let (lower, upper) = deltas.split_at_mut(li);
                    let prev = &mut lower[li - 1];
                    let cur = &upper[0];
                    for (i, p) in prev.iter_mut().enumerate() {
                        let mut acc = 0.0;
                        for o in 0..layer.out_dim {
                            acc += layer.weights[o * layer.in_dim + i] * cur[o];
                        }
                        // acts[li-1] is post-ReLU; zero means the unit was off.
                        *p = if acts[li - 1][i] > 0.0 { acc } else { 0.0 };
                    }
                }
            }
        }

        (loss / batch, grads)
    }

    /// All parameters flattened layer by layer, weights then biases.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for layer in &self.layers {
            out.extend_from_slice(&layer.weights);
            out.extend_from_slice(&layer.biases);
        }
        out
    }

    /// Inverse of [`Self::flat_params`]. Panics on length mismatch.
    pub fn set_flat_params(&mut self, params: &[f64]) {
        let mut off = 0;
        for layer in &mut self.layers {
            let nw = layer.weights.len();
            layer.weights.copy_from_slice(&params[off..off + nw]);
            off += nw;
            let nb = layer.biases.len();
            layer.biases.copy_from_slice(&params[off..off + nb]);
            off += nb;
        }
        assert_eq!(off, params.len(), "parameter count mismatch");
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }
}
