//! Learning machinery: greedy/epsilon-greedy selection over masked action
//! values, tabular Q-learning, a replay buffer, a from-scratch multilayer
//! perceptron with exact backpropagation, and double-DQN training.
//!
//! Action masks appear in every argmax/max because the commander's order
//! slots vary by room. The double-DQN bootstrap picks the argmax action
//! with the online network and evaluates it with the slowly-updated target
//! network, which is refreshed by a full copy at a fixed period.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

/// Argmax over the valid actions, ties broken by the lowest action id.
/// `None` when the mask admits nothing.
pub fn greedy_action(values: &[f64], mask: &[bool]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in values.iter().enumerate() {
        if !mask[i] {
            continue;
        }
        match best {
            Some((_, bv)) if v <= bv => {}
            _ => best = Some((i, v)),
        }
    }
    best.map(|(i, _)| i)
}

/// With probability `eps` a uniform draw over the valid actions, otherwise
/// the greedy action.
pub fn epsilon_greedy<R: Rng>(values: &[f64], mask: &[bool], eps: f64, rng: &mut R) -> Option<usize> {
    if eps > 0.0 && rng.gen::<f64>() < eps {
        let valid: Vec<usize> = (0..values.len()).filter(|&i| mask[i]).collect();
        if valid.is_empty() {
            return None;
        }
        return Some(valid[rng.gen_range(0..valid.len())]);
    }
    greedy_action(values, mask)
}

/// Linearly decaying exploration rate.
#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub decay_steps: u64,
    steps_taken: u64,
}

impl EpsilonSchedule {
    pub fn new(start: f64, end: f64, decay_steps: u64) -> Self {
        EpsilonSchedule { start, end, decay_steps, steps_taken: 0 }
    }

    pub fn constant(eps: f64) -> Self {
        EpsilonSchedule::new(eps, eps, 0)
    }

    pub fn current(&self) -> f64 {
        if self.decay_steps == 0 || self.steps_taken >= self.decay_steps {
            return self.end;
        }
        let frac = self.steps_taken as f64 / self.decay_steps as f64;
        self.start + (self.end - self.start) * frac
    }

    /// Value to use for this selection; advances the schedule.
    pub fn advance(&mut self) -> f64 {
        let eps = self.current();
        self.steps_taken += 1;
        eps
    }
}

/// One step of experience with a discrete state key.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularTransition {
    pub key: Vec<i32>,
    pub action: usize,
    pub reward: f64,
    pub next_key: Vec<i32>,
    pub done: bool,
    pub next_mask: Vec<bool>,
}

/// Lookup-table action values with per-pair visit counts. Unvisited pairs
/// read as 0.0 and occupy no storage until touched.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    pub actions: usize,
    map: BTreeMap<Vec<i32>, QRow>,
}

#[derive(Debug, Clone, PartialEq)]
struct QRow {
    values: Vec<f64>,
    visits: Vec<u32>,
}

impl QTable {
    pub fn new(actions: usize) -> Self {
        QTable { actions, map: BTreeMap::new() }
    }

    pub fn values(&self, key: &[i32]) -> Vec<f64> {
        match self.map.get(key) {
            Some(row) => row.values.clone(),
            None => vec![0.0; self.actions],
        }
    }

    pub fn value(&self, key: &[i32], action: usize) -> f64 {
        self.map.get(key).map_or(0.0, |row| row.values[action])
    }

    pub fn visits(&self, key: &[i32], action: usize) -> u32 {
        self.map.get(key).map_or(0, |row| row.visits[action])
    }

    pub fn states(&self) -> usize {
        self.map.len()
    }

    /// Visited (key, action, value, visits) tuples in sorted key order.
    pub fn entries(&self) -> impl Iterator<Item = (&[i32], usize, f64, u32)> {
        self.map.iter().flat_map(|(key, row)| {
            row.visits
                .iter()
                .enumerate()
                .filter(|(_, &n)| n > 0)
                .map(move |(a, &n)| (key.as_slice(), a, row.values[a], n))
        })
    }

    pub fn set(&mut self, key: &[i32], action: usize, value: f64, visits: u32) {
        let actions = self.actions;
        let row = self.map.entry(key.to_vec()).or_insert_with(|| QRow {
            values: vec![0.0; actions],
            visits: vec![0; actions],
        });
        row.values[action] = value;
        row.visits[action] = visits;
    }
}

/// Standard temporal-difference update toward
/// `r + gamma * (1 - d) * max_a' Q(s', a')`, with the max restricted to
/// valid next actions.
pub fn q_update(table: &mut QTable, t: &TabularTransition, alpha: f64, gamma: f64) {
    let bootstrap = if t.done {
        0.0
    } else {
        let next = table.values(&t.next_key);
        greedy_action(&next, &t.next_mask).map_or(0.0, |a| next[a])
    };
    let target = t.reward + gamma * bootstrap;
    let actions = table.actions;
    let row = table.map.entry(t.key.clone()).or_insert_with(|| QRow {
        values: vec![0.0; actions],
        visits: vec![0; actions],
    });
    let q = row.values[t.action];
    row.values[t.action] = q + alpha * (target - q);
    row.visits[t.action] += 1;
}

/// One step of experience with dense observation vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub done: bool,
    pub next_mask: Vec<bool>,
}

/// Fixed-capacity ring buffer; sampling is uniform with replacement.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    cursor: usize,
    total_pushes: u64,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0);
        ReplayBuffer { capacity, items: Vec::new(), cursor: 0, total_pushes: 0 }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn total_pushes(&self) -> u64 {
        self.total_pushes
    }

    pub fn get(&self, i: usize) -> &Transition {
        &self.items[i]
    }

    /// Insert, evicting the oldest entry once at capacity.
    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.cursor] = t;
            self.cursor = (self.cursor + 1) % self.capacity;
        }
        self.total_pushes += 1;
    }

    /// `n` indices drawn uniformly with replacement. Panics when empty or
    /// when asked for more than stored (callers clamp first).
    pub fn sample_indices<R: Rng>(&self, n: usize, rng: &mut R) -> Vec<usize> {
        assert!(n <= self.items.len(), "sampling {n} from a buffer of {}", self.items.len());
        (0..n).map(|_| rng.gen_range(0..self.items.len())).collect()
    }
}

/// Fully-connected network: rectifier hidden layers, identity output.
/// Weights are row-major `[out x in]`, all values 64-bit floats.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub dims: Vec<usize>,
    pub layers: Vec<Layer>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

/// Per-layer post-activation values from a forward pass, kept for backprop.
#[derive(Debug, Clone)]
pub struct MlpActivations {
    /// `activations[0]` is the input; the last entry is the output.
    pub activations: Vec<Vec<f64>>,
}

/// Parameter gradients in the same shapes as [`Mlp`].
#[derive(Debug, Clone)]
pub struct MlpGrads {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Mlp {
    /// Uniform init in ±1/sqrt(fan_in), the usual scale for rectifier
    /// stacks.
    pub fn new<R: Rng>(dims: &[usize], rng: &mut R) -> Self {
        assert!(dims.len() >= 2);
        let mut layers = Vec::with_capacity(dims.len() - 1);
        for w in dims.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = 1.0 / libm::sqrt(fan_in as f64);
            let weights = (0..fan_in * fan_out).map(|_| rng.gen_range(-bound..bound)).collect();
            let biases = vec![0.0; fan_out];
            layers.push(Layer { weights, biases });
        }
        Mlp { dims: dims.to_vec(), layers }
    }

    pub fn zeroed(dims: &[usize]) -> Self {
        let layers = dims
            .windows(2)
            .map(|w| Layer { weights: vec![0.0; w[0] * w[1]], biases: vec![0.0; w[1]] })
            .collect();
        Mlp { dims: dims.to_vec(), layers }
    }

    pub fn input_len(&self) -> usize {
        self.dims[0]
    }

    pub fn output_len(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn forward(&self, input: &[f64]) -> Vec<f64> {
        self.forward_full(input).activations.pop().unwrap()
    }

    pub fn forward_full(&self, input: &[f64]) -> MlpActivations {
        assert_eq!(input.len(), self.input_len(), "input dimension mismatch");
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(input.to_vec());
        for (l, layer) in self.layers.iter().enumerate() {
            let x = &activations[l];
            let (n_in, n_out) = (self.dims[l], self.dims[l + 1]);
            let mut y = vec![0.0; n_out];
            for o in 0..n_out {
                let row = &layer.weights[o * n_in..(o + 1) * n_in];
                let mut acc = layer.biases[o];
                for i in 0..n_in {
                    acc += row[i] * x[i];
                }
                // Rectifier on hidden layers, identity on the output.
                y[o] = if l + 1 < self.layers.len() { acc.max(0.0) } else { acc };
            }
            activations.push(y);
        }
        MlpActivations { activations }
    }

    /// Exact gradients of a scalar loss given `d loss / d output`,
    /// accumulated into `grads`.
    pub fn backward(&self, acts: &MlpActivations, dloss_dout: &[f64], grads: &mut MlpGrads) {
        let mut delta = dloss_dout.to_vec();
        for l in (0..self.layers.len()).rev() {
            let (n_in, n_out) = (self.dims[l], self.dims[l + 1]);
            let x = &acts.activations[l];
            let y = &acts.activations[l + 1];
            // Hidden layers stored post-rectifier: gradient passes only
            // where the unit is active.
            if l + 1 < self.layers.len() {
                for o in 0..n_out {
                    if y[o] <= 0.0 {
                        delta[o] = 0.0;
                    }
                }
            }
            let mut prev_delta = vec![0.0; n_in];
            for o in 0..n_out {
                grads.biases[l][o] += delta[o];
                let row = &self.layers[l].weights[o * n_in..(o + 1) * n_in];
                let grow = &mut grads.weights[l][o * n_in..(o + 1) * n_in];
                for i in 0..n_in {
                    grow[i] += delta[o] * x[i];
                    prev_delta[i] += delta[o] * row[i];
                }
            }
            delta = prev_delta;
        }
    }

    pub fn zero_grads(&self) -> MlpGrads {
        MlpGrads {
            weights: self.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            biases: self.layers.iter().map(|l| vec![0.0; l.biases.len()]).collect(),
        }
    }

    /// Plain gradient descent step with global norm clipping.
    pub fn apply_sgd(&mut self, grads: &MlpGrads, lr: f64, clip_norm: f64) {
        let mut sq = 0.0;
        for g in grads.weights.iter().chain(grads.biases.iter()) {
            for &v in g {
                sq += v * v;
            }
        }
        let norm = libm::sqrt(sq);
        let scale = if clip_norm > 0.0 && norm > clip_norm { clip_norm / norm } else { 1.0 };
        for (l, layer) in self.layers.iter_mut().enumerate() {
            for (w, g) in layer.weights.iter_mut().zip(&grads.weights[l]) {
                *w -= lr * scale * g;
            }
            for (b, g) in layer.biases.iter_mut().zip(&grads.biases[l]) {
                *b -= lr * scale * g;
            }
        }
    }

    /// Flat view of all parameters, layer by layer, weights then biases.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.biases);
        }
        out
    }

    pub fn set_flat_params(&mut self, params: &[f64]) {
        let mut at = 0;
        for l in &mut self.layers {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&params[at..at + nw]);
            at += nw;
            let nb = l.biases.len();
            l.biases.copy_from_slice(&params[at..at + nb]);
            at += nb;
        }
        assert_eq!(at, params.len());
    }
}

/// Double-DQN bootstrap targets for a batch:
/// `r + gamma * (1 - d) * Q_target(s', argmax_a Q_online(s', a))` with
/// invalid next actions masked out of the argmax.
pub fn ddqn_target(batch: &[&Transition], online: &Mlp, target: &Mlp, gamma: f64) -> Vec<f64> {
    batch
        .iter()
        .map(|t| {
            if t.done {
                return t.reward;
            }
            let q_online = online.forward(&t.next_state);
            let pick = greedy_action(&q_online, &t.next_mask)
                .expect("next-state mask admits at least one action");
            let q_target = target.forward(&t.next_state);
            t.reward + gamma * q_target[pick]
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DdqnConfig {
    pub gamma: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub target_update_every: u64,
    pub grad_clip: f64,
}

impl Default for DdqnConfig {
    fn default() -> Self {
        DdqnConfig { gamma: 0.99, lr: 1e-3, batch_size: 32, target_update_every: 500, grad_clip: 10.0 }
    }
}

/// Online/target network pair with its replay buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Ddqn {
    pub online: Mlp,
    pub target: Mlp,
    pub buffer: ReplayBuffer,
    pub cfg: DdqnConfig,
    train_steps: u64,
}

impl Ddqn {
    pub fn new<R: Rng>(dims: &[usize], capacity: usize, cfg: DdqnConfig, rng: &mut R) -> Self {
        let online = Mlp::new(dims, rng);
        let target = online.clone();
        Ddqn { online, target, buffer: ReplayBuffer::new(capacity), cfg, train_steps: 0 }
    }

    pub fn from_net(online: Mlp, capacity: usize, cfg: DdqnConfig) -> Self {
        let target = online.clone();
        Ddqn { online, target, buffer: ReplayBuffer::new(capacity), cfg, train_steps: 0 }
    }

    pub fn train_steps(&self) -> u64 {
        self.train_steps
    }

    pub fn q(&self, state: &[f64]) -> Vec<f64> {
        self.online.forward(state)
    }

    /// Store one transition and run one training step on a batch sampled
    /// from the buffer (clamped to its current size, so training tracks
    /// pushes one-for-one from the very first transition).
    pub fn push_and_train<R: Rng>(&mut self, t: Transition, rng: &mut R) -> f64 {
        self.buffer.push(t);
        self.train_batch(rng)
    }

    /// One gradient step on the mean squared error against the double-DQN
    /// targets; refreshes the target net by full copy at the configured
    /// period. Returns the batch loss.
    pub fn train_batch<R: Rng>(&mut self, rng: &mut R) -> f64 {
        let n = self.cfg.batch_size.min(self.buffer.len());
        assert!(n > 0, "training an empty buffer");
        let idx = self.buffer.sample_indices(n, rng);
        let batch: Vec<&Transition> = idx.iter().map(|&i| self.buffer.get(i)).collect();
        let targets = ddqn_target(&batch, &self.online, &self.target, self.cfg.gamma);

        let mut grads = self.online.zero_grads();
        let mut loss = 0.0;
        for (t, &y) in batch.iter().zip(&targets) {
            let acts = self.online.forward_full(&t.state);
            let q = acts.activations.last().unwrap()[t.action];
            let diff = q - y;
            loss += diff * diff;
            let mut dout = vec![0.0; self.online.output_len()];
            dout[t.action] = 2.0 * diff / n as f64;
            self.online.backward(&acts, &dout, &mut grads);
        }
        loss /= n as f64;
        self.online.apply_sgd(&grads, self.cfg.lr, self.cfg.grad_clip);
        self.train_steps += 1;
        if self.train_steps % self.cfg.target_update_every == 0 {
            self.target = self.online.clone();
        }
        loss
    }
}
