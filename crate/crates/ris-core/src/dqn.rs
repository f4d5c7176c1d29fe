//! Self-contained deep Q-network: a fully connected ReLU MLP with manual
//! backpropagation, Adam, a FIFO replay buffer, epsilon-greedy action
//! selection, and a binary checkpoint format.

use std::io::Read as _;
use std::path::Path;

use rand::{Rng, RngCore};

use crate::{io, Error, Result};

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

const CHECKPOINT_MAGIC: [u8; 4] = *b"RISQ";
const CHECKPOINT_VERSION: u32 = 1;

/// Hyperparameters of the suppression agent.
#[derive(Debug, Clone)]
pub struct AgentConfig {
    pub gamma: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Target network refresh period, counted in gradient steps.
    pub target_update_interval: usize,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Fraction of the episode budget over which epsilon decays linearly.
    pub epsilon_fraction: f64,
    pub replay_capacity: usize,
    pub hidden_layers: Vec<usize>,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            gamma: 0.98,
            learning_rate: 0.01,
            batch_size: 128,
            target_update_interval: 100,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_fraction: 0.8,
            replay_capacity: 10_000,
            hidden_layers: vec![200, 100, 40],
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma.is_finite() && (0.0..1.0).contains(&self.gamma)) {
            return Err(Error::Config("gamma must lie in [0, 1)".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if self.batch_size == 0 || self.target_update_interval == 0 {
            return Err(Error::Config(
                "batch_size and target_update_interval must be positive".into(),
            ));
        }
        for (name, v) in [
            ("epsilon_start", self.epsilon_start),
            ("epsilon_end", self.epsilon_end),
        ] {
            if !(v.is_finite() && (0.0..=1.0).contains(&v)) {
                return Err(Error::Config(format!("{name} must lie in [0, 1]")));
            }
        }
        if self.epsilon_end > self.epsilon_start {
            return Err(Error::Config("epsilon_end must not exceed epsilon_start".into()));
        }
        if !(self.epsilon_fraction.is_finite() && self.epsilon_fraction > 0.0
            && self.epsilon_fraction <= 1.0)
        {
            return Err(Error::Config("epsilon_fraction must lie in (0, 1]".into()));
        }
        if self.replay_capacity < self.batch_size {
            return Err(Error::Config("replay_capacity must hold one batch".into()));
        }
        if self.hidden_layers.is_empty() || self.hidden_layers.contains(&0) {
            return Err(Error::Config("hidden_layers must be positive and nonempty".into()));
        }
        Ok(())
    }
}

/// Linearly decayed exploration rate for episode `episode` of `episodes`.
pub fn epsilon_at(cfg: &AgentConfig, episode: usize, episodes: usize) -> f64 {
    let span = (cfg.epsilon_fraction * episodes as f64).max(1.0);
    let eps = cfg.epsilon_start
        - (cfg.epsilon_start - cfg.epsilon_end) * episode as f64 / span;
    eps.max(cfg.epsilon_end)
}

/// Fully connected MLP with ReLU hidden activations and a linear output.
/// Weights are row-major: `weights[l][r * in + c]` connects input `c` of
/// layer `l` to output `r`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

impl Mlp {
    fn check_sizes(sizes: &[usize]) -> Result<()> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::Dimension(
                "network needs at least input and output layers of positive width".into(),
            ));
        }
        Ok(())
    }

    /// Xavier-uniform initialization: U(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
    pub fn xavier(sizes: &[usize], rng: &mut impl RngCore) -> Result<Self> {
        Self::check_sizes(sizes)?;
        let mut weights = Vec::with_capacity(sizes.len() - 1);
        let mut biases = Vec::with_capacity(sizes.len() - 1);
        for l in 0..sizes.len() - 1 {
            let (fan_in, fan_out) = (sizes[l], sizes[l + 1]);
            let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let w = (0..fan_in * fan_out)
                .map(|_| (rng.gen::<f64>() * 2.0 - 1.0) * a)
                .collect();
            weights.push(w);
            biases.push(vec![0.0; fan_out]);
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            weights,
            biases,
        })
    }

    /// All-zero network; useful as a deterministic baseline.
    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        Self::check_sizes(sizes)?;
        let weights = (0..sizes.len() - 1)
            .map(|l| vec![0.0; sizes[l] * sizes[l + 1]])
            .collect();
        let biases = (0..sizes.len() - 1).map(|l| vec![0.0; sizes[l + 1]]).collect();
        Ok(Self {
            sizes: sizes.to_vec(),
            weights,
            biases,
        })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_len(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_len(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    /// Activations of every layer, input first, output last. Hidden layers
    /// apply ReLU; the output layer is linear.
    fn forward_full(&self, input: &[f64]) -> Vec<Vec<f64>> {
        debug_assert_eq!(input.len(), self.input_len());
        let mut acts = Vec::with_capacity(self.sizes.len());
        acts.push(input.to_vec());
        for l in 0..self.weights.len() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let prev = &acts[l];
            let w = &self.weights[l];
            let last = l + 1 == self.weights.len();
            let mut out = Vec::with_capacity(n_out);
            for r in 0..n_out {
                let row = &w[r * n_in..(r + 1) * n_in];
                let mut z = self.biases[l][r];
                for (a, b) in row.iter().zip(prev) {
                    z += a * b;
                }
                out.push(if last { z } else { z.max(0.0) });
            }
            acts.push(out);
        }
        acts
    }

    /// Q-values for one state.
    pub fn forward(&self, input: &[f64]) -> Vec<f64> {
        self.forward_full(input).pop().unwrap()
    }
}

/// Index of the maximal Q-value; ties resolve to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Epsilon-greedy action: uniform with probability epsilon, otherwise the
/// greedy argmax. With epsilon <= 0 no random draw is consumed.
pub fn select_action(net: &Mlp, state: &[f64], epsilon: f64, rng: &mut impl Rng) -> usize {
    if epsilon > 0.0 && rng.gen::<f64>() < epsilon {
        rng.gen_range(0..net.output_len())
    } else {
        argmax(&net.forward(state))
    }
}

/// Copies the online network into the target network.
pub fn sync_target(net: &Mlp, target: &mut Mlp) {
    target.clone_from(net);
}

/// One environment transition.
#[derive(Debug, Clone)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub terminal: bool,
}

/// Bounded FIFO replay buffer with uniform sampling without replacement.
#[derive(Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    entries: std::collections::VecDeque<Transition>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity: capacity.max(1),
            entries: std::collections::VecDeque::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Appends a transition, evicting the oldest once full.
    pub fn push(&mut self, t: Transition) {
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(t);
    }

    /// Uniform sample of `batch` distinct transitions via a partial
    /// Fisher-Yates shuffle of the index range.
    pub fn sample(&self, batch: usize, rng: &mut impl Rng) -> Result<Vec<&Transition>> {
        if batch == 0 || batch > self.entries.len() {
            return Err(Error::Dimension(format!(
                "cannot sample {batch} of {}",
                self.entries.len()
            )));
        }
        let mut idx: Vec<usize> = (0..self.entries.len()).collect();
        for i in 0..batch {
            let j = rng.gen_range(i..idx.len());
            idx.swap(i, j);
        }
        Ok(idx[..batch].iter().map(|&i| &self.entries[i]).collect())
    }
}

/// Adam moment estimates mirroring the network layout, plus the shared
/// step counter used for bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m_w: Vec<Vec<f64>>,
    v_w: Vec<Vec<f64>>,
    m_b: Vec<Vec<f64>>,
    v_b: Vec<Vec<f64>>,
    step: u64,
}

impl AdamState {
    pub fn new(net: &Mlp) -> Self {
        let zero_like = |src: &Vec<Vec<f64>>| src.iter().map(|v| vec![0.0; v.len()]).collect();
        Self {
            m_w: zero_like(&net.weights),
            v_w: zero_like(&net.weights),
            m_b: zero_like(&net.biases),
            v_b: zero_like(&net.biases),
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    fn matches(&self, net: &Mlp) -> bool {
        self.m_w.len() == net.weights.len()
            && self
                .m_w
                .iter()
                .zip(&net.weights)
                .all(|(m, w)| m.len() == w.len())
    }
}

fn adam_update(param: &mut [f64], grad: &[f64], m: &mut [f64], v: &mut [f64], lr: f64, t: u64) {
    let bc1 = 1.0 - ADAM_BETA1.powi(t as i32);
    let bc2 = 1.0 - ADAM_BETA2.powi(t as i32);
    for i in 0..param.len() {
        m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * grad[i];
        v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * grad[i] * grad[i];
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        param[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
    }
}

/// Gradients of the mean squared TD error with respect to all parameters,
/// computed by backpropagation. Shared by training and the gradient check.
pub fn batch_gradients(
    net: &Mlp,
    target: &Mlp,
    batch: &[&Transition],
    gamma: f64,
) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>, f64)> {
    if batch.is_empty() {
        return Err(Error::Dimension("training batch is empty".into()));
    }
    let layers = net.weights.len();
    let mut gw: Vec<Vec<f64>> = net.weights.iter().map(|w| vec![0.0; w.len()]).collect();
    let mut gb: Vec<Vec<f64>> = net.biases.iter().map(|b| vec![0.0; b.len()]).collect();
    let mut loss = 0.0;
    let scale = 1.0 / batch.len() as f64;

    for t in batch {
        if t.action >= net.output_len() {
            return Err(Error::OutOfRange(format!("action {} out of range", t.action)));
        }
        let acts = net.forward_full(&t.state);
        let q = acts[layers][t.action];
        let y = if t.terminal {
            t.reward
        } else {
            let next = target.forward(&t.next_state);
            t.reward + gamma * next[argmax(&next)]
        };
        let err = q - y;
        loss += err * err * scale;

        // Output delta is nonzero only at the taken action.
        let mut delta = vec![0.0; net.output_len()];
        delta[t.action] = 2.0 * err * scale;
        for l in (0..layers).rev() {
            let (n_in, n_out) = (net.sizes[l], net.sizes[l + 1]);
            let prev = &acts[l];
            for r in 0..n_out {
                let d = delta[r];
                if d == 0.0 {
                    continue;
                }
                gb[l][r] += d;
                let row = &mut gw[l][r * n_in..(r + 1) * n_in];
                for (g, a) in row.iter_mut().zip(prev) {
                    *g += d * a;
                }
            }
            if l == 0 {
                break;
            }
            let w = &net.weights[l];
            let mut prev_delta = vec![0.0; n_in];
            for r in 0..n_out {
                let d = delta[r];
                if d == 0.0 {
                    continue;
                }
                let row = &w[r * n_in..(r + 1) * n_in];
                for (pd, wv) in prev_delta.iter_mut().zip(row) {
                    *pd += d * wv;
                }
            }
            // ReLU derivative gate: hidden activations are zero exactly
            // where the preactivation was clipped.
            for (pd, &a) in prev_delta.iter_mut().zip(prev) {
                if a <= 0.0 {
                    *pd = 0.0;
                }
            }
            delta = prev_delta;
        }
    }
    Ok((gw, gb, loss))
}

/// One gradient step on the mean squared TD error over the batch, applied
/// with Adam. Returns the pre-update loss.
pub fn train_step(
    net: &mut Mlp,
    target: &Mlp,
    adam: &mut AdamState,
    batch: &[&Transition],
    cfg: &AgentConfig,
) -> Result<f64> {
    if !adam.matches(net) {
        return Err(Error::Dimension("optimizer state does not match network".into()));
    }
    let (gw, gb, loss) = batch_gradients(net, target, batch, cfg.gamma)?;
    adam.step += 1;
    for l in 0..net.weights.len() {
        adam_update(
            &mut net.weights[l],
            &gw[l],
            &mut adam.m_w[l],
            &mut adam.v_w[l],
            cfg.learning_rate,
            adam.step,
        );
        adam_update(
            &mut net.biases[l],
            &gb[l],
            &mut adam.m_b[l],
            &mut adam.v_b[l],
            cfg.learning_rate,
            adam.step,
        );
    }
    Ok(loss)
}

fn push_f64s(out: &mut Vec<u8>, values: &[f64]) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

/// Serializes network and optimizer state: magic "RISQ", version, layer
/// count, per-layer dimensions with row-major weights then biases, the Adam
/// first and second moments in the same layout, and the step counter.
/// All integers and floats are little-endian.
pub fn save_checkpoint(path: &Path, net: &Mlp, adam: &AdamState) -> Result<()> {
    if !adam.matches(net) {
        return Err(Error::Dimension("optimizer state does not match network".into()));
    }
    let mut out = Vec::new();
    out.extend_from_slice(&CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(net.weights.len() as u32).to_le_bytes());
    for l in 0..net.weights.len() {
        let (rows, cols) = (net.sizes[l + 1] as u32, net.sizes[l] as u32);
        out.extend_from_slice(&rows.to_le_bytes());
        out.extend_from_slice(&cols.to_le_bytes());
        push_f64s(&mut out, &net.weights[l]);
        push_f64s(&mut out, &net.biases[l]);
    }
    for l in 0..net.weights.len() {
        push_f64s(&mut out, &adam.m_w[l]);
        push_f64s(&mut out, &adam.m_b[l]);
    }
    for l in 0..net.weights.len() {
        push_f64s(&mut out, &adam.v_w[l]);
        push_f64s(&mut out, &adam.v_b[l]);
    }
    out.extend_from_slice(&adam.step.to_le_bytes());
    io::atomic_write(path, &out)
}

struct Reader<'a> {
    data: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.data.len() < n {
            return Err(Error::Checkpoint("truncated checkpoint".into()));
        }
        let (head, tail) = self.data.split_at(n);
        self.data = tail;
        Ok(head)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n * 8)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

/// Restores a network and optimizer state written by `save_checkpoint`.
pub fn load_checkpoint(path: &Path) -> Result<(Mlp, AdamState)> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    let mut r = Reader { data: &bytes };
    if r.take(4)? != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let layers = r.u32()? as usize;
    if layers == 0 || layers > 64 {
        return Err(Error::Checkpoint(format!("implausible layer count {layers}")));
    }
    let mut sizes = Vec::with_capacity(layers + 1);
    let mut weights = Vec::with_capacity(layers);
    let mut biases = Vec::with_capacity(layers);
    for l in 0..layers {
        let rows = r.u32()? as usize;
        let cols = r.u32()? as usize;
        if rows == 0 || cols == 0 {
            return Err(Error::Checkpoint("zero layer dimension".into()));
        }
        if l == 0 {
            sizes.push(cols);
        } else if sizes[l] != cols {
            return Err(Error::Checkpoint("inconsistent layer chain".into()));
        }
        sizes.push(rows);
        weights.push(r.f64s(rows * cols)?);
        biases.push(r.f64s(rows)?);
    }
    let mut m_w = Vec::with_capacity(layers);
    let mut m_b = Vec::with_capacity(layers);
    for l in 0..layers {
        m_w.push(r.f64s(weights[l].len())?);
        m_b.push(r.f64s(biases[l].len())?);
    }
    let mut v_w = Vec::with_capacity(layers);
    let mut v_b = Vec::with_capacity(layers);
    for l in 0..layers {
        v_w.push(r.f64s(weights[l].len())?);
        v_b.push(r.f64s(biases[l].len())?);
    }
    let step = r.u64()?;
    if !r.data.is_empty() {
        return Err(Error::Checkpoint("trailing data".into()));
    }
    let net = Mlp {
        sizes,
        weights,
        biases,
    };
    let adam = AdamState {
        m_w,
        v_w,
        m_b,
        v_b,
        step,
    };
    Ok((net, adam))
}

/// Central-difference gradient check on random networks and batches:
/// returns the worst relative error between analytic and numeric gradients.
pub fn gradient_check(nets: usize, seed: u64) -> Result<f64> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    for _ in 0..nets {
        let sizes = [
            rng.gen_range(2..5),
            rng.gen_range(3..7),
            rng.gen_range(3..6),
            rng.gen_range(2..5),
        ];
        let mut net = Mlp::xavier(&sizes, &mut rng)?;
        // Random biases so ReLU boundaries are exercised away from zero.
        for b in net.biases.iter_mut().flatten() {
            *b = rng.gen::<f64>() * 0.2 - 0.1;
        }
        let target = net.clone();
        let batch_len = rng.gen_range(2..6);
        let transitions: Vec<Transition> = (0..batch_len)
            .map(|_| Transition {
                state: (0..sizes[0]).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect(),
                action: rng.gen_range(0..sizes[3]),
                reward: rng.gen::<f64>() * 2.0 - 1.0,
                next_state: (0..sizes[0]).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect(),
                terminal: rng.gen_bool(0.5),
            })
            .collect();
        let refs: Vec<&Transition> = transitions.iter().collect();
        let (gw, gb, _) = batch_gradients(&net, &target, &refs, 0.98)?;

        let loss_of = |net: &Mlp| -> f64 {
            let mut loss = 0.0;
            for t in &refs {
                let q = net.forward(&t.state)[t.action];
                let y = if t.terminal {
                    t.reward
                } else {
                    let next = target.forward(&t.next_state);
                    t.reward + 0.98 * next[argmax(&next)]
                };
                loss += (q - y) * (q - y) / refs.len() as f64;
            }
            loss
        };

        let h = 1e-5;
        for l in 0..net.weights.len() {
            for i in 0..net.weights[l].len() {
                let orig = net.weights[l][i];
                net.weights[l][i] = orig + h;
                let up = loss_of(&net);
                net.weights[l][i] = orig - h;
                let down = loss_of(&net);
                net.weights[l][i] = orig;
                let numeric = (up - down) / (2.0 * h);
                let denom = gw[l][i].abs().max(numeric.abs()).max(1e-6);
                worst = worst.max((gw[l][i] - numeric).abs() / denom);
            }
            for i in 0..net.biases[l].len() {
                let orig = net.biases[l][i];
                net.biases[l][i] = orig + h;
                let up = loss_of(&net);
                net.biases[l][i] = orig - h;
                let down = loss_of(&net);
                net.biases[l][i] = orig;
                let numeric = (up - down) / (2.0 * h);
                let denom = gb[l][i].abs().max(numeric.abs()).max(1e-6);
                worst = worst.max((gb[l][i] - numeric).abs() / denom);
            }
        }
    }
    Ok(worst)
}
