//! PPO actor-critic baseline with a near-goal-first start curriculum.
//!
//! Both networks are small ReLU MLPs with hand-written backprop and Adam.
//! The observation is the agent and goal coordinates (normalized) plus a 5x5
//! occupancy patch around the agent; the action space is the eight compass
//! moves. Advantages are plain return minus critic baseline.

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{CellCoord, Direction, GridMap};
use crate::search::SearchOutcome;

pub const PATCH: i32 = 5;
pub const OBS_LEN: usize = 4 + (PATCH * PATCH) as usize;
pub const ACTIONS: usize = 8;

pub const STEP_REWARD: f64 = -0.01;
pub const COLLISION_REWARD: f64 = -0.2;
pub const GOAL_REWARD: f64 = 1.0;

/// Learning rates at or above this are rejected.
pub const MAX_LR: f64 = 5e-4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RlError {
    #[error("non-finite gradient, update skipped")]
    NonFiniteGradient,
    #[error("greedy rollout did not reach the goal within {0} steps")]
    RolloutDiverged(usize),
    #[error("invalid config: {0}")]
    InvalidConfig(&'static str),
    #[error("checkpoint shape mismatch")]
    BadCheckpoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PpoConfig {
    pub episodes: usize,
    pub max_steps: usize,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub clip_epsilon: f64,
    pub gamma: f64,
    pub hidden_sizes: [usize; 2],
    pub minibatch: usize,
    pub epochs_per_update: usize,
    /// Episodes collected per update.
    pub episodes_per_update: usize,
    pub entropy_coef: f64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            episodes: 2000,
            max_steps: 200,
            actor_lr: 3e-4,
            critic_lr: 3e-4,
            clip_epsilon: 0.2,
            gamma: 0.99,
            hidden_sizes: [64, 64],
            minibatch: 64,
            epochs_per_update: 4,
            episodes_per_update: 4,
            entropy_coef: 0.01,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<(), RlError> {
        if !(self.actor_lr > 0.0 && self.actor_lr < MAX_LR && self.critic_lr > 0.0 && self.critic_lr < MAX_LR) {
            return Err(RlError::InvalidConfig("learning rates must lie in (0, 5e-4)"));
        }
        if !(self.clip_epsilon > 0.0 && self.clip_epsilon < 1.0) {
            return Err(RlError::InvalidConfig("clip epsilon must lie in (0, 1)"));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(RlError::InvalidConfig("gamma must lie in [0, 1]"));
        }
        if self.max_steps == 0 || self.minibatch == 0 || self.episodes_per_update == 0 || self.hidden_sizes.contains(&0)
        {
            return Err(RlError::InvalidConfig("sizes must be positive"));
        }
        Ok(())
    }
}

/// Fully connected network, ReLU between layers, linear output.
/// Parameters are stored flat, layer by layer, weights (row-major, out x in)
/// followed by biases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

struct Tape {
    /// Input of every layer; entry 0 is the network input.
    inputs: Vec<Vec<f64>>,
}

impl Mlp {
    /// He-uniform hidden layers; the output layer is scaled by `out_scale`.
    pub fn new(sizes: &[usize], out_scale: f64, rng: &mut impl Rng) -> Self {
        let mut params = Vec::new();
        for (l, w) in sizes.windows(2).enumerate() {
            let (fan_in, fan_out) = (w[0], w[1]);
            let mut limit = libm::sqrt(6.0 / fan_in as f64);
            if l + 2 == sizes.len() {
                limit *= out_scale;
            }
            params.extend((0..fan_in * fan_out).map(|_| rng.gen_range(-limit..=limit)));
            params.extend(core::iter::repeat(0.0).take(fan_out));
        }
        Self { sizes: sizes.to_vec(), params }
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.run(x, None)
    }

    fn run(&self, x: &[f64], mut tape: Option<&mut Tape>) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.sizes[0]);
        let mut cur = x.to_vec();
        let mut off = 0;
        let layers = self.sizes.len() - 1;
        for l in 0..layers {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let w = &self.params[off..off + n_in * n_out];
            let b = &self.params[off + n_in * n_out..off + n_in * n_out + n_out];
            let mut next: Vec<f64> = (0..n_out)
                .map(|o| b[o] + w[o * n_in..(o + 1) * n_in].iter().zip(&cur).map(|(a, b)| a * b).sum::<f64>())
                .collect();
            if l + 1 < layers {
                next.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            if let Some(t) = tape.as_deref_mut() {
                t.inputs.push(core::mem::replace(&mut cur, next));
            } else {
                cur = next;
            }
            off += n_in * n_out + n_out;
        }
        cur
    }

    fn forward_tape(&self, x: &[f64]) -> (Vec<f64>, Tape) {
        let mut tape = Tape { inputs: Vec::with_capacity(self.sizes.len()) };
        let out = self.run(x, Some(&mut tape));
        (out, tape)
    }

    /// Accumulate `d loss / d params` into `grad` given `d loss / d output`.
    fn backward(&self, tape: &Tape, dout: &[f64], grad: &mut [f64]) {
        let layers = self.sizes.len() - 1;
        let mut offsets = Vec::with_capacity(layers);
        let mut off = 0;
        for l in 0..layers {
            offsets.push(off);
            off += self.sizes[l] * self.sizes[l + 1] + self.sizes[l + 1];
        }
        let mut delta = dout.to_vec();
        for l in (0..layers).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let off = offsets[l];
            let input = &tape.inputs[l];
            for o in 0..n_out {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                let row = &mut grad[off + o * n_in..off + (o + 1) * n_in];
                row.iter_mut().zip(input).for_each(|(g, x)| *g += d * x);
                grad[off + n_in * n_out + o] += d;
            }
            if l == 0 {
                break;
            }
            let w = &self.params[off..off + n_in * n_out];
            delta = (0..n_in)
                .map(|i| {
                    // input[i] is a ReLU output: zero means the unit was inactive
                    if input[i] <= 0.0 {
                        0.0
                    } else {
                        (0..n_out).map(|o| w[o * n_in + i] * delta[o]).sum()
                    }
                })
                .collect();
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    lr: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    pub fn new(lr: f64, n: usize) -> Self {
        Self { lr, m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - libm::pow(Self::B1, self.t as f64);
        let c2 = 1.0 - libm::pow(Self::B2, self.t as f64);
        for i in 0..params.len() {
            self.m[i] = Self::B1 * self.m[i] + (1.0 - Self::B1) * grad[i];
            self.v[i] = Self::B2 * self.v[i] + (1.0 - Self::B2) * grad[i] * grad[i];
            params[i] -= self.lr * (self.m[i] / c1) / (libm::sqrt(self.v[i] / c2) + Self::EPS);
        }
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| libm::exp(z - max)).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    pub actor: Mlp,
    pub critic: Mlp,
}

impl Policy {
    pub fn new(config: &PpoConfig, rng: &mut impl Rng) -> Self {
        let [h1, h2] = config.hidden_sizes;
        Self {
            actor: Mlp::new(&[OBS_LEN, h1, h2, ACTIONS], 0.01, rng),
            critic: Mlp::new(&[OBS_LEN, h1, h2, 1], 1.0, rng),
        }
    }

    pub fn action_probs(&self, obs: &[f64]) -> Vec<f64> {
        softmax(&self.actor.forward(obs))
    }

    pub fn value(&self, obs: &[f64]) -> f64 {
        self.critic.forward(obs)[0]
    }

    /// Most probable action, ties to the lowest index.
    pub fn greedy_action(&self, obs: &[f64]) -> usize {
        let logits = self.actor.forward(obs);
        let mut best = 0;
        for (i, &z) in logits.iter().enumerate() {
            if z > logits[best] {
                best = i;
            }
        }
        best
    }

    pub fn is_finite(&self) -> bool {
        self.actor.params.iter().chain(&self.critic.params).all(|p| p.is_finite())
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            version: Checkpoint::VERSION,
            actor: LayerParams::split(&self.actor),
            critic: LayerParams::split(&self.critic),
        }
    }

    pub fn from_checkpoint(c: &Checkpoint) -> Result<Self, RlError> {
        if c.version != Checkpoint::VERSION {
            return Err(RlError::BadCheckpoint);
        }
        let actor = LayerParams::join(&c.actor)?;
        let critic = LayerParams::join(&c.critic)?;
        let shape_ok = |m: &Mlp, out: usize| m.sizes.first() == Some(&OBS_LEN) && m.sizes.last() == Some(&out);
        if !shape_ok(&actor, ACTIONS) || !shape_ok(&critic, 1) {
            return Err(RlError::BadCheckpoint);
        }
        Ok(Self { actor, critic })
    }
}

/// One dense layer with its shape header.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    pub rows: usize,
    pub cols: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl LayerParams {
    fn split(m: &Mlp) -> Vec<LayerParams> {
        let mut off = 0;
        m.sizes
            .windows(2)
            .map(|w| {
                let (cols, rows) = (w[0], w[1]);
                let weights = m.params[off..off + rows * cols].to_vec();
                let bias = m.params[off + rows * cols..off + rows * cols + rows].to_vec();
                off += rows * cols + rows;
                LayerParams { rows, cols, weights, bias }
            })
            .collect()
    }

    fn join(layers: &[LayerParams]) -> Result<Mlp, RlError> {
        let first = layers.first().ok_or(RlError::BadCheckpoint)?;
        let mut sizes = vec![first.cols];
        let mut params = Vec::new();
        for l in layers {
            if l.cols != *sizes.last().unwrap() || l.weights.len() != l.rows * l.cols || l.bias.len() != l.rows {
                return Err(RlError::BadCheckpoint);
            }
            sizes.push(l.rows);
            params.extend_from_slice(&l.weights);
            params.extend_from_slice(&l.bias);
        }
        Ok(Mlp { sizes, params })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub actor: Vec<LayerParams>,
    pub critic: Vec<LayerParams>,
}

impl Checkpoint {
    pub const VERSION: u32 = 1;
}

fn norm(v: u32, extent: u32) -> f64 {
    if extent <= 1 {
        0.0
    } else {
        v as f64 / (extent - 1) as f64
    }
}

/// Agent and goal coordinates scaled to [0, 1], then the 5x5 patch around
/// the agent (1 = obstacle or off-map), row-major.
pub fn observe(map: &GridMap, agent: CellCoord, goal: CellCoord) -> Vec<f64> {
    let (w, h) = (map.width(), map.height());
    let mut obs = Vec::with_capacity(OBS_LEN);
    obs.extend([norm(agent.x, w), norm(agent.y, h), norm(goal.x, w), norm(goal.y, h)]);
    let r = PATCH / 2;
    for dy in -r..=r {
        for dx in -r..=r {
            let free = agent.offset(dx, dy).is_some_and(|c| map.is_free(c));
            obs.push(if free { 0.0 } else { 1.0 });
        }
    }
    obs
}

/// Chebyshev radius of the start region: 1 at episode 0, growing linearly to
/// the larger map dimension at 60% of training, then held.
pub fn curriculum_radius(episode: usize, config: &PpoConfig, map: &GridMap) -> u32 {
    let max_r = map.width().max(map.height());
    let ramp = config.episodes as f64 * 0.6;
    if episode as f64 >= ramp {
        return max_r;
    }
    let frac = episode as f64 / ramp;
    (1 + libm::floor(frac * (max_r - 1) as f64) as u32).min(max_r)
}

/// Uniformly sampled free start cell within the current curriculum radius of
/// the goal (the goal itself excluded).
pub fn curriculum_start(episode: usize, config: &PpoConfig, map: &GridMap, rng: &mut impl Rng) -> CellCoord {
    let r = curriculum_radius(episode, config, map);
    let goal = map.goal();
    let pool: Vec<CellCoord> = map.free_cells().filter(|&c| c != goal && c.chebyshev(goal) <= r).collect();
    pool.choose(rng).copied().unwrap_or(map.start())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub done: bool,
    pub logp: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub steps: Vec<Transition>,
    pub episode_return: f64,
    pub reached_goal: bool,
}

/// Apply one action. Blocked moves (walls, edges, corner cuts) leave the
/// agent in place.
pub fn env_step(map: &GridMap, s: CellCoord, action: usize) -> (CellCoord, f64, bool) {
    let dir = Direction::from_index(action).expect("action index < 8");
    match map.step(s, dir) {
        None => (s, COLLISION_REWARD, false),
        Some(n) if n == map.goal() => (n, GOAL_REWARD, true),
        Some(n) => (n, STEP_REWARD, false),
    }
}

fn sample(probs: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

pub fn run_episode(
    policy: &Policy,
    map: &GridMap,
    start: CellCoord,
    max_steps: usize,
    rng: &mut impl Rng,
) -> Trajectory {
    let mut traj = Trajectory::default();
    let mut s = start;
    for _ in 0..max_steps {
        let obs = observe(map, s, map.goal());
        let probs = policy.action_probs(&obs);
        let action = sample(&probs, rng);
        let (next, reward, done) = env_step(map, s, action);
        traj.episode_return += reward;
        traj.steps.push(Transition { obs, action, reward, done, logp: libm::log(probs[action]) });
        s = next;
        if done {
            traj.reached_goal = true;
            break;
        }
    }
    traj
}

/// Training sample with a fixed advantage and return target.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub obs: Vec<f64>,
    pub action: usize,
    pub old_logp: f64,
    pub advantage: f64,
    pub ret: f64,
}

/// Clipped surrogate loss (negated, to minimize) minus the entropy bonus,
/// averaged over `samples`, with its gradient and the clip fraction.
pub fn actor_loss_grad(actor: &Mlp, samples: &[Sample], clip: f64, entropy_coef: f64) -> (f64, Vec<f64>, f64) {
    let n = samples.len() as f64;
    let mut grad = vec![0.0; actor.params.len()];
    let mut loss = 0.0;
    let mut clipped = 0usize;
    for s in samples {
        let (logits, tape) = actor.forward_tape(&s.obs);
        let p = softmax(&logits);
        let logp = libm::log(p[s.action]);
        let ratio = libm::exp(logp - s.old_logp);
        if (ratio - 1.0).abs() > clip {
            clipped += 1;
        }
        let unclipped = ratio * s.advantage;
        let bounded = ratio.clamp(1.0 - clip, 1.0 + clip) * s.advantage;
        let entropy: f64 = -p.iter().map(|&q| if q > 0.0 { q * libm::log(q) } else { 0.0 }).sum::<f64>();
        loss += -unclipped.min(bounded) / n - entropy_coef * entropy / n;

        let mut dlogits = vec![0.0; logits.len()];
        // the min picks the unclipped term: gradient flows through the ratio
        if unclipped <= bounded {
            let dlogp = -ratio * s.advantage / n;
            for (j, d) in dlogits.iter_mut().enumerate() {
                let onehot = if j == s.action { 1.0 } else { 0.0 };
                *d += dlogp * (onehot - p[j]);
            }
        }
        if entropy_coef != 0.0 {
            for (j, d) in dlogits.iter_mut().enumerate() {
                let dh = -p[j] * (libm::log(p[j]) + entropy);
                *d -= entropy_coef * dh / n;
            }
        }
        actor.backward(&tape, &dlogits, &mut grad);
    }
    (loss, grad, clipped as f64 / n)
}

/// Half mean squared return error and its gradient.
pub fn critic_loss_grad(critic: &Mlp, samples: &[Sample]) -> (f64, Vec<f64>) {
    let n = samples.len() as f64;
    let mut grad = vec![0.0; critic.params.len()];
    let mut loss = 0.0;
    for s in samples {
        let (out, tape) = critic.forward_tape(&s.obs);
        let diff = out[0] - s.ret;
        loss += 0.5 * diff * diff / n;
        critic.backward(&tape, &[diff / n], &mut grad);
    }
    (loss, grad)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct UpdateStats {
    pub actor_loss: f64,
    pub critic_loss: f64,
    pub clip_fraction: f64,
}

/// Policy plus optimizer state.
#[derive(Debug, Clone)]
pub struct Learner {
    pub policy: Policy,
    actor_opt: Adam,
    critic_opt: Adam,
}

impl Learner {
    pub fn new(policy: Policy, config: &PpoConfig) -> Self {
        let actor_opt = Adam::new(config.actor_lr, policy.actor.params.len());
        let critic_opt = Adam::new(config.critic_lr, policy.critic.params.len());
        Self { policy, actor_opt, critic_opt }
    }
}

/// Discounted return-to-go per step; advantage is return minus critic value.
pub fn build_samples(policy: &Policy, batch: &[Trajectory], gamma: f64) -> Vec<Sample> {
    let mut out = Vec::new();
    for traj in batch {
        let mut ret = 0.0;
        let mut rets = vec![0.0; traj.steps.len()];
        for (i, t) in traj.steps.iter().enumerate().rev() {
            ret = t.reward + gamma * ret;
            rets[i] = ret;
        }
        for (t, ret) in traj.steps.iter().zip(rets) {
            let advantage = ret - policy.value(&t.obs);
            out.push(Sample { obs: t.obs.clone(), action: t.action, old_logp: t.logp, advantage, ret });
        }
    }
    out
}

/// Several epochs of minibatch PPO over `samples`. On a non-finite gradient
/// the learner is restored to its state before the call.
pub fn ppo_update(
    learner: &mut Learner,
    samples: &[Sample],
    config: &PpoConfig,
    rng: &mut impl Rng,
) -> Result<UpdateStats, RlError> {
    if samples.is_empty() {
        return Ok(UpdateStats::default());
    }
    let backup = learner.clone();
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut stats = UpdateStats::default();
    let mut batches = 0usize;
    for _ in 0..config.epochs_per_update.max(1) {
        order.shuffle(rng);
        for chunk in order.chunks(config.minibatch) {
            let mb: Vec<Sample> = chunk.iter().map(|&i| samples[i].clone()).collect();
            let (al, ag, cf) = actor_loss_grad(&learner.policy.actor, &mb, config.clip_epsilon, config.entropy_coef);
            let (cl, cg) = critic_loss_grad(&learner.policy.critic, &mb);
            if !ag.iter().chain(&cg).all(|g| g.is_finite()) {
                *learner = backup;
                return Err(RlError::NonFiniteGradient);
            }
            learner.actor_opt.step(&mut learner.policy.actor.params, &ag);
            learner.critic_opt.step(&mut learner.policy.critic.params, &cg);
            stats.actor_loss += al;
            stats.critic_loss += cl;
            stats.clip_fraction += cf;
            batches += 1;
        }
    }
    let b = batches as f64;
    Ok(UpdateStats {
        actor_loss: stats.actor_loss / b,
        critic_loss: stats.critic_loss / b,
        clip_fraction: stats.clip_fraction / b,
    })
}

/// Per-episode learning curves.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LearningCurves {
    pub steps: Vec<usize>,
    pub score: Vec<f64>,
    pub reached: Vec<bool>,
    /// Updates skipped because of a non-finite gradient.
    pub skipped_updates: usize,
}

impl LearningCurves {
    /// Fraction of the last `n` episodes that reached the goal.
    pub fn success_rate_last(&self, n: usize) -> f64 {
        let tail = &self.reached[self.reached.len().saturating_sub(n)..];
        if tail.is_empty() {
            return 0.0;
        }
        tail.iter().filter(|r| **r).count() as f64 / tail.len() as f64
    }

    fn mean(v: &[f64]) -> f64 {
        if v.is_empty() {
            0.0
        } else {
            v.iter().sum::<f64>() / v.len() as f64
        }
    }

    pub fn mean_score_first(&self, n: usize) -> f64 {
        Self::mean(&self.score[..n.min(self.score.len())])
    }

    pub fn mean_score_last(&self, n: usize) -> f64 {
        Self::mean(&self.score[self.score.len().saturating_sub(n)..])
    }
}

pub fn train(map: &GridMap, config: &PpoConfig, seed: u64) -> Result<(Policy, LearningCurves), RlError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut learner = Learner::new(Policy::new(config, &mut rng), config);
    let mut curves = LearningCurves::default();
    let mut buffer: Vec<Trajectory> = Vec::with_capacity(config.episodes_per_update);
    for ep in 0..config.episodes {
        let start = curriculum_start(ep, config, map, &mut rng);
        let traj = run_episode(&learner.policy, map, start, config.max_steps, &mut rng);
        curves.steps.push(traj.steps.len());
        curves.score.push(traj.episode_return);
        curves.reached.push(traj.reached_goal);
        buffer.push(traj);
        if buffer.len() == config.episodes_per_update || ep + 1 == config.episodes {
            let samples = build_samples(&learner.policy, &buffer, config.gamma);
            if ppo_update(&mut learner, &samples, config, &mut rng) == Err(RlError::NonFiniteGradient) {
                curves.skipped_updates += 1;
            }
            buffer.clear();
        }
    }
    Ok((learner.policy, curves))
}

/// Deterministic argmax rollout from the map start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rollout {
    pub path: Vec<CellCoord>,
    pub visited: BTreeSet<CellCoord>,
}

impl Rollout {
    /// Search-outcome view for the metrics layer: visited cells count as accessed.
    pub fn to_outcome(&self) -> SearchOutcome {
        SearchOutcome {
            path: self.path.clone(),
            path_cost: crate::search::path_cost(&self.path),
            accessed: self.visited.clone(),
            closed_final: self.visited.clone(),
            expansions: self.path.clone(),
            ..Default::default()
        }
    }
}

/// Blocked moves leave the agent in place and are not recorded as path steps.
pub fn rollout_path(policy: &Policy, map: &GridMap, max_steps: usize) -> Result<Rollout, RlError> {
    let limit = 4 * max_steps;
    let mut s = map.start();
    let mut path = vec![s];
    let mut visited = BTreeSet::from([s]);
    for _ in 0..limit {
        if s == map.goal() {
            return Ok(Rollout { path, visited });
        }
        let action = policy.greedy_action(&observe(map, s, map.goal()));
        let (next, _, _) = env_step(map, s, action);
        if next != s {
            s = next;
            path.push(s);
            visited.insert(s);
        }
    }
    if s == map.goal() {
        Ok(Rollout { path, visited })
    } else {
        Err(RlError::RolloutDiverged(limit))
    }
}
