//! Deep Q-learning attacker.
//!
//! The state is the mean embedding of the nodes not yet selected, an action
//! is a node, and the reward is the weighted power and road connectivity
//! decrease caused by damaging it. Training uses experience replay, a target
//! network synchronised every few steps, and an epsilon-greedy policy whose
//! epsilon decays linearly.

mod qnet;
mod replay;

use std::io::Write;
use std::path::Path;

use fixedbitset::FixedBitSet;
use log::info;
use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use qnet::{
    action_features, argmax_alive, pooled_state, q_values, select_action, td_loss, td_loss_grad, QGrads, QNetParams,
};
pub use replay::{ReplayBuffer, Transition};

use crate::cascade::{Episode, RewardWeights};
use crate::embed::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::graph::{CoupledGraph, NodeId};
use crate::report::{AttackRecorder, AttackReport};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentConfig {
    /// Nodes selected per episode.
    pub budget: usize,
    pub gamma: f64,
    pub eps_start: f64,
    pub eps_end: f64,
    /// Environment steps over which epsilon decays; `None` means half of training.
    pub eps_decay_steps: Option<usize>,
    pub buffer_size: usize,
    pub batch_size: usize,
    /// Gradient steps between target network syncs.
    pub target_sync: usize,
    pub lr: f64,
    /// Gradients with a larger global norm are rescaled to this norm.
    pub max_grad_norm: f64,
    pub episodes: usize,
    pub seed: u64,
    /// `None` normalises each reward term by its intact total.
    pub weights: Option<RewardWeights>,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            budget: 10,
            gamma: 0.99,
            eps_start: 1.0,
            eps_end: 0.05,
            eps_decay_steps: None,
            buffer_size: 100_000,
            batch_size: 64,
            target_sync: 100,
            lr: 1e-3,
            max_grad_norm: 10.0,
            episodes: 500,
            seed: 1,
            weights: None,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.budget == 0 {
            return bad("budget must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.eps_start) || !(0.0..=1.0).contains(&self.eps_end) {
            return bad("epsilon bounds must lie in [0, 1]");
        }
        if self.batch_size == 0 || self.buffer_size < self.batch_size {
            return bad("need 1 <= batch_size <= buffer_size");
        }
        if self.target_sync == 0 {
            return bad("target_sync must be positive");
        }
        if !(self.lr >= 0.0) || !(self.max_grad_norm > 0.0) {
            return bad("lr must be nonnegative and max_grad_norm positive");
        }
        if let Some(w) = &self.weights {
            w.validate()?;
        }
        Ok(())
    }

    pub fn weights_for(&self, g: &CoupledGraph) -> RewardWeights {
        self.weights.unwrap_or_else(|| RewardWeights::normalized(g))
    }

    /// Linear decay from `eps_start` to `eps_end`.
    pub fn epsilon(&self, step: usize) -> f64 {
        let span = self
            .eps_decay_steps
            .unwrap_or(self.episodes * self.budget / 2)
            .max(1);
        if step >= span {
            return self.eps_end;
        }
        let frac = step as f64 / span as f64;
        self.eps_start + (self.eps_end - self.eps_start) * frac
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub episode: usize,
    pub cum_reward: f64,
    /// Mean TD loss over the episode's updates; `None` before the buffer fills a batch.
    pub loss_mean: Option<f64>,
    /// Epsilon in effect at the episode's first step.
    pub epsilon: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingLog {
    pub episodes: Vec<EpisodeLog>,
}

impl TrainingLog {
    /// Columns: episode, cum_reward, loss_mean, epsilon.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["episode", "cum_reward", "loss_mean", "epsilon"])?;
        for e in &self.episodes {
            w.write_record([
                e.episode.to_string(),
                e.cum_reward.to_string(),
                e.loss_mean.map(|l| l.to_string()).unwrap_or_default(),
                e.epsilon.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

fn check_inputs(g: &CoupledGraph, z: &EmbeddingMatrix) -> Result<()> {
    if z.node_count() != g.node_count() {
        return Err(Error::Shape {
            what: "embeddings",
            expected: format!("{} nodes", g.node_count()),
            found: format!("{} nodes", z.node_count()),
        });
    }
    Ok(())
}

fn alive_bits(alive: &[bool]) -> FixedBitSet {
    let mut bits = FixedBitSet::with_capacity(alive.len());
    for (v, _) in alive.iter().enumerate().filter(|(_, a)| **a) {
        bits.insert(v);
    }
    bits
}

/// Running mean of the embeddings of unselected nodes.
struct PooledState {
    sum: Array1<f64>,
    remaining: usize,
}

impl PooledState {
    fn new(z: &Array2<f64>) -> Self {
        PooledState {
            sum: z.sum_axis(ndarray::Axis(0)),
            remaining: z.nrows(),
        }
    }

    fn remove(&mut self, z: &Array2<f64>, v: NodeId) {
        self.sum -= &z.row(v);
        self.remaining -= 1;
    }

    fn value(&self) -> Array1<f64> {
        if self.remaining == 0 {
            Array1::zeros(self.sum.len())
        } else {
            &self.sum / self.remaining as f64
        }
    }
}

/// Trains the value network against the cascade environment.
pub fn train(g: &CoupledGraph, z: &EmbeddingMatrix, cfg: &AgentConfig) -> Result<(QNetParams, TrainingLog)> {
    cfg.validate()?;
    check_inputs(g, z)?;
    let weights = cfg.weights_for(g);
    let zm = z.node_major();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = QNetParams::init(z.dim(), &mut rng);
    let mut target_phi = action_features(zm, &params.target1, &params.target2);
    let mut buffer = ReplayBuffer::new(cfg.buffer_size);
    let mut log = TrainingLog::default();
    let mut step = 0usize;
    let mut updates = 0usize;

    for episode in 0..cfg.episodes {
        let mut env = Episode::new(g);
        let mut pooled = PooledState::new(zm);
        let mut s = pooled.value();
        let mut cum_reward = 0.0;
        let mut losses = Vec::new();
        let epsilon0 = cfg.epsilon(step);

        for k in 0..cfg.budget {
            let alive = env.states().alive_mask();
            if !alive.iter().any(|a| *a) {
                break;
            }
            let phi = action_features(zm, &params.theta1, &params.theta2);
            let scores = qnet::masked_scores(&phi, &s, &alive);
            let action = select_action(&scores, cfg.epsilon(step), &mut rng, &alive)?;
            let r = env.damage(action)?.reward(&weights);
            cum_reward += r;
            pooled.remove(zm, action);
            let s_next = pooled.value();
            let next_alive = alive_bits(&env.states().alive_mask());
            let done = k + 1 == cfg.budget || next_alive.is_clear();
            buffer.push(Transition {
                s: std::mem::replace(&mut s, s_next.clone()),
                action,
                r,
                s_next,
                done,
                next_alive,
            });
            step += 1;

            if buffer.len() >= cfg.batch_size {
                let batch = buffer.sample(cfg.batch_size, &mut rng);
                let (loss, mut grads) = qnet::td_loss_grad_with(zm, &batch, &params, cfg.gamma, &target_phi)?;
                if !loss.is_finite() {
                    return Err(Error::Diverged {
                        what: "q-network training",
                        epoch: episode,
                    });
                }
                let norm = grads.norm();
                if norm > cfg.max_grad_norm {
                    let k = cfg.max_grad_norm / norm;
                    grads.theta1 *= k;
                    grads.theta2 *= k;
                }
                params.theta1.scaled_add(-cfg.lr, &grads.theta1);
                params.theta2.scaled_add(-cfg.lr, &grads.theta2);
                losses.push(loss);
                updates += 1;
                if updates.is_multiple_of(cfg.target_sync) {
                    params.sync();
                    target_phi = action_features(zm, &params.target1, &params.target2);
                }
            }
            if done {
                break;
            }
        }
        let loss_mean = (!losses.is_empty()).then(|| losses.iter().sum::<f64>() / losses.len() as f64);
        if episode % 50 == 0 || episode + 1 == cfg.episodes {
            info!("episode {episode}: reward {cum_reward:.4}, loss {loss_mean:?}, epsilon {epsilon0:.3}");
        }
        log.episodes.push(EpisodeLog {
            episode,
            cum_reward,
            loss_mean,
            epsilon: epsilon0,
        });
    }
    if !params.is_finite() {
        return Err(Error::Diverged {
            what: "q-network training",
            epoch: cfg.episodes,
        });
    }
    Ok((params, log))
}

/// One epsilon = 0 episode of `budget` selections.
pub fn greedy_attack(
    g: &CoupledGraph,
    z: &EmbeddingMatrix,
    params: &QNetParams,
    budget: usize,
    weights: RewardWeights,
) -> Result<AttackReport> {
    greedy_attack_named("agent", g, z, params, budget, weights)
}

pub(crate) fn greedy_attack_named(
    method: &str,
    g: &CoupledGraph,
    z: &EmbeddingMatrix,
    params: &QNetParams,
    budget: usize,
    weights: RewardWeights,
) -> Result<AttackReport> {
    check_inputs(g, z)?;
    params.check_dim(z)?;
    let zm = z.node_major();
    let phi = action_features(zm, &params.theta1, &params.theta2);
    let mut rec = AttackRecorder::new(method, g, weights);
    let mut pooled = PooledState::new(zm);
    for _ in 0..budget {
        let alive = rec.episode().states().alive_mask();
        let scores = qnet::masked_scores(&phi, &pooled.value(), &alive);
        let Some(v) = argmax_alive(&scores, &alive) else {
            return Err(Error::BudgetTooLarge {
                requested: budget,
                available: rec.episode().states().len() - alive.iter().filter(|a| !**a).count(),
            });
        };
        rec.apply(v)?;
        pooled.remove(zm, v);
    }
    Ok(rec.finish())
}
