//! Reference attack strategies.
//!
//! All of them emit the same [`AttackReport`] as the learned agent. Static
//! rankings (degree, classifier score) skip nodes that an earlier removal
//! already took down, so every report has exactly `budget` removals.

use std::collections::VecDeque;

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cascade::{Episode, RewardWeights};
use crate::embed::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::graph::{CoupledGraph, NodeId, NodeStates};
use crate::report::{AttackRecorder, AttackReport};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GdmConfig {
    /// Nodes whose single-node damage is simulated to produce labels.
    pub sample_count: usize,
    /// Fraction of the sample, by reward, labelled positive.
    pub positive_quantile: f64,
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for GdmConfig {
    fn default() -> Self {
        GdmConfig {
            sample_count: 300,
            positive_quantile: 0.1,
            epochs: 500,
            lr: 0.05,
            seed: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BaselineKind {
    De,
    Ci { radius: usize },
    Gdm(GdmConfig),
    Random { seed: u64 },
}

impl BaselineKind {
    pub fn name(&self) -> &'static str {
        match self {
            BaselineKind::De => "de",
            BaselineKind::Ci { .. } => "ci",
            BaselineKind::Gdm(_) => "gdm",
            BaselineKind::Random { .. } => "random",
        }
    }
}

/// Runs `kind`; `z` is required for GDM only.
pub fn run_baseline(
    g: &CoupledGraph,
    kind: &BaselineKind,
    budget: usize,
    z: Option<&EmbeddingMatrix>,
    weights: RewardWeights,
) -> Result<AttackReport> {
    match kind {
        BaselineKind::De => de_attack(g, budget, weights),
        BaselineKind::Ci { radius } => ci_attack(g, budget, *radius, weights),
        BaselineKind::Gdm(cfg) => {
            let z = z.ok_or_else(|| Error::MissingArtifact("gdm needs node embeddings (run `embed` first)".into()))?;
            gdm_attack(g, z, budget, cfg, weights)
        }
        BaselineKind::Random { seed } => random_attack(g, budget, *seed, weights),
    }
}

fn check_budget(g: &CoupledGraph, budget: usize) -> Result<()> {
    if budget > g.node_count() {
        return Err(Error::BudgetTooLarge {
            requested: budget,
            available: g.node_count(),
        });
    }
    Ok(())
}

/// Removes nodes in `order`, skipping ones that are no longer Normal.
fn attack_in_order(
    method: &str,
    g: &CoupledGraph,
    order: impl IntoIterator<Item = NodeId>,
    budget: usize,
    weights: RewardWeights,
) -> Result<AttackReport> {
    let mut rec = AttackRecorder::new(method, g, weights);
    let mut taken = 0;
    for v in order {
        if taken == budget {
            break;
        }
        if rec.episode().states().is_normal(v) {
            rec.apply(v)?;
            taken += 1;
        }
    }
    if taken < budget {
        return Err(Error::BudgetTooLarge {
            requested: budget,
            available: taken,
        });
    }
    Ok(rec.finish())
}

/// Node ids sorted by `key` descending, lowest id first on ties.
fn rank_desc(keys: &[f64]) -> Vec<NodeId> {
    let mut order: Vec<NodeId> = (0..keys.len()).collect();
    order.sort_by(|&a, &b| keys[b].total_cmp(&keys[a]).then(a.cmp(&b)));
    order
}

/// Highest degree first, ranked once on the intact graph.
pub fn de_attack(g: &CoupledGraph, budget: usize, weights: RewardWeights) -> Result<AttackReport> {
    check_budget(g, budget)?;
    let degrees: Vec<f64> = (0..g.node_count()).map(|v| g.degree_unchecked(v) as f64).collect();
    attack_in_order("de", g, rank_desc(&degrees), budget, weights)
}

/// Alive-neighbour lists over all layers.
fn alive_adjacency(g: &CoupledGraph, states: &NodeStates) -> Vec<Vec<NodeId>> {
    let mut adj = g.adjacency();
    for (v, list) in adj.iter_mut().enumerate() {
        if states.is_normal(v) {
            list.retain(|&u| states.is_normal(u));
        } else {
            list.clear();
        }
    }
    adj
}

/// Collective influence of every node on the alive coupled graph:
/// `(d_v - 1) * sum over the distance-`radius` frontier of (d_u - 1)`.
/// Non-Normal nodes get `-inf`.
pub fn collective_influence(g: &CoupledGraph, states: &NodeStates, radius: usize) -> Vec<f64> {
    let adj = alive_adjacency(g, states);
    let reduced = |v: NodeId| adj[v].len() as f64 - 1.0;
    let mut dist = vec![usize::MAX; g.node_count()];
    let mut ci = vec![f64::NEG_INFINITY; g.node_count()];
    for v in (0..g.node_count()).filter(|&v| states.is_normal(v)) {
        if adj[v].is_empty() {
            ci[v] = 0.0;
            continue;
        }
        let mut touched = vec![v];
        let mut frontier_sum = 0.0;
        let mut queue = VecDeque::from([v]);
        dist[v] = 0;
        while let Some(u) = queue.pop_front() {
            if dist[u] == radius {
                frontier_sum += reduced(u);
                continue;
            }
            for &w in &adj[u] {
                if dist[w] == usize::MAX {
                    dist[w] = dist[u] + 1;
                    touched.push(w);
                    queue.push_back(w);
                }
            }
        }
        for u in touched {
            dist[u] = usize::MAX;
        }
        ci[v] = reduced(v) * frontier_sum;
    }
    ci
}

/// Adaptive collective influence: recomputed on the alive graph after every removal.
pub fn ci_attack(g: &CoupledGraph, budget: usize, radius: usize, weights: RewardWeights) -> Result<AttackReport> {
    if radius == 0 {
        return Err(Error::InvalidConfig("collective influence radius must be at least 1".into()));
    }
    check_budget(g, budget)?;
    let mut rec = AttackRecorder::new("ci", g, weights);
    for _ in 0..budget {
        let states = rec.episode().states();
        let ci = collective_influence(g, states, radius);
        let Some(v) = rank_desc(&ci).into_iter().find(|&v| states.is_normal(v)) else {
            return Err(Error::BudgetTooLarge {
                requested: budget,
                available: rec.episode().states().normal_count(),
            });
        };
        rec.apply(v)?;
    }
    Ok(rec.finish())
}

/// Uniform order over the initially Normal nodes.
pub fn random_attack(g: &CoupledGraph, budget: usize, seed: u64, weights: RewardWeights) -> Result<AttackReport> {
    check_budget(g, budget)?;
    let mut order: Vec<NodeId> = (0..g.node_count()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    attack_in_order("random", g, order, budget, weights)
}

/// Two-layer perceptron `sigmoid(w2 . ReLU(W1 x + b1) + b2)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Perceptron {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array1<f64>,
    pub b2: f64,
}

impl Perceptron {
    pub fn init(inputs: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let a = (6.0 / (inputs + hidden) as f64).sqrt();
        Perceptron {
            w1: Array2::from_shape_simple_fn((hidden, inputs), || rng.random_range(-a..a)),
            b1: Array1::zeros(hidden),
            w2: Array1::from_shape_simple_fn(hidden, || rng.random_range(-a..a)),
            b2: 0.0,
        }
    }

    /// Logit for each row of `x`.
    pub fn logits(&self, x: &Array2<f64>) -> Array1<f64> {
        let h = (x.dot(&self.w1.t()) + &self.b1).mapv(|v| v.max(0.0));
        h.dot(&self.w2) + self.b2
    }

    /// Full-batch gradient descent on class-balanced logistic loss.
    /// Returns the final training loss.
    pub fn fit(&mut self, x: &Array2<f64>, labels: &[bool], epochs: usize, lr: f64) -> f64 {
        let m = labels.len() as f64;
        let pos = labels.iter().filter(|l| **l).count() as f64;
        let w_pos = m / (2.0 * pos.max(1.0));
        let w_neg = m / (2.0 * (m - pos).max(1.0));
        let mut loss = f64::NAN;
        for _ in 0..epochs {
            let pre = x.dot(&self.w1.t()) + &self.b1;
            let h = pre.mapv(|v| v.max(0.0));
            let logits = h.dot(&self.w2) + self.b2;
            let mut dlogit = Array1::zeros(labels.len());
            loss = 0.0;
            for (i, (&y, &t)) in labels.iter().zip(logits.iter()).enumerate() {
                let (w, target) = if y { (w_pos, 1.0) } else { (w_neg, 0.0) };
                let p = 1.0 / (1.0 + (-t).exp());
                // log(1 + e^t) - y t, stable form
                loss += w * (t.max(0.0) + (-t.abs()).exp().ln_1p() - target * t);
                dlogit[i] = w * (p - target) / m;
            }
            loss /= m;
            let gw2 = h.t().dot(&dlogit);
            let gb2 = dlogit.sum();
            let mut dh = Array2::from_shape_fn(h.raw_dim(), |(i, j)| dlogit[i] * self.w2[j]);
            ndarray::Zip::from(&mut dh).and(&pre).for_each(|d, &p| {
                if p <= 0.0 {
                    *d = 0.0;
                }
            });
            let gw1 = dh.t().dot(x);
            let gb1 = dh.sum_axis(ndarray::Axis(0));
            self.w1.scaled_add(-lr, &gw1);
            self.b1.scaled_add(-lr, &gb1);
            self.w2.scaled_add(-lr, &gw2);
            self.b2 -= lr * gb2;
        }
        loss
    }

    pub fn accuracy(&self, x: &Array2<f64>, labels: &[bool]) -> f64 {
        let logits = self.logits(x);
        let right = labels.iter().zip(logits.iter()).filter(|(&y, &t)| (t > 0.0) == y).count();
        right as f64 / labels.len() as f64
    }
}

/// Sampled single-node damage labels: `(node, reward, positive)`.
pub fn gdm_labels(
    g: &CoupledGraph,
    cfg: &GdmConfig,
    weights: RewardWeights,
) -> Result<Vec<(NodeId, f64, bool)>> {
    if !(cfg.positive_quantile > 0.0 && cfg.positive_quantile < 1.0) {
        return Err(Error::InvalidConfig("positive_quantile must lie in (0, 1)".into()));
    }
    if cfg.sample_count == 0 {
        return Err(Error::InvalidConfig("sample_count must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut nodes: Vec<NodeId> = rand::seq::index::sample(&mut rng, g.node_count(), cfg.sample_count.min(g.node_count())).into_vec();
    nodes.sort_unstable();
    let rewards: Vec<f64> = nodes
        .iter()
        .map(|&v| Episode::new(g).reward(v, &weights))
        .collect::<Result<_>>()?;
    let mut sorted = rewards.clone();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let k = ((cfg.positive_quantile * nodes.len() as f64).ceil() as usize).clamp(1, nodes.len());
    let threshold = sorted[k - 1];
    let labelled: Vec<_> = nodes
        .into_iter()
        .zip(rewards)
        .map(|(v, r)| (v, r, r >= threshold))
        .collect();
    let positives = labelled.iter().filter(|l| l.2).count();
    if positives == labelled.len() {
        return Err(Error::DegenerateLabels("positive"));
    }
    if positives == 0 {
        return Err(Error::DegenerateLabels("negative"));
    }
    Ok(labelled)
}

/// Supervised dismantling: a perceptron on the embeddings learns which
/// nodes cause large single-node damage, then nodes are removed by score.
pub fn gdm_attack(
    g: &CoupledGraph,
    z: &EmbeddingMatrix,
    budget: usize,
    cfg: &GdmConfig,
    weights: RewardWeights,
) -> Result<AttackReport> {
    check_budget(g, budget)?;
    if z.node_count() != g.node_count() {
        return Err(Error::Shape {
            what: "embeddings",
            expected: format!("{} nodes", g.node_count()),
            found: format!("{} nodes", z.node_count()),
        });
    }
    let labelled = gdm_labels(g, cfg, weights)?;
    let zm = z.node_major();
    let x = Array2::from_shape_fn((labelled.len(), z.dim()), |(i, j)| zm[[labelled[i].0, j]]);
    let y: Vec<bool> = labelled.iter().map(|l| l.2).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut mlp = Perceptron::init(z.dim(), z.dim(), &mut rng);
    mlp.fit(&x, &y, cfg.epochs, cfg.lr);
    let scores = mlp.logits(zm);
    attack_in_order("gdm", g, rank_desc(scores.as_slice().expect("contiguous")), budget, weights)
}
