//! Transfer to edge-perturbed graphs.
//!
//! A mask graph keeps the node set and perturbs edges. The message-passing
//! weights are retrained so the new embeddings stay close to the ones the
//! Q-network was trained on, and the frozen Q-network attacks the mask graph.

use std::collections::BTreeSet;

use log::debug;
use ndarray::Array2;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agent::{greedy_attack, QNetParams};
use crate::cascade::RewardWeights;
use crate::embed::{
    backward, check_shapes, forward_cached, margin_loss_grad, sample_negatives, Aggregator, EdgeTypeWeights,
    EmbeddingMatrix, GnnParams, LinkSamples, Provenance, Topology,
};
use crate::error::{Error, Result};
use crate::graph::{CoupledGraph, NodeId, NodeKind, Voltage};
use crate::report::AttackReport;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MaskSpec {
    pub delete_fraction: f64,
    pub add_fraction: f64,
    pub seed: u64,
}

impl Default for MaskSpec {
    fn default() -> Self {
        MaskSpec {
            delete_fraction: 0.1,
            add_fraction: 0.1,
            seed: 1,
        }
    }
}

impl MaskSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, f) in [("delete_fraction", self.delete_fraction), ("add_fraction", self.add_fraction)] {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::InvalidConfig(format!("{name} must lie in [0, 1], got {f}")));
            }
        }
        Ok(())
    }
}

fn fraction_of(f: f64, count: usize) -> usize {
    (f * count as f64).round() as usize
}

type EdgeList = Vec<(NodeId, NodeId)>;

/// Drops a uniform `f` fraction of `edges`; survivors keep their order.
/// Returns (kept, dropped).
fn delete_some(edges: &[(NodeId, NodeId)], f: f64, rng: &mut impl Rng) -> (EdgeList, EdgeList) {
    let k = fraction_of(f, edges.len());
    let mut drop = vec![false; edges.len()];
    for i in rand::seq::index::sample(rng, edges.len(), k) {
        drop[i] = true;
    }
    let (gone, kept): (Vec<_>, Vec<_>) = edges.iter().zip(drop).partition(|(_, d)| *d);
    (kept.into_iter().map(|(e, _)| *e).collect(), gone.into_iter().map(|(e, _)| *e).collect())
}

fn level(g: &CoupledGraph, v: NodeId) -> Option<Voltage> {
    match g.kind(v) {
        NodeKind::Station(l) => Some(l),
        NodeKind::Junction => None,
    }
}

/// Perturbs every layer: deletes `delete_fraction` of its edges, then adds
/// `add_fraction` (of the original count) new edges that keep the layer valid.
/// New electricity edges reattach orphaned stations to a station one level
/// up, and new dependency edges go to junctions without a supplier.
pub fn mask_graph(g: &CoupledGraph, spec: &MaskSpec) -> Result<CoupledGraph> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = g.node_count();

    // electricity
    let (mut elec, elec_gone) = delete_some(g.elec_edges(), spec.delete_fraction, &mut rng);
    let want = fraction_of(spec.add_fraction, g.elec_edges().len());
    let mut has_parent = vec![false; n];
    for &(_, c) in &elec {
        has_parent[c] = true;
    }
    let mut orphans: Vec<NodeId> = g
        .stations()
        .filter(|&v| !has_parent[v] && level(g, v) != Some(Voltage::KV220))
        .collect();
    orphans.shuffle(&mut rng);
    let gone: BTreeSet<_> = elec_gone.into_iter().collect();
    let mut added = 0;
    for child in orphans {
        if added == want {
            break;
        }
        let parents: Vec<NodeId> = g
            .stations()
            .filter(|&p| level(g, p).and_then(Voltage::child_level) == level(g, child))
            .collect();
        let fresh: Vec<NodeId> = parents.iter().copied().filter(|&p| !gone.contains(&(p, child))).collect();
        let pool = if fresh.is_empty() { &parents } else { &fresh };
        if let Some(&p) = pool.choose(&mut rng) {
            elec.push((p, child));
            added += 1;
        }
    }
    if added < want {
        return Err(Error::MaskShortfall {
            layer: "electricity",
            requested: want,
            achieved: added,
        });
    }

    // road
    let (mut road, _) = delete_some(g.road_edges(), spec.delete_fraction, &mut rng);
    let want = fraction_of(spec.add_fraction, g.road_edges().len());
    let junctions: Vec<NodeId> = g.junctions().collect();
    let mut present: BTreeSet<(NodeId, NodeId)> = g.road_edges().iter().map(|&(a, b)| (a.min(b), a.max(b))).collect();
    let possible = junctions.len() * junctions.len().saturating_sub(1) / 2;
    let mut added = 0;
    while added < want && present.len() < possible {
        let a = junctions[rng.random_range(0..junctions.len())];
        let b = junctions[rng.random_range(0..junctions.len())];
        let e = (a.min(b), a.max(b));
        if a != b && present.insert(e) {
            road.push(e);
            added += 1;
        }
    }
    if added < want {
        return Err(Error::MaskShortfall {
            layer: "road",
            requested: want,
            achieved: added,
        });
    }

    // dependency
    let (mut dep, dep_gone) = delete_some(g.dep_edges(), spec.delete_fraction, &mut rng);
    let want = fraction_of(spec.add_fraction, g.dep_edges().len());
    let mut supplied = vec![false; n];
    for &(_, j) in &dep {
        supplied[j] = true;
    }
    let mut free: Vec<NodeId> = junctions.iter().copied().filter(|&j| !supplied[j]).collect();
    free.shuffle(&mut rng);
    let leaves: Vec<NodeId> = g.stations().filter(|&v| level(g, v) == Some(Voltage::KV10)).collect();
    let gone: BTreeSet<_> = dep_gone.into_iter().collect();
    let mut added = 0;
    if !leaves.is_empty() {
        for j in free.into_iter().take(want) {
            let fresh: Vec<NodeId> = leaves.iter().copied().filter(|&s| !gone.contains(&(s, j))).collect();
            let pool = if fresh.is_empty() { &leaves } else { &fresh };
            dep.push((*pool.choose(&mut rng).expect("nonempty"), j));
            added += 1;
        }
    }
    if added < want {
        return Err(Error::MaskShortfall {
            layer: "dependency",
            requested: want,
            achieved: added,
        });
    }

    CoupledGraph::new(g.nodes().to_vec(), elec, road, dep)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetrainConfig {
    pub epochs: usize,
    /// Weight of the distance-to-old-embeddings term.
    pub dist_weight: f64,
    pub lr: f64,
    pub seed: u64,
    pub margin: f64,
    pub lambda: f64,
    pub neg_ratio: usize,
    pub aggregator: Aggregator,
    /// Depth of freshly initialised weights when none are supplied.
    pub depth: usize,
}

impl Default for RetrainConfig {
    fn default() -> Self {
        RetrainConfig {
            epochs: 100,
            dist_weight: 0.1,
            lr: 1e-3,
            seed: 1,
            margin: 1.0,
            lambda: 1e-4,
            neg_ratio: 1,
            aggregator: Aggregator::SumMean,
            depth: 2,
        }
    }
}

impl RetrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("retrain epochs must be at least 1".into()));
        }
        if !(self.dist_weight >= 0.0) || !(self.lr >= 0.0) || !(self.lambda >= 0.0) || !(self.margin > 0.0) {
            return Err(Error::InvalidConfig(
                "dist_weight, lr and lambda must be non-negative and margin positive".into(),
            ));
        }
        if self.neg_ratio == 0 || self.depth == 0 {
            return Err(Error::InvalidConfig("neg_ratio and depth must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct RetrainOutcome {
    pub embeddings: EmbeddingMatrix,
    pub params: GnnParams,
    /// Total loss per epoch, measured before that epoch's update.
    pub losses: Vec<f64>,
    /// Mean squared row distance to the old embeddings, per epoch.
    pub distances: Vec<f64>,
}

/// Mean over nodes of the squared Euclidean distance between embeddings.
pub fn mean_sq_distance(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    let n = a.nrows().max(1) as f64;
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / n
}

/// Retrains the network on the mask graph with `old` as fixed input. Each
/// epoch runs the network, scores the output with the margin loss plus
/// `dist_weight` times its distance to `old`, and takes one gradient step.
/// Returns the output of the last forward pass.
///
/// For transfer, `old` is the feature matrix the original embeddings were
/// computed from and `init` the weights that computed them.
pub fn retrain(
    g_mask: &CoupledGraph,
    old: &EmbeddingMatrix,
    init: Option<&GnnParams>,
    cfg: &RetrainConfig,
) -> Result<RetrainOutcome> {
    cfg.validate()?;
    let topo = Topology::from_coupled(g_mask, &EdgeTypeWeights::default());
    if topo.edges.is_empty() {
        return Err(Error::Empty("mask graph has no edges"));
    }
    let f_old = old.node_major();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = match init {
        Some(p) => p.clone(),
        None => GnnParams::init(old.dim(), cfg.depth, &mut rng),
    };
    check_shapes(&topo, f_old, &params)?;
    let n = topo.n as f64;

    let mut losses = Vec::with_capacity(cfg.epochs);
    let mut distances = Vec::with_capacity(cfg.epochs);
    let mut last = None;
    for epoch in 0..cfg.epochs {
        let samples = LinkSamples {
            pos: topo.edges.clone(),
            pos_weight: topo.edge_weight.clone(),
            neg: sample_negatives(&topo, topo.edges.len() * cfg.neg_ratio, &mut rng)?,
        };
        let (z, cache) = forward_cached(&topo, f_old, &params, cfg.aggregator);
        let (recon, mut grad_z) = margin_loss_grad(&z, &samples, cfg.margin, cfg.lambda, &params)?;
        let dist = mean_sq_distance(&z, f_old);
        let loss = recon + cfg.dist_weight * dist;
        if !loss.is_finite() {
            return Err(Error::Diverged { what: "mask retraining", epoch });
        }
        debug!("retrain epoch {epoch}: loss {loss:.6}, distance {dist:.6}");
        losses.push(loss);
        distances.push(dist);
        grad_z.scaled_add(2.0 * cfg.dist_weight / n, &(&z - f_old));
        let grads = backward(&topo, &params, cfg.aggregator, &cache, &grad_z);
        for (w, mut gw) in params.weights.iter_mut().zip(grads) {
            gw.scaled_add(2.0 * cfg.lambda, w);
            w.scaled_add(-cfg.lr, &gw);
        }
        last = Some(z);
    }
    let z = if cfg.lr == 0.0 {
        last.expect("at least one epoch")
    } else {
        crate::embed::forward_topology(&topo, f_old, &params, cfg.aggregator)
    };
    if z.iter().any(|x| !x.is_finite()) {
        return Err(Error::Diverged {
            what: "mask retraining",
            epoch: cfg.epochs,
        });
    }
    Ok(RetrainOutcome {
        embeddings: EmbeddingMatrix::new(z, Provenance::Pretrained)?,
        params,
        losses,
        distances,
    })
}

/// Greedy attack on the mask graph with a Q-network that is never updated.
pub fn transfer_attack(
    g_mask: &CoupledGraph,
    z_new: &EmbeddingMatrix,
    frozen: &QNetParams,
    budget: usize,
    weights: RewardWeights,
) -> Result<AttackReport> {
    let before = frozen.checksum();
    let mut report = greedy_attack(g_mask, z_new, frozen, budget, weights)?;
    debug_assert_eq!(before, frozen.checksum());
    report.method = "transfer".into();
    Ok(report)
}
