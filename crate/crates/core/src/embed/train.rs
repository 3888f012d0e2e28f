use log::debug;
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    backward, check_shapes, forward_cached, init_features, margin_loss_grad, sample_negatives, uniform_matrix,
    EmbedConfig, EmbeddingMatrix, GnnParams, LinkSamples, Provenance, Topology,
};
use crate::error::{Error, Result};
use crate::graph::{CoupledGraph, Layer};

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Network output on the training features after the last update.
    pub embeddings: Array2<f64>,
    pub params: GnnParams,
    /// Loss of each epoch, measured before that epoch's update.
    pub losses: Vec<f64>,
}

/// Fits the network weights by full-batch gradient descent on the margin
/// loss. Negatives are resampled every epoch. The features stay fixed.
pub fn train_topology(topo: &Topology, features: &Array2<f64>, cfg: &EmbedConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if topo.edges.is_empty() {
        return Err(Error::Empty("training graph has no edges"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = GnnParams::init(features.ncols(), cfg.depth, &mut rng);
    check_shapes(topo, features, &params)?;

    let mut losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let samples = LinkSamples {
            pos: topo.edges.clone(),
            pos_weight: topo.edge_weight.clone(),
            neg: sample_negatives(topo, topo.edges.len() * cfg.neg_ratio, &mut rng)?,
        };
        let (z, cache) = forward_cached(topo, features, &params, cfg.aggregator);
        let (loss, grad_z) = margin_loss_grad(&z, &samples, cfg.margin, cfg.lambda, &params)?;
        if !loss.is_finite() {
            return Err(Error::Diverged { what: "embedding training", epoch });
        }
        debug!("embed epoch {epoch}: loss {loss:.6}");
        losses.push(loss);
        let grads = backward(topo, &params, cfg.aggregator, &cache, &grad_z);
        for (w, mut g) in params.weights.iter_mut().zip(grads) {
            g.scaled_add(2.0 * cfg.lambda, w);
            w.scaled_add(-cfg.lr, &g);
        }
    }
    let embeddings = super::forward_topology(topo, features, &params, cfg.aggregator);
    if embeddings.iter().any(|x| !x.is_finite()) {
        return Err(Error::Diverged {
            what: "embedding training",
            epoch: cfg.epochs,
        });
    }
    Ok(TrainOutcome {
        embeddings,
        params,
        losses,
    })
}

/// Trains on the coupled graph from random initial features.
pub fn train(g: &CoupledGraph, cfg: &EmbedConfig) -> Result<(EmbeddingMatrix, GnnParams)> {
    let features = init_features(g, None, cfg.d, cfg.seed)?;
    let topo = Topology::from_coupled(g, &cfg.edge_weights);
    let out = train_topology(&topo, features.node_major(), cfg)?;
    Ok((EmbeddingMatrix::new(out.embeddings, Provenance::Pretrained)?, out.params))
}

#[derive(Clone, Debug)]
pub struct PretrainOutcome {
    pub embeddings: EmbeddingMatrix,
    pub params: GnnParams,
    /// Initial features of the coupled stage (layer embeddings stitched together).
    pub features: EmbeddingMatrix,
    pub elec_losses: Vec<f64>,
    pub road_losses: Vec<f64>,
    pub coupled_losses: Vec<f64>,
}

fn train_layer(g: &CoupledGraph, layer: Layer, cfg: &EmbedConfig, seed: u64) -> Result<(EmbeddingMatrix, Vec<f64>)> {
    let (topo, _) = Topology::layer(g, layer);
    let features = uniform_matrix(topo.n, cfg.d, seed);
    if topo.edges.is_empty() || topo.non_edge_count() == 0 {
        // nothing to learn from; keep the random rows
        return Ok((EmbeddingMatrix::new(features, Provenance::Random)?, Vec::new()));
    }
    let layer_cfg = EmbedConfig { seed, ..cfg.clone() };
    let out = train_topology(&topo, &features, &layer_cfg)?;
    Ok((EmbeddingMatrix::new(out.embeddings, Provenance::Pretrained)?, out.losses))
}

/// Two-stage training: each layer is trained on its own from random
/// features, then the coupled graph is trained starting from the stitched
/// layer embeddings.
pub fn pretrain(g: &CoupledGraph, cfg: &EmbedConfig) -> Result<PretrainOutcome> {
    cfg.validate()?;
    let (elec, elec_losses) = train_layer(g, Layer::Elec, cfg, cfg.seed.wrapping_add(1))?;
    let (road, road_losses) = train_layer(g, Layer::Road, cfg, cfg.seed.wrapping_add(2))?;
    let features = init_features(g, Some((&elec, &road)), cfg.d, cfg.seed)?;
    let topo = Topology::from_coupled(g, &cfg.edge_weights);
    let out = train_topology(&topo, features.node_major(), cfg)?;
    Ok(PretrainOutcome {
        embeddings: EmbeddingMatrix::new(out.embeddings, Provenance::Pretrained)?,
        params: out.params,
        features,
        elec_losses,
        road_losses,
        coupled_losses: out.losses,
    })
}
