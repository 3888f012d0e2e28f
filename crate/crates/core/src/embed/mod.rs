//! Node embeddings for the coupled graph.
//!
//! A small message-passing network is trained by link prediction: every edge
//! is a positive sample, sampled non-edges are negatives, and a hinge loss
//! pushes positive inner products above negative ones by a margin. Gradients
//! are computed by hand.
//!
//! Matrices are stored node-major (`n x d`, one row per node). Read in
//! row-major order that is exactly the column-major layout of the `d x n`
//! embedding matrix.

mod gnn;
mod loss;
mod topology;
mod train;

use ndarray::{Array2, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{CoupledGraph, NodeId};

pub use gnn::{backward, forward_cached, forward_topology, Aggregator, ForwardCache};
pub use loss::{margin_loss, margin_loss_grad, sample_negatives, LinkSamples};
pub use topology::{EdgeTypeWeights, Topology};
pub use train::{pretrain, train, train_topology, PretrainOutcome, TrainOutcome};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Pretrained,
    Random,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingMatrix {
    data: Array2<f64>,
    provenance: Provenance,
}

impl EmbeddingMatrix {
    /// `data` is node-major: row `v` is the embedding of node `v`.
    pub fn new(data: Array2<f64>, provenance: Provenance) -> Result<Self> {
        if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
            let d = data.ncols().max(1);
            return Err(Error::InvalidConfig(format!(
                "embedding of node {} has a non-finite entry",
                pos / d
            )));
        }
        Ok(EmbeddingMatrix { data, provenance })
    }

    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    pub fn node_count(&self) -> usize {
        self.data.nrows()
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn column(&self, v: NodeId) -> ArrayView1<'_, f64> {
        self.data.row(v)
    }

    pub fn node_major(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn into_node_major(self) -> Array2<f64> {
        self.data
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbedConfig {
    pub d: usize,
    pub depth: usize,
    pub margin: f64,
    pub lambda: f64,
    pub lr: f64,
    pub epochs: usize,
    pub neg_ratio: usize,
    pub seed: u64,
    pub aggregator: Aggregator,
    pub edge_weights: EdgeTypeWeights,
}

impl Default for EmbedConfig {
    fn default() -> Self {
        EmbedConfig {
            d: 64,
            depth: 2,
            margin: 1.0,
            lambda: 1e-4,
            lr: 1e-3,
            epochs: 200,
            neg_ratio: 1,
            seed: 1,
            aggregator: Aggregator::SumMean,
            edge_weights: EdgeTypeWeights::default(),
        }
    }
}

impl EmbedConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.d == 0 || self.depth == 0 {
            return bad("embedding dimension and depth must be at least 1");
        }
        if !(self.margin > 0.0) {
            return bad("margin must be positive");
        }
        if !(self.lambda >= 0.0) || !(self.lr >= 0.0) {
            return bad("lambda and lr must be nonnegative");
        }
        if self.neg_ratio == 0 {
            return bad("neg_ratio must be at least 1");
        }
        self.edge_weights.validate()
    }
}

/// Per-depth `d x d` weight matrices of the message-passing network.
#[derive(Clone, Debug, PartialEq)]
pub struct GnnParams {
    pub weights: Vec<Array2<f64>>,
}

impl GnnParams {
    /// Glorot-uniform initialisation.
    pub fn init(d: usize, depth: usize, rng: &mut impl Rng) -> Self {
        let a = (6.0 / (2 * d) as f64).sqrt();
        let weights = (0..depth)
            .map(|_| Array2::from_shape_simple_fn((d, d), || rng.random_range(-a..a)))
            .collect();
        GnnParams { weights }
    }

    pub fn depth(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.weights.first().map_or(0, |w| w.nrows())
    }

    pub fn squared_norm(&self) -> f64 {
        self.weights.iter().map(|w| w.iter().map(|x| x * x).sum::<f64>()).sum()
    }
}

/// `n x d` matrix with i.i.d. entries uniform in `[-1/sqrt(d), 1/sqrt(d)]`.
pub fn uniform_matrix(n: usize, d: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = 1.0 / (d as f64).sqrt();
    Array2::from_shape_simple_fn((n, d), || rng.random_range(-a..=a))
}

/// Random embeddings used as the ablation arm.
pub fn random_embeddings(g: &CoupledGraph, d: usize, seed: u64) -> EmbeddingMatrix {
    EmbeddingMatrix {
        data: uniform_matrix(g.node_count(), d, seed),
        provenance: Provenance::Random,
    }
}

/// Initial features for the coupled graph. Station rows come from the
/// electricity embedding and junction rows from the road embedding, each in
/// ascending node order; without sub-embeddings every row is random.
pub fn init_features(
    g: &CoupledGraph,
    sub_embeds: Option<(&EmbeddingMatrix, &EmbeddingMatrix)>,
    d: usize,
    seed: u64,
) -> Result<EmbeddingMatrix> {
    let Some((elec, road)) = sub_embeds else {
        return Ok(EmbeddingMatrix {
            data: uniform_matrix(g.node_count(), d, seed),
            provenance: Provenance::Random,
        });
    };
    let stations: Vec<NodeId> = g.stations().collect();
    let junctions: Vec<NodeId> = g.junctions().collect();
    for (what, m, count) in [("electricity", elec, stations.len()), ("road", road, junctions.len())] {
        if m.dim() != d || m.node_count() != count {
            return Err(Error::Shape {
                what,
                expected: format!("{count} x {d}"),
                found: format!("{} x {}", m.node_count(), m.dim()),
            });
        }
    }
    let mut data = Array2::zeros((g.node_count(), d));
    for (i, &v) in stations.iter().enumerate() {
        data.row_mut(v).assign(&elec.data.row(i));
    }
    for (i, &v) in junctions.iter().enumerate() {
        data.row_mut(v).assign(&road.data.row(i));
    }
    Ok(EmbeddingMatrix {
        data,
        provenance: Provenance::Pretrained,
    })
}

/// Runs the network on the coupled graph.
pub fn forward(
    g: &CoupledGraph,
    features: &EmbeddingMatrix,
    params: &GnnParams,
    aggregator: Aggregator,
) -> Result<EmbeddingMatrix> {
    let topo = Topology::from_coupled(g, &EdgeTypeWeights::default());
    check_shapes(&topo, features.node_major(), params)?;
    let z = forward_topology(&topo, features.node_major(), params, aggregator);
    EmbeddingMatrix::new(z, Provenance::Pretrained)
}

pub(crate) fn check_shapes(topo: &Topology, f: &Array2<f64>, params: &GnnParams) -> Result<()> {
    if f.nrows() != topo.n {
        return Err(Error::Shape {
            what: "features",
            expected: format!("{} rows", topo.n),
            found: format!("{} rows", f.nrows()),
        });
    }
    let d = f.ncols();
    if params.depth() == 0 || params.weights.iter().any(|w| w.dim() != (d, d)) {
        return Err(Error::Shape {
            what: "gnn weights",
            expected: format!("{d} x {d}"),
            found: format!("{:?}", params.weights.iter().map(|w| w.dim()).collect::<Vec<_>>()),
        });
    }
    Ok(())
}

/// Inner product of the endpoint embeddings of each edge.
pub fn score(z: &EmbeddingMatrix, edges: &[(NodeId, NodeId)]) -> Vec<f64> {
    edges.iter().map(|&(u, v)| z.column(u).dot(&z.column(v))).collect()
}
