use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{CoupledGraph, Layer, NodeId};

/// Loss multiplier for positive edges of each layer.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EdgeTypeWeights {
    pub elec: f64,
    pub road: f64,
    pub dep: f64,
}

impl Default for EdgeTypeWeights {
    fn default() -> Self {
        EdgeTypeWeights {
            elec: 1.0,
            road: 1.0,
            dep: 1.0,
        }
    }
}

impl EdgeTypeWeights {
    pub fn validate(&self) -> Result<()> {
        if [self.elec, self.road, self.dep].iter().all(|w| w.is_finite() && *w >= 0.0) {
            Ok(())
        } else {
            Err(Error::InvalidConfig("edge type weights must be finite and nonnegative".into()))
        }
    }

    fn of(&self, layer: Layer) -> f64 {
        match layer {
            Layer::Elec => self.elec,
            Layer::Road => self.road,
            Layer::Dep => self.dep,
            Layer::All => 1.0,
        }
    }
}

/// Undirected view of a graph used by the embedding network.
#[derive(Clone, Debug)]
pub struct Topology {
    pub n: usize,
    /// Ascending neighbour lists.
    pub adj: Vec<Vec<usize>>,
    /// Each undirected edge once, as `(min, max)`.
    pub edges: Vec<(usize, usize)>,
    /// Loss weight of each edge in `edges`.
    pub edge_weight: Vec<f64>,
    edge_set: HashSet<(usize, usize)>,
}

impl Topology {
    pub fn new(n: usize, edges: Vec<(usize, usize, f64)>) -> Self {
        let mut adj = vec![Vec::new(); n];
        let mut list = Vec::with_capacity(edges.len());
        let mut weight = Vec::with_capacity(edges.len());
        let mut edge_set = HashSet::with_capacity(edges.len());
        for (a, b, w) in edges {
            let key = (a.min(b), a.max(b));
            if a == b || !edge_set.insert(key) {
                continue;
            }
            adj[a].push(b);
            adj[b].push(a);
            list.push(key);
            weight.push(w);
        }
        for a in &mut adj {
            a.sort_unstable();
        }
        Topology {
            n,
            adj,
            edges: list,
            edge_weight: weight,
            edge_set,
        }
    }

    pub fn from_coupled(g: &CoupledGraph, weights: &EdgeTypeWeights) -> Self {
        Self::new(
            g.node_count(),
            g.all_edges().map(|(a, b, layer)| (a, b, weights.of(layer))).collect(),
        )
    }

    /// Induced single-layer topology over the stations (`Elec`) or junctions
    /// (`Road`), reindexed densely. Returns the original id of each local node.
    pub fn layer(g: &CoupledGraph, layer: Layer) -> (Self, Vec<NodeId>) {
        let members: Vec<NodeId> = match layer {
            Layer::Elec => g.stations().collect(),
            Layer::Road => g.junctions().collect(),
            _ => (0..g.node_count()).collect(),
        };
        let mut local = vec![usize::MAX; g.node_count()];
        for (i, &v) in members.iter().enumerate() {
            local[v] = i;
        }
        let edges = match layer {
            Layer::Elec => g.elec_edges(),
            Layer::Road => g.road_edges(),
            _ => return (Self::from_coupled(g, &EdgeTypeWeights::default()), members),
        };
        let topo = Self::new(
            members.len(),
            edges.iter().map(|&(a, b)| (local[a], local[b], 1.0)).collect(),
        );
        (topo, members)
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edge_set.contains(&(a.min(b), a.max(b)))
    }

    /// Number of unordered node pairs that are not edges.
    pub fn non_edge_count(&self) -> usize {
        (self.n * self.n.saturating_sub(1) / 2).saturating_sub(self.edges.len())
    }
}
