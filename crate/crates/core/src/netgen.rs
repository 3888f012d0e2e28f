//! Seeded synthetic coupled-network generator.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{CoupledGraph, Node, NodeId, Voltage};

/// Edge/node ratio of the tertiary road network the planar-like model imitates.
pub const PLANAR_EDGE_RATIO: f64 = 5025.0 / 4825.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoadModel {
    /// Row-major square lattice.
    Grid,
    /// Sparse connected subgraph of a lattice with degree at most four.
    RandomPlanarLike,
}

impl RoadModel {
    /// Expected road edges divided by road nodes for `n` junctions.
    pub fn nominal_edge_ratio(self, n: usize) -> f64 {
        match self {
            RoadModel::Grid => grid_edges(n).len() as f64 / n as f64,
            RoadModel::RandomPlanarLike => PLANAR_EDGE_RATIO,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Desk,
    City,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub seed: u64,
    pub n_220: usize,
    /// Inclusive range of 110kV children per 220kV station.
    pub fanout_110: (usize, usize),
    /// Inclusive range of 10kV children per 110kV station.
    pub fanout_10: (usize, usize),
    pub road_nodes: usize,
    pub road_model: RoadModel,
    /// Fraction of junctions that get a supplying 10kV station.
    pub coupling_fraction: f64,
    /// Inclusive integer range for 10kV station loads.
    pub load_range: (u32, u32),
}

impl GenConfig {
    /// Roughly 1,500 nodes: 12 transmission trees over a 33x33 street grid.
    pub fn desk(seed: u64) -> Self {
        GenConfig {
            seed,
            n_220: 12,
            fanout_110: (2, 5),
            fanout_10: (4, 12),
            road_nodes: 33 * 33,
            road_model: RoadModel::Grid,
            coupling_fraction: 0.5,
            load_range: (50, 150),
        }
    }

    /// Roughly 10,900 stations and 4,825 junctions.
    pub fn city(seed: u64) -> Self {
        GenConfig {
            seed,
            n_220: 42,
            fanout_110: (4, 8),
            fanout_10: (36, 50),
            road_nodes: 4825,
            road_model: RoadModel::RandomPlanarLike,
            coupling_fraction: 0.5,
            load_range: (50, 150),
        }
    }

    pub fn preset(preset: Preset, seed: u64) -> Self {
        match preset {
            Preset::Desk => Self::desk(seed),
            Preset::City => Self::city(seed),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.n_220 == 0 || self.road_nodes == 0 {
            return bad("n_220 and road_nodes must be positive");
        }
        if self.fanout_110.0 > self.fanout_110.1 || self.fanout_10.0 > self.fanout_10.1 {
            return bad("fanout range is empty");
        }
        if self.load_range.0 > self.load_range.1 {
            return bad("load range is empty");
        }
        if !(0.0..=1.0).contains(&self.coupling_fraction) {
            return bad("coupling_fraction must lie in [0, 1]");
        }
        Ok(())
    }
}

/// Row-major lattice edges over `n` nodes laid out `ceil(sqrt(n))` per row.
fn grid_edges(n: usize) -> Vec<(usize, usize)> {
    let cols = (n as f64).sqrt().ceil().max(1.0) as usize;
    let mut edges = Vec::new();
    for i in 0..n {
        if (i + 1) % cols != 0 && i + 1 < n {
            edges.push((i, i + 1));
        }
        if i + cols < n {
            edges.push((i, i + cols));
        }
    }
    edges
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Random spanning tree of the lattice plus extra lattice edges up to the
/// planar edge ratio.
fn planar_like_edges(n: usize, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    let mut candidates = grid_edges(n);
    candidates.shuffle(rng);
    let mut parent: Vec<usize> = (0..n).collect();
    let mut chosen = Vec::with_capacity(n);
    let mut rest = Vec::new();
    for (a, b) in candidates {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra] = rb;
            chosen.push((a, b));
        } else {
            rest.push((a, b));
        }
    }
    let target = (PLANAR_EDGE_RATIO * n as f64).round() as usize;
    let extra = target.saturating_sub(chosen.len()).min(rest.len());
    chosen.extend_from_slice(&rest[..extra]);
    chosen
}

/// Builds a coupled graph from `cfg`. Identical configs give identical graphs.
pub fn generate(cfg: &GenConfig) -> Result<CoupledGraph> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut nodes = Vec::new();
    let mut elec = Vec::new();
    let mut leaves: Vec<NodeId> = Vec::new();

    for _ in 0..cfg.n_220 {
        let root = nodes.len();
        nodes.push(Node::station(Voltage::KV220, 0.0));
        let n_mid = rng.random_range(cfg.fanout_110.0..=cfg.fanout_110.1);
        for _ in 0..n_mid {
            let mid = nodes.len();
            nodes.push(Node::station(Voltage::KV110, 0.0));
            elec.push((root, mid));
            let n_leaf = rng.random_range(cfg.fanout_10.0..=cfg.fanout_10.1);
            for _ in 0..n_leaf {
                let leaf = nodes.len();
                let load = rng.random_range(cfg.load_range.0..=cfg.load_range.1);
                nodes.push(Node::station(Voltage::KV10, f64::from(load)));
                elec.push((mid, leaf));
                leaves.push(leaf);
            }
        }
    }

    let offset = nodes.len();
    nodes.extend(std::iter::repeat_n(Node::junction(), cfg.road_nodes));
    let local = match cfg.road_model {
        RoadModel::Grid => grid_edges(cfg.road_nodes),
        RoadModel::RandomPlanarLike => planar_like_edges(cfg.road_nodes, &mut rng),
    };
    let roads = local.into_iter().map(|(a, b)| (a + offset, b + offset)).collect();

    let n_coupled = (cfg.coupling_fraction * cfg.road_nodes as f64).round() as usize;
    if n_coupled > 0 && leaves.is_empty() {
        return Err(Error::InvalidConfig(
            "coupling requested but the configuration produces no 10kV stations".into(),
        ));
    }
    let mut junctions: Vec<NodeId> = (offset..offset + cfg.road_nodes).collect();
    junctions.shuffle(&mut rng);
    junctions.truncate(n_coupled);
    junctions.sort_unstable();
    let deps = junctions
        .into_iter()
        .map(|j| (*leaves.choose(&mut rng).expect("nonempty"), j))
        .collect();

    CoupledGraph::new(nodes, elec, roads, deps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::NodeKind;

    fn small(seed: u64) -> GenConfig {
        GenConfig {
            seed,
            n_220: 1,
            fanout_110: (2, 2),
            fanout_10: (3, 3),
            road_nodes: 9,
            road_model: RoadModel::Grid,
            coupling_fraction: 0.0,
            load_range: (50, 150),
        }
    }

    #[test]
    fn fanout_arithmetic() {
        let g = generate(&small(1)).unwrap();
        assert_eq!(g.stations().count(), 9);
        assert_eq!(g.elec_edges().len(), 8);
    }

    #[test]
    fn grid_of_nine() {
        let g = generate(&small(1)).unwrap();
        assert_eq!(g.junctions().count(), 9);
        assert_eq!(g.road_edges().len(), 12);
        assert!(g.dep_edges().is_empty());
    }

    #[test]
    fn same_seed_same_bytes() {
        let a = generate(&GenConfig::desk(3)).unwrap().to_json();
        let b = generate(&GenConfig::desk(3)).unwrap().to_json();
        assert_eq!(a, b);
        assert_ne!(a, generate(&GenConfig::desk(4)).unwrap().to_json());
    }

    #[test]
    fn full_coupling_gives_every_junction_a_supplier() {
        let mut cfg = small(5);
        cfg.coupling_fraction = 1.0;
        let g = generate(&cfg).unwrap();
        for j in g.junctions() {
            let s = g.supplier(j).expect("supplied");
            assert_eq!(g.kind(s), NodeKind::Station(Voltage::KV10));
        }
    }

    #[test]
    fn coupling_without_leaves_is_rejected() {
        let mut cfg = small(1);
        cfg.fanout_10 = (0, 0);
        cfg.coupling_fraction = 0.5;
        assert!(matches!(generate(&cfg), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn invalid_configs() {
        let mut cfg = small(1);
        cfg.fanout_110 = (3, 2);
        assert!(generate(&cfg).is_err());
        let mut cfg = small(1);
        cfg.road_nodes = 0;
        assert!(generate(&cfg).is_err());
        let mut cfg = small(1);
        cfg.coupling_fraction = 1.5;
        assert!(generate(&cfg).is_err());
    }

    #[test]
    fn desk_preset_size() {
        let g = generate(&GenConfig::desk(7)).unwrap();
        let n = g.node_count();
        assert!((1300..=1700).contains(&n), "desk preset has {n} nodes");
    }

    #[test]
    fn planar_like_ratio_and_degree() {
        let cfg = GenConfig {
            road_model: RoadModel::RandomPlanarLike,
            road_nodes: 2000,
            ..small(9)
        };
        let g = generate(&cfg).unwrap();
        let ratio = g.road_edges().len() as f64 / 2000.0;
        assert!((ratio / PLANAR_EDGE_RATIO - 1.0).abs() < 0.1, "ratio {ratio}");
        assert!(g.junctions().all(|j| g.road_neighbors(j).len() <= 4));
    }
}
