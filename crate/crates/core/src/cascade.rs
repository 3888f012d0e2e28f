//! Cascade propagation and the environment metrics.
//!
//! Power is a supply-reachability model: a 10kV station delivers its load
//! when every station on its path to the tree root is Normal. Road metrics
//! are computed on the alive road view, where any junction that is not
//! Normal (damaged, or its light lost power) is removed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{AliveView, CoupledGraph, Layer, NodeId, NodeKind, NodeState, NodeStates, Voltage};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardWeights {
    pub a_e: f64,
    pub a_r: f64,
}

impl RewardWeights {
    pub fn new(a_e: f64, a_r: f64) -> Result<Self> {
        let w = RewardWeights { a_e, a_r };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.a_e.is_finite() && self.a_r.is_finite() && self.a_e >= 0.0 && self.a_r >= 0.0;
        if !ok || self.a_e + self.a_r <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "reward weights must be nonnegative with a positive sum, got ae={} ar={}",
                self.a_e, self.a_r
            )));
        }
        Ok(())
    }

    /// Weights that scale each term by its intact total: `a_e = 1/power_0`,
    /// `a_r = 1/sigma_0`. A term whose total is zero gets weight zero.
    pub fn normalized(g: &CoupledGraph) -> Self {
        let states = NodeStates::all_normal(g.node_count());
        let inv = |x: f64| if x > 0.0 { 1.0 / x } else { 0.0 };
        let mut w = RewardWeights {
            a_e: inv(power(g, &states)),
            a_r: inv(sigma(&g.alive_subgraph(&states, Layer::Road))),
        };
        if w.a_e + w.a_r == 0.0 {
            w.a_r = 1.0;
        }
        w
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CascadeOutcome {
    /// Nodes that went Normal -> Invalid, ascending.
    pub newly_invalid: Vec<NodeId>,
    pub power_before: f64,
    pub power_after: f64,
    pub sigma_before: f64,
    pub sigma_after: f64,
    pub gcc_after: usize,
}

impl CascadeOutcome {
    pub fn power_drop(&self) -> f64 {
        self.power_before - self.power_after
    }

    pub fn sigma_drop(&self) -> f64 {
        self.sigma_before - self.sigma_after
    }

    /// Weighted decrease of power and road connectivity.
    pub fn reward(&self, w: &RewardWeights) -> f64 {
        w.a_e * self.power_drop() + w.a_r * self.sigma_drop()
    }
}

/// Load delivered by 10kV stations whose whole root path is Normal.
pub fn power(g: &CoupledGraph, states: &NodeStates) -> f64 {
    let mut total = 0.0;
    let mut stack: Vec<NodeId> = g.roots().filter(|&r| states.is_normal(r)).collect();
    while let Some(v) = stack.pop() {
        if g.kind(v) == NodeKind::Station(Voltage::KV10) {
            total += g.load(v);
        }
        stack.extend(g.children(v).iter().copied().filter(|&c| states.is_normal(c)));
    }
    total
}

/// Sizes of the connected components of `view`, in order of their smallest node.
pub fn component_sizes(view: &AliveView) -> Vec<usize> {
    let Some(&max_id) = view.nodes.last() else {
        return Vec::new();
    };
    let mut slot = vec![usize::MAX; max_id + 1];
    for (i, &v) in view.nodes.iter().enumerate() {
        slot[v] = i;
    }
    let mut uf = UnionFind::new(view.nodes.len());
    for &(a, b) in &view.edges {
        uf.union(slot[a], slot[b]);
    }
    let mut size_of_root = vec![0usize; view.nodes.len()];
    let mut order = Vec::new();
    for i in 0..view.nodes.len() {
        let r = uf.find(i);
        if size_of_root[r] == 0 {
            order.push(r);
        }
        size_of_root[r] += 1;
    }
    order.into_iter().map(|r| size_of_root[r]).collect()
}

/// Pairwise connectivity: sum of `s(s-1)/2` over component sizes `s`.
pub fn sigma(view: &AliveView) -> f64 {
    connected_pairs(&component_sizes(view))
}

fn connected_pairs(sizes: &[usize]) -> f64 {
    sizes
        .iter()
        .map(|&s| s as u64 * (s as u64).saturating_sub(1) / 2)
        .sum::<u64>() as f64
}

/// Size of the giant component, zero for an empty view.
pub fn gcc(view: &AliveView) -> usize {
    component_sizes(view).into_iter().max().unwrap_or(0)
}

/// Mean of `trajectory[k] / sigma0` over the post-removal values.
pub fn anc(trajectory: &[f64], sigma0: f64) -> Result<f64> {
    if trajectory.is_empty() {
        return Err(Error::Empty("anc needs at least one post-removal value"));
    }
    if !(sigma0 > 0.0) {
        return Err(Error::InvalidConfig(format!("anc needs sigma0 > 0, got {sigma0}")));
    }
    Ok(trajectory.iter().map(|s| s / sigma0).sum::<f64>() / trajectory.len() as f64)
}

/// Applies the cascade closure to `states` until it is a fixed point: a
/// Normal station under a non-Normal parent, or a Normal junction fed by a
/// non-Normal station, becomes Invalid. Returns the nodes it changed.
pub fn propagate(g: &CoupledGraph, states: &mut NodeStates) -> Vec<NodeId> {
    let mut changed = Vec::new();
    let mut stack: Vec<(NodeId, bool)> = g.roots().map(|r| (r, states.is_normal(r))).collect();
    while let Some((v, upstream_ok)) = stack.pop() {
        if !upstream_ok && states.is_normal(v) {
            states.set(v, NodeState::Invalid);
            changed.push(v);
        }
        let ok = states.is_normal(v);
        stack.extend(g.children(v).iter().map(|&c| (c, ok)));
    }
    for j in g.junctions() {
        if let Some(s) = g.supplier(j) {
            if states.is_normal(j) && !states.is_normal(s) {
                states.set(j, NodeState::Invalid);
                changed.push(j);
            }
        }
    }
    changed.sort_unstable();
    changed
}

/// One attack episode: a shared read-only graph plus its own state array.
#[derive(Clone, Debug)]
pub struct Episode<'g> {
    graph: &'g CoupledGraph,
    states: NodeStates,
}

impl<'g> Episode<'g> {
    pub fn new(graph: &'g CoupledGraph) -> Self {
        Episode {
            graph,
            states: NodeStates::all_normal(graph.node_count()),
        }
    }

    /// Resumes an episode from states taken out with [`Episode::into_states`].
    pub fn with_states(graph: &'g CoupledGraph, states: NodeStates) -> Result<Self> {
        if states.len() != graph.node_count() {
            return Err(Error::Shape {
                what: "node states",
                expected: graph.node_count().to_string(),
                found: states.len().to_string(),
            });
        }
        Ok(Episode { graph, states })
    }

    pub fn into_states(self) -> NodeStates {
        self.states
    }

    pub fn graph(&self) -> &'g CoupledGraph {
        self.graph
    }

    pub fn states(&self) -> &NodeStates {
        &self.states
    }

    pub fn reset(&mut self) {
        self.states = NodeStates::all_normal(self.graph.node_count());
    }

    pub fn power(&self) -> f64 {
        power(self.graph, &self.states)
    }

    pub fn road_view(&self) -> AliveView {
        self.graph.alive_subgraph(&self.states, Layer::Road)
    }

    pub fn sigma(&self) -> f64 {
        sigma(&self.road_view())
    }

    pub fn gcc(&self) -> usize {
        gcc(&self.road_view())
    }

    /// Damages `v` and propagates the failure through supply and dependency edges.
    pub fn damage(&mut self, v: NodeId) -> Result<CascadeOutcome> {
        let n = self.graph.node_count();
        if v >= n {
            return Err(Error::NodeOutOfRange { id: v, len: n });
        }
        let state = self.states.get(v);
        if state != NodeState::Normal {
            return Err(Error::NotNormal { node: v, state });
        }
        let power_before = self.power();
        let sigma_before = self.sigma();

        self.states.set(v, NodeState::Damaged);
        let mut newly_invalid = Vec::new();
        if self.graph.kind(v).is_station() {
            // The damaged station and every station it takes down stop feeding their lights.
            let mut stack = vec![v];
            while let Some(s) = stack.pop() {
                for &j in self.graph.supplied(s) {
                    if self.states.is_normal(j) {
                        self.states.set(j, NodeState::Invalid);
                        newly_invalid.push(j);
                    }
                }
                for &c in self.graph.children(s) {
                    if self.states.is_normal(c) {
                        self.states.set(c, NodeState::Invalid);
                        newly_invalid.push(c);
                        stack.push(c);
                    }
                }
            }
        }
        newly_invalid.sort_unstable();

        let view = self.road_view();
        let sizes = component_sizes(&view);
        Ok(CascadeOutcome {
            newly_invalid,
            power_before,
            power_after: self.power(),
            sigma_before,
            sigma_after: connected_pairs(&sizes),
            gcc_after: sizes.into_iter().max().unwrap_or(0),
        })
    }

    /// Damages `v` and returns the weighted metric decrease it caused.
    pub fn reward(&mut self, v: NodeId, w: &RewardWeights) -> Result<f64> {
        Ok(self.damage(v)?.reward(w))
    }
}

#[derive(Clone, Debug)]
pub struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::{chain, roads};
    use crate::graph::Node;
    use crate::netgen::{generate, GenConfig, RoadModel};

    fn grid3() -> CoupledGraph {
        generate(&GenConfig {
            seed: 0,
            n_220: 1,
            fanout_110: (1, 1),
            fanout_10: (1, 1),
            road_nodes: 9,
            road_model: RoadModel::Grid,
            coupling_fraction: 0.0,
            load_range: (50, 150),
        })
        .unwrap()
    }

    #[test]
    fn chain_root_takes_down_everything() {
        let g = chain();
        let mut ep = Episode::new(&g);
        let out = ep.damage(0).unwrap();
        assert_eq!(out.newly_invalid, vec![1, 2, 3]);
        assert_eq!(out.power_drop(), 100.0);
        assert_eq!(ep.states().get(0), NodeState::Damaged);
        assert_eq!(ep.states().get(3), NodeState::Invalid);
    }

    #[test]
    fn grid_leaf_junction_has_no_cascade() {
        let g = grid3();
        let corner = g.junctions().next().unwrap();
        let mut ep = Episode::new(&g);
        let before = ep.power();
        let out = ep.damage(corner).unwrap();
        assert!(out.newly_invalid.is_empty());
        assert_eq!(out.power_after, before);
    }

    #[test]
    fn damaging_twice_is_an_error() {
        let g = chain();
        let mut ep = Episode::new(&g);
        ep.damage(1).unwrap();
        assert!(matches!(ep.damage(1), Err(Error::NotNormal { node: 1, state: NodeState::Damaged })));
        assert!(matches!(ep.damage(2), Err(Error::NotNormal { state: NodeState::Invalid, .. })));
    }

    #[test]
    fn power_sums_loads() {
        let g = CoupledGraph::new(
            vec![
                Node::station(Voltage::KV110, 0.0),
                Node::station(Voltage::KV10, 100.0),
                Node::station(Voltage::KV10, 50.0),
            ],
            vec![(0, 1), (0, 2)],
            vec![],
            vec![],
        )
        .unwrap();
        let mut states = NodeStates::all_normal(3);
        assert_eq!(power(&g, &states), 150.0);
        states.set(0, NodeState::Damaged);
        assert_eq!(power(&g, &states), 0.0);
    }

    #[test]
    fn sigma_and_gcc_small_cases() {
        let tri = roads(3, &[(0, 1), (1, 2), (0, 2)]);
        let s = NodeStates::all_normal(3);
        assert_eq!(sigma(&tri.alive_subgraph(&s, Layer::Road)), 3.0);

        let two = roads(5, &[(0, 1), (1, 2), (3, 4)]);
        let view = two.alive_subgraph(&NodeStates::all_normal(5), Layer::Road);
        assert_eq!(sigma(&view), 4.0);
        assert_eq!(gcc(&view), 3);

        let path = roads(10, &(0..9).map(|i| (i, i + 1)).collect::<Vec<_>>());
        assert_eq!(gcc(&path.alive_subgraph(&NodeStates::all_normal(10), Layer::Road)), 10);
        assert_eq!(gcc(&AliveView { nodes: vec![], edges: vec![] }), 0);
    }

    #[test]
    fn anc_cases() {
        assert_eq!(anc(&[4.0, 4.0, 4.0], 4.0).unwrap(), 1.0);
        assert_eq!(anc(&[0.0, 0.0], 4.0).unwrap(), 0.0);
        assert_eq!(anc(&[4.0, 2.0], 4.0).unwrap(), 0.75);
        assert!(anc(&[], 4.0).is_err());
        assert!(anc(&[1.0], 0.0).is_err());
    }

    #[test]
    fn reward_cases() {
        let g = roads(3, &[(0, 1)]);
        let w = RewardWeights::new(0.0, 1.0).unwrap();
        assert_eq!(Episode::new(&g).reward(2, &w).unwrap(), 0.0);

        let g = chain();
        let w = RewardWeights::new(1.0, 0.0).unwrap();
        assert_eq!(Episode::new(&g).reward(0, &w).unwrap(), 100.0);
    }

    #[test]
    fn weights_validation() {
        assert!(RewardWeights::new(0.0, 0.0).is_err());
        assert!(RewardWeights::new(-1.0, 2.0).is_err());
        assert!(RewardWeights::new(f64::NAN, 1.0).is_err());
        let w = RewardWeights::normalized(&chain());
        assert_eq!(w.a_e, 0.01);
        // single junction, no road edges
        assert_eq!(w.a_r, 0.0);
    }

    #[test]
    fn propagate_is_a_fixed_point_after_damage() {
        let g = generate(&GenConfig::desk(11)).unwrap();
        let mut ep = Episode::new(&g);
        for v in [0, 5, 40, g.node_count() - 1] {
            if ep.states().is_normal(v) {
                ep.damage(v).unwrap();
            }
            let mut states = ep.states().clone();
            assert!(propagate(&g, &mut states).is_empty());
            assert_eq!(&states, ep.states());
        }
    }

    #[test]
    fn propagate_matches_damage_closure() {
        let g = generate(&GenConfig::desk(12)).unwrap();
        let mut ep = Episode::new(&g);
        let out = ep.damage(1).unwrap();
        let mut states = NodeStates::all_normal(g.node_count());
        states.set(1, NodeState::Damaged);
        assert_eq!(propagate(&g, &mut states), out.newly_invalid);
        assert!(propagate(&g, &mut states).is_empty());
    }
}
