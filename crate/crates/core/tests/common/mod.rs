//! Random coupled graphs and brute-force oracles shared by integration tests.
#![allow(dead_code)]

pub mod cli;

use std::collections::{BTreeSet, VecDeque};

use infravuln::graph::{CoupledGraph, Node, NodeId, NodeState, NodeStates, Voltage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random three-level forest plus a random road graph and random coupling.
/// Station count is at most about `max_stations`, junction count at most `max_junctions`.
pub fn random_coupled(seed: u64, max_stations: usize, max_junctions: usize) -> CoupledGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut nodes = Vec::new();
    let mut elec = Vec::new();
    let budget = rng.random_range(3..=max_stations.max(3));
    let roots = rng.random_range(1..=(max_stations / 20).max(1));
    for _ in 0..roots {
        let r = nodes.len();
        nodes.push(Node::station(Voltage::KV220, 0.0));
        for _ in 0..rng.random_range(0..=4usize) {
            if nodes.len() >= budget {
                break;
            }
            let m = nodes.len();
            nodes.push(Node::station(Voltage::KV110, 0.0));
            elec.push((r, m));
            for _ in 0..rng.random_range(0..=8usize) {
                if nodes.len() >= budget {
                    break;
                }
                let l = nodes.len();
                nodes.push(Node::station(Voltage::KV10, rng.random_range(1..=100u32) as f64));
                elec.push((m, l));
            }
        }
    }
    let leaves: Vec<NodeId> = (0..nodes.len())
        .filter(|&v| nodes[v].kind == infravuln::graph::NodeKind::Station(Voltage::KV10))
        .collect();
    let first_j = nodes.len();
    let nj = rng.random_range(1..=max_junctions.max(1));
    nodes.extend(std::iter::repeat_n(Node::junction(), nj));
    let mut road = BTreeSet::new();
    let m = rng.random_range(0..=2 * nj);
    for _ in 0..m {
        let a = first_j + rng.random_range(0..nj);
        let b = first_j + rng.random_range(0..nj);
        if a != b {
            road.insert((a.min(b), a.max(b)));
        }
    }
    let mut dep = Vec::new();
    if !leaves.is_empty() {
        for j in first_j..first_j + nj {
            if rng.random_bool(0.5) {
                dep.push((leaves[rng.random_range(0..leaves.len())], j));
            }
        }
    }
    CoupledGraph::new(nodes, elec, road.into_iter().collect(), dep).unwrap()
}

/// Alive adjacency over all layers, built from the raw edge lists.
pub fn alive_adjacency(g: &CoupledGraph, states: &NodeStates, road_only: bool) -> Vec<Vec<NodeId>> {
    let n = g.node_count();
    let mut adj = vec![Vec::new(); n];
    let mut edges: Vec<(NodeId, NodeId)> = g.road_edges().to_vec();
    if !road_only {
        edges.extend_from_slice(g.elec_edges());
        edges.extend_from_slice(g.dep_edges());
    }
    for (a, b) in edges {
        if states.is_normal(a) && states.is_normal(b) {
            adj[a].push(b);
            adj[b].push(a);
        }
    }
    adj
}

fn bfs_dist(adj: &[Vec<NodeId>], s: NodeId) -> Vec<Option<usize>> {
    let mut dist = vec![None; adj.len()];
    dist[s] = Some(0);
    let mut q = VecDeque::from([s]);
    while let Some(u) = q.pop_front() {
        for &w in &adj[u] {
            if dist[w].is_none() {
                dist[w] = Some(dist[u].unwrap() + 1);
                q.push_back(w);
            }
        }
    }
    dist
}

/// Junction pairs joined by an alive road path, counted pair by pair.
pub fn sigma_oracle(g: &CoupledGraph, states: &NodeStates) -> f64 {
    let adj = alive_adjacency(g, states, true);
    let alive: Vec<NodeId> = g.junctions().filter(|&v| states.is_normal(v)).collect();
    let mut pairs = 0u64;
    for (i, &u) in alive.iter().enumerate() {
        let d = bfs_dist(&adj, u);
        pairs += alive[i + 1..].iter().filter(|&&v| d[v].is_some()).count() as u64;
    }
    pairs as f64
}

pub fn gcc_oracle(g: &CoupledGraph, states: &NodeStates) -> usize {
    let adj = alive_adjacency(g, states, true);
    g.junctions()
        .filter(|&v| states.is_normal(v))
        .map(|u| bfs_dist(&adj, u).iter().filter(|d| d.is_some()).count())
        .max()
        .unwrap_or(0)
}

pub fn degree_oracle(g: &CoupledGraph, v: NodeId) -> usize {
    g.elec_edges()
        .iter()
        .chain(g.road_edges())
        .chain(g.dep_edges())
        .filter(|&&(a, b)| a == v || b == v)
        .count()
}

pub fn ci_oracle(g: &CoupledGraph, states: &NodeStates, v: NodeId, radius: usize) -> f64 {
    let adj = alive_adjacency(g, states, false);
    let deg = |u: NodeId| adj[u].len() as f64;
    if deg(v) == 0.0 {
        return 0.0;
    }
    let d = bfs_dist(&adj, v);
    let frontier: f64 = (0..adj.len()).filter(|&u| d[u] == Some(radius)).map(|u| deg(u) - 1.0).sum();
    (deg(v) - 1.0) * frontier
}

/// Power served: loads of 10kV stations whose path to a root is all Normal.
pub fn power_oracle(g: &CoupledGraph, states: &NodeStates) -> f64 {
    let mut parent = vec![None; g.node_count()];
    for &(p, c) in g.elec_edges() {
        parent[c] = Some(p);
    }
    let mut total = 0.0;
    for v in 0..g.node_count() {
        if g.load(v) == 0.0 {
            continue;
        }
        let mut cur = Some(v);
        let mut ok = true;
        while let Some(u) = cur {
            if !states.is_normal(u) {
                ok = false;
                break;
            }
            cur = parent[u];
        }
        if ok {
            total += g.load(v);
        }
    }
    total
}

/// Nodes reachable from `v` along electricity and dependency edges, minus `v`,
/// that are still Normal.
pub fn cascade_oracle(g: &CoupledGraph, states: &NodeStates, v: NodeId) -> BTreeSet<NodeId> {
    let mut out = vec![Vec::new(); g.node_count()];
    for &(a, b) in g.elec_edges().iter().chain(g.dep_edges()) {
        out[a].push(b);
    }
    let mut seen = BTreeSet::new();
    let mut stack = vec![v];
    while let Some(u) = stack.pop() {
        for &w in &out[u] {
            if states.is_normal(w) && w != v && seen.insert(w) {
                stack.push(w);
            }
        }
    }
    seen
}

pub fn random_normal(states: &NodeStates, rng: &mut impl Rng) -> Option<NodeId> {
    let alive: Vec<NodeId> = (0..states.len()).filter(|&v| states.get(v) == NodeState::Normal).collect();
    (!alive.is_empty()).then(|| alive[rng.random_range(0..alive.len())])
}
