//! Coupled electricity/road graph.
//!
//! Topology is fixed once a [`CoupledGraph`] is built. Node states live in a
//! separate [`NodeStates`] array so that several episodes can share one graph.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type NodeId = usize;

/// Graph file format version written by [`CoupledGraph::to_json`].
pub const GRAPH_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Voltage {
    #[serde(rename = "220kV")]
    KV220,
    #[serde(rename = "110kV")]
    KV110,
    #[serde(rename = "10kV")]
    KV10,
}

impl Voltage {
    /// The level directly below this one, if any.
    pub fn child_level(self) -> Option<Voltage> {
        match self {
            Voltage::KV220 => Some(Voltage::KV110),
            Voltage::KV110 => Some(Voltage::KV10),
            Voltage::KV10 => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NodeKind {
    Station(Voltage),
    /// Road intersection hosting a traffic light.
    Junction,
}

impl NodeKind {
    pub fn is_station(self) -> bool {
        matches!(self, NodeKind::Station(_))
    }

    pub fn is_junction(self) -> bool {
        matches!(self, NodeKind::Junction)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum NodeState {
    #[default]
    Normal,
    /// Hit directly by an attack.
    Damaged,
    /// Knocked out by cascade propagation.
    Invalid,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Layer {
    Elec,
    Road,
    Dep,
    All,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Node {
    pub kind: NodeKind,
    /// Demand in power units. Only 10kV stations carry a nonzero load.
    pub load: f64,
}

impl Node {
    pub fn station(level: Voltage, load: f64) -> Self {
        Node {
            kind: NodeKind::Station(level),
            load,
        }
    }

    pub fn junction() -> Self {
        Node {
            kind: NodeKind::Junction,
            load: 0.0,
        }
    }
}

/// Episode-local state array, one entry per node.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NodeStates(Vec<NodeState>);

impl NodeStates {
    pub fn all_normal(n: usize) -> Self {
        NodeStates(vec![NodeState::Normal; n])
    }

    pub fn get(&self, v: NodeId) -> NodeState {
        self.0[v]
    }

    pub fn is_normal(&self, v: NodeId) -> bool {
        self.0[v] == NodeState::Normal
    }

    pub fn set(&mut self, v: NodeId, state: NodeState) {
        self.0[v] = state;
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[NodeState] {
        &self.0
    }

    pub fn normal_count(&self) -> usize {
        self.0.iter().filter(|s| **s == NodeState::Normal).count()
    }

    /// Boolean mask of Normal nodes.
    pub fn alive_mask(&self) -> Vec<bool> {
        self.0.iter().map(|s| *s == NodeState::Normal).collect()
    }
}

/// Nodes and edges of one layer restricted to Normal nodes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AliveView {
    /// Ascending ids of the nodes present in the view.
    pub nodes: Vec<NodeId>,
    /// Edges whose endpoints are both present, in the graph's sorted edge order.
    pub edges: Vec<(NodeId, NodeId)>,
}

impl AliveView {
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct CoupledGraph {
    nodes: Vec<Node>,
    elec_edges: Vec<(NodeId, NodeId)>,
    road_edges: Vec<(NodeId, NodeId)>,
    dep_edges: Vec<(NodeId, NodeId)>,
    parent: Vec<Option<NodeId>>,
    children: Vec<Vec<NodeId>>,
    road_adj: Vec<Vec<NodeId>>,
    supplies: Vec<Vec<NodeId>>,
    supplier: Vec<Option<NodeId>>,
}

impl CoupledGraph {
    /// Builds a graph and checks every layer invariant.
    ///
    /// Road edges are stored as `(min, max)` pairs; all three edge lists are
    /// sorted, so two graphs with the same edge sets serialize identically.
    pub fn new(
        nodes: Vec<Node>,
        elec_edges: Vec<(NodeId, NodeId)>,
        road_edges: Vec<(NodeId, NodeId)>,
        dep_edges: Vec<(NodeId, NodeId)>,
    ) -> Result<Self> {
        let n = nodes.len();
        let bad = |msg: String| Err(Error::InvalidGraph(msg));

        for (id, node) in nodes.iter().enumerate() {
            if !node.load.is_finite() || node.load < 0.0 {
                return bad(format!("node {id} has invalid load {}", node.load));
            }
            if node.load > 0.0 && node.kind != NodeKind::Station(Voltage::KV10) {
                return bad(format!("node {id} carries load but is not a 10kV station"));
            }
        }
        let check_id = |v: NodeId| -> Result<()> {
            if v >= n {
                Err(Error::NodeOutOfRange { id: v, len: n })
            } else {
                Ok(())
            }
        };

        let mut elec_edges = elec_edges;
        elec_edges.sort_unstable();
        let mut parent = vec![None; n];
        let mut children = vec![Vec::new(); n];
        for &(p, c) in &elec_edges {
            check_id(p)?;
            check_id(c)?;
            let (NodeKind::Station(pl), NodeKind::Station(cl)) = (nodes[p].kind, nodes[c].kind) else {
                return bad(format!("electricity edge {p}->{c} touches a junction"));
            };
            if pl.child_level() != Some(cl) {
                return bad(format!("electricity edge {p}->{c} does not descend one level ({pl:?}->{cl:?})"));
            }
            if parent[c].replace(p).is_some() {
                return bad(format!("station {c} has more than one parent"));
            }
            children[p].push(c);
        }

        let mut road_edges: Vec<_> = road_edges.into_iter().map(|(a, b)| (a.min(b), a.max(b))).collect();
        road_edges.sort_unstable();
        let mut road_adj = vec![Vec::new(); n];
        for (i, &(a, b)) in road_edges.iter().enumerate() {
            check_id(a)?;
            check_id(b)?;
            if a == b {
                return bad(format!("road self-loop at {a}"));
            }
            if i > 0 && road_edges[i - 1] == (a, b) {
                return bad(format!("duplicate road edge {a}-{b}"));
            }
            if !nodes[a].kind.is_junction() || !nodes[b].kind.is_junction() {
                return bad(format!("road edge {a}-{b} touches a station"));
            }
            road_adj[a].push(b);
            road_adj[b].push(a);
        }
        for adj in &mut road_adj {
            adj.sort_unstable();
        }

        let mut dep_edges = dep_edges;
        dep_edges.sort_unstable();
        let mut supplies = vec![Vec::new(); n];
        let mut supplier = vec![None; n];
        for &(s, j) in &dep_edges {
            check_id(s)?;
            check_id(j)?;
            if nodes[s].kind != NodeKind::Station(Voltage::KV10) {
                return bad(format!("dependency edge {s}->{j} does not start at a 10kV station"));
            }
            if !nodes[j].kind.is_junction() {
                return bad(format!("dependency edge {s}->{j} does not end at a junction"));
            }
            if supplier[j].replace(s).is_some() {
                return bad(format!("junction {j} has more than one supplying station"));
            }
            supplies[s].push(j);
        }

        Ok(CoupledGraph {
            nodes,
            elec_edges,
            road_edges,
            dep_edges,
            parent,
            children,
            road_adj,
            supplies,
            supplier,
        })
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.elec_edges.len() + self.road_edges.len() + self.dep_edges.len()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn kind(&self, v: NodeId) -> NodeKind {
        self.nodes[v].kind
    }

    pub fn load(&self, v: NodeId) -> f64 {
        self.nodes[v].load
    }

    pub fn total_load(&self) -> f64 {
        self.nodes.iter().map(|n| n.load).sum()
    }

    pub fn elec_edges(&self) -> &[(NodeId, NodeId)] {
        &self.elec_edges
    }

    pub fn road_edges(&self) -> &[(NodeId, NodeId)] {
        &self.road_edges
    }

    pub fn dep_edges(&self) -> &[(NodeId, NodeId)] {
        &self.dep_edges
    }

    pub fn parent(&self, v: NodeId) -> Option<NodeId> {
        self.parent[v]
    }

    pub fn children(&self, v: NodeId) -> &[NodeId] {
        &self.children[v]
    }

    pub fn road_neighbors(&self, v: NodeId) -> &[NodeId] {
        &self.road_adj[v]
    }

    /// Junctions supplied by station `v`.
    pub fn supplied(&self, v: NodeId) -> &[NodeId] {
        &self.supplies[v]
    }

    pub fn supplier(&self, v: NodeId) -> Option<NodeId> {
        self.supplier[v]
    }

    pub fn stations(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.node_count()).filter(|&v| self.nodes[v].kind.is_station())
    }

    pub fn junctions(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.node_count()).filter(|&v| self.nodes[v].kind.is_junction())
    }

    /// Stations without a parent.
    pub fn roots(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.stations().filter(|&v| self.parent[v].is_none())
    }

    fn check(&self, v: NodeId) -> Result<()> {
        if v < self.node_count() {
            Ok(())
        } else {
            Err(Error::NodeOutOfRange {
                id: v,
                len: self.node_count(),
            })
        }
    }

    /// Adjacent nodes within `layer`, ascending. Edge directions are ignored.
    pub fn neighbors(&self, v: NodeId, layer: Layer) -> Result<Vec<NodeId>> {
        self.check(v)?;
        let mut out = Vec::new();
        if matches!(layer, Layer::Elec | Layer::All) {
            out.extend(self.parent[v]);
            out.extend_from_slice(&self.children[v]);
        }
        if matches!(layer, Layer::Road | Layer::All) {
            out.extend_from_slice(&self.road_adj[v]);
        }
        if matches!(layer, Layer::Dep | Layer::All) {
            out.extend(self.supplier[v]);
            out.extend_from_slice(&self.supplies[v]);
        }
        out.sort_unstable();
        Ok(out)
    }

    /// Number of incident edges over all layers.
    pub fn degree(&self, v: NodeId) -> Result<usize> {
        self.check(v)?;
        Ok(self.degree_unchecked(v))
    }

    pub(crate) fn degree_unchecked(&self, v: NodeId) -> usize {
        usize::from(self.parent[v].is_some())
            + self.children[v].len()
            + self.road_adj[v].len()
            + usize::from(self.supplier[v].is_some())
            + self.supplies[v].len()
    }

    /// Undirected adjacency over every layer, each list ascending.
    pub fn adjacency(&self) -> Vec<Vec<NodeId>> {
        (0..self.node_count())
            .map(|v| self.neighbors(v, Layer::All).expect("in range"))
            .collect()
    }

    /// Every edge of the coupled graph together with its layer.
    pub fn all_edges(&self) -> impl Iterator<Item = (NodeId, NodeId, Layer)> + '_ {
        self.elec_edges
            .iter()
            .map(|&(a, b)| (a, b, Layer::Elec))
            .chain(self.road_edges.iter().map(|&(a, b)| (a, b, Layer::Road)))
            .chain(self.dep_edges.iter().map(|&(a, b)| (a, b, Layer::Dep)))
    }

    pub fn in_layer(&self, v: NodeId, layer: Layer) -> bool {
        match layer {
            Layer::Elec => self.nodes[v].kind.is_station(),
            Layer::Road => self.nodes[v].kind.is_junction(),
            Layer::Dep => {
                self.nodes[v].kind == NodeKind::Station(Voltage::KV10) || self.nodes[v].kind.is_junction()
            }
            Layer::All => true,
        }
    }

    /// Restriction of `layer` to Normal nodes and edges between Normal nodes.
    pub fn alive_subgraph(&self, states: &NodeStates, layer: Layer) -> AliveView {
        let nodes = (0..self.node_count())
            .filter(|&v| states.is_normal(v) && self.in_layer(v, layer))
            .collect();
        let alive = |&&(a, b): &&(NodeId, NodeId)| states.is_normal(a) && states.is_normal(b);
        let edges = match layer {
            Layer::Elec => self.elec_edges.iter().filter(alive).copied().collect(),
            Layer::Road => self.road_edges.iter().filter(alive).copied().collect(),
            Layer::Dep => self.dep_edges.iter().filter(alive).copied().collect(),
            Layer::All => self
                .elec_edges
                .iter()
                .chain(&self.road_edges)
                .chain(&self.dep_edges)
                .filter(alive)
                .copied()
                .collect(),
        };
        AliveView { nodes, edges }
    }

    pub fn to_file(&self) -> GraphFile {
        let nodes = self
            .nodes
            .iter()
            .enumerate()
            .map(|(id, n)| match n.kind {
                NodeKind::Station(level) => NodeRecord {
                    id,
                    kind: KindTag::Station,
                    level: Some(level),
                    load: (level == Voltage::KV10).then_some(n.load),
                },
                NodeKind::Junction => NodeRecord {
                    id,
                    kind: KindTag::Junction,
                    level: None,
                    load: None,
                },
            })
            .collect();
        GraphFile {
            version: GRAPH_FORMAT_VERSION,
            nodes,
            elec_edges: self.elec_edges.iter().map(|&(a, b)| [a, b]).collect(),
            road_edges: self.road_edges.iter().map(|&(a, b)| [a, b]).collect(),
            dep_edges: self.dep_edges.iter().map(|&(a, b)| [a, b]).collect(),
        }
    }

    pub fn from_file(file: GraphFile) -> Result<Self> {
        if file.version != GRAPH_FORMAT_VERSION {
            return Err(Error::InvalidGraph(format!(
                "unsupported graph format version {}",
                file.version
            )));
        }
        let mut records = file.nodes;
        records.sort_by_key(|r| r.id);
        let mut nodes = Vec::with_capacity(records.len());
        for (expected, r) in records.into_iter().enumerate() {
            if r.id != expected {
                return Err(Error::InvalidGraph(format!("node ids are not dense: missing {expected}")));
            }
            let node = match (r.kind, r.level) {
                (KindTag::Station, Some(level)) => Node::station(level, r.load.unwrap_or(0.0)),
                (KindTag::Station, None) => {
                    return Err(Error::InvalidGraph(format!("station {} has no level", r.id)))
                }
                (KindTag::Junction, _) => {
                    if r.load.unwrap_or(0.0) != 0.0 {
                        return Err(Error::InvalidGraph(format!("junction {} carries load", r.id)));
                    }
                    Node::junction()
                }
            };
            nodes.push(node);
        }
        let pairs = |v: Vec<[NodeId; 2]>| v.into_iter().map(|[a, b]| (a, b)).collect();
        CoupledGraph::new(nodes, pairs(file.elec_edges), pairs(file.road_edges), pairs(file.dep_edges))
    }

    /// Compact JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string(&self.to_file()).expect("graph serializes");
        s.push('\n');
        s
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_file(serde_json::from_str(s)?)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }
}

impl fmt::Display for CoupledGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} nodes ({} stations, {} junctions), {} elec / {} road / {} dep edges",
            self.node_count(),
            self.stations().count(),
            self.junctions().count(),
            self.elec_edges.len(),
            self.road_edges.len(),
            self.dep_edges.len()
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KindTag {
    Station,
    Junction,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub id: NodeId,
    pub kind: KindTag,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<Voltage>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub load: Option<f64>,
}

/// On-disk graph document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphFile {
    pub version: u32,
    pub nodes: Vec<NodeRecord>,
    pub elec_edges: Vec<[NodeId; 2]>,
    pub road_edges: Vec<[NodeId; 2]>,
    pub dep_edges: Vec<[NodeId; 2]>,
}
