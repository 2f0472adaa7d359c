//! Random undirected roadmap over the map (PRM-style sampling and radius connection).

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point2, Segment};
use crate::seeds::StreamRng;
use crate::world::MapSpec;

pub type NodeId = usize;
pub type EdgeId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub u: NodeId,
    pub v: NodeId,
    pub length: f64,
}

impl Edge {
    pub fn other(&self, node: NodeId) -> NodeId {
        if node == self.u {
            self.v
        } else {
            self.u
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoadmapConfig {
    pub n_nodes: usize,
    pub connect_radius: f64,
    pub max_edge_length: f64,
}

impl RoadmapConfig {
    /// Fine discretization, scenario graph (a).
    pub const DENSE: RoadmapConfig = RoadmapConfig { n_nodes: 300, connect_radius: 3.0, max_edge_length: 3.0 };
    /// Coarse discretization, scenario graph (b).
    pub const SPARSE: RoadmapConfig = RoadmapConfig { n_nodes: 100, connect_radius: 4.0, max_edge_length: 4.0 };

    pub fn validate(&self) -> Result<()> {
        if self.n_nodes < 2 {
            return Err(Error::Config("roadmap needs at least 2 nodes".into()));
        }
        if !(self.max_edge_length > 0.0 && self.max_edge_length <= self.connect_radius) {
            return Err(Error::Config(format!(
                "need 0 < max_edge_length ({}) <= connect_radius ({})",
                self.max_edge_length, self.connect_radius
            )));
        }
        Ok(())
    }
}

impl Default for RoadmapConfig {
    fn default() -> Self {
        Self::DENSE
    }
}

/// Immutable undirected graph. Edge lengths are Euclidean and double as usage times.
#[derive(Debug, Clone, PartialEq)]
pub struct Roadmap {
    nodes: Vec<Point2>,
    edges: Vec<Edge>,
    adjacency: Vec<Vec<(NodeId, EdgeId)>>,
}

#[derive(Serialize, Deserialize)]
struct NodeRecord {
    id: NodeId,
    x: f64,
    y: f64,
}

#[derive(Serialize, Deserialize)]
struct RoadmapRecord {
    nodes: Vec<NodeRecord>,
    edges: Vec<Edge>,
}

impl Roadmap {
    /// Builds a graph from explicit nodes and `(u, v)` pairs; lengths are computed.
    pub fn from_parts(nodes: Vec<Point2>, pairs: &[(NodeId, NodeId)]) -> Result<Self> {
        let edges = pairs
            .iter()
            .map(|&(u, v)| {
                if u >= nodes.len() || v >= nodes.len() {
                    return Err(Error::UnknownNode(u.max(v)));
                }
                Ok(Edge { u, v, length: nodes[u].distance(nodes[v]) })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_edges(nodes, edges)
    }

    fn from_edges(nodes: Vec<Point2>, edges: Vec<Edge>) -> Result<Self> {
        let mut adjacency = vec![Vec::new(); nodes.len()];
        let mut seen = std::collections::HashSet::new();
        for (id, e) in edges.iter().enumerate() {
            if e.u >= nodes.len() || e.v >= nodes.len() {
                return Err(Error::UnknownNode(e.u.max(e.v)));
            }
            if e.u == e.v {
                return Err(Error::Roadmap(format!("self-loop at node {}", e.u)));
            }
            if !seen.insert((e.u.min(e.v), e.u.max(e.v))) {
                return Err(Error::Roadmap(format!("duplicate edge {}-{}", e.u, e.v)));
            }
            let expected = nodes[e.u].distance(nodes[e.v]);
            if (e.length - expected).abs() > 1e-9 {
                return Err(Error::Roadmap(format!("edge {id} length {} differs from distance {expected}", e.length)));
            }
            adjacency[e.u].push((e.v, id));
            adjacency[e.v].push((e.u, id));
        }
        Ok(Self { nodes, edges, adjacency })
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn nodes(&self) -> &[Point2] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn position(&self, node: NodeId) -> Point2 {
        self.nodes[node]
    }

    pub fn edge(&self, id: EdgeId) -> &Edge {
        &self.edges[id]
    }

    pub fn segment(&self, id: EdgeId) -> Segment {
        let e = &self.edges[id];
        Segment::new(self.nodes[e.u], self.nodes[e.v])
    }

    /// `(neighbor, edge id)` pairs in insertion order.
    pub fn neighbors(&self, node: NodeId) -> &[(NodeId, EdgeId)] {
        &self.adjacency[node]
    }

    pub fn edge_between(&self, a: NodeId, b: NodeId) -> Option<EdgeId> {
        self.adjacency.get(a)?.iter().find(|&&(n, _)| n == b).map(|&(_, e)| e)
    }

    pub fn check_node(&self, node: NodeId) -> Result<()> {
        if node < self.nodes.len() {
            Ok(())
        } else {
            Err(Error::UnknownNode(node))
        }
    }

    pub fn average_degree(&self) -> f64 {
        2.0 * self.edges.len() as f64 / self.nodes.len() as f64
    }

    pub fn to_json(&self) -> Result<String> {
        let record = RoadmapRecord {
            nodes: self.nodes.iter().enumerate().map(|(id, p)| NodeRecord { id, x: p.x, y: p.y }).collect(),
            edges: self.edges.clone(),
        };
        Ok(serde_json::to_string_pretty(&record)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let record: RoadmapRecord = serde_json::from_str(text)?;
        let mut nodes = vec![Point2::default(); record.nodes.len()];
        let mut filled = vec![false; record.nodes.len()];
        for n in &record.nodes {
            if n.id >= nodes.len() || filled[n.id] {
                return Err(Error::Roadmap(format!("node ids must be dense and unique, got {}", n.id)));
            }
            nodes[n.id] = Point2::new(n.x, n.y);
            filled[n.id] = true;
        }
        Self::from_edges(nodes, record.edges)
    }
}

/// Samples `n_nodes` uniform points, links pairs closer than both the connect
/// radius and the edge-length cap, and keeps the largest connected component.
pub fn build_roadmap(map: &MapSpec, config: &RoadmapConfig, rng: &mut StreamRng) -> Result<Roadmap> {
    config.validate()?;
    map.validate()?;
    let points: Vec<Point2> = (0..config.n_nodes)
        .map(|_| Point2::new(rng.gen::<f64>() * map.width, rng.gen::<f64>() * map.height))
        .collect();
    let limit = config.connect_radius.min(config.max_edge_length);
    let mut pairs = Vec::new();
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            let d = points[i].distance(points[j]);
            if d > 0.0 && d <= limit {
                pairs.push((i, j));
            }
        }
    }

    // Largest component; ties go to the component holding the smallest node id.
    let mut component = vec![usize::MAX; points.len()];
    let mut adjacency = vec![Vec::new(); points.len()];
    for &(i, j) in &pairs {
        adjacency[i].push(j);
        adjacency[j].push(i);
    }
    let mut best = (0usize, 0usize);
    let mut next_label = 0;
    for start in 0..points.len() {
        if component[start] != usize::MAX {
            continue;
        }
        let mut stack = vec![start];
        component[start] = next_label;
        let mut size = 0;
        while let Some(n) = stack.pop() {
            size += 1;
            for &m in &adjacency[n] {
                if component[m] == usize::MAX {
                    component[m] = next_label;
                    stack.push(m);
                }
            }
        }
        if size > best.1 {
            best = (next_label, size);
        }
        next_label += 1;
    }
    if best.1 < 2 {
        return Err(Error::Roadmap(format!("largest connected component has {} node(s)", best.1)));
    }

    let mut remap = vec![usize::MAX; points.len()];
    let mut nodes = Vec::with_capacity(best.1);
    for (i, &p) in points.iter().enumerate() {
        if component[i] == best.0 {
            remap[i] = nodes.len();
            nodes.push(p);
        }
    }
    let kept: Vec<(NodeId, NodeId)> =
        pairs.iter().filter(|&&(i, _)| component[i] == best.0).map(|&(i, j)| (remap[i], remap[j])).collect();
    Roadmap::from_parts(nodes, &kept)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StaticPath {
    pub nodes: Vec<NodeId>,
    pub length: f64,
}

#[derive(Clone, Copy, PartialEq)]
struct QueueEntry {
    dist: f64,
    node: NodeId,
}

impl Eq for QueueEntry {}

impl Ord for QueueEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.dist.total_cmp(&self.dist).then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for QueueEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Length-minimal path (Dijkstra). `Ok(None)` when `dest` is unreachable.
pub fn shortest_path_static(g: &Roadmap, source: NodeId, dest: NodeId) -> Result<Option<StaticPath>> {
    g.check_node(source)?;
    g.check_node(dest)?;
    let mut dist = vec![f64::INFINITY; g.node_count()];
    let mut pred = vec![usize::MAX; g.node_count()];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(QueueEntry { dist: 0.0, node: source });
    while let Some(QueueEntry { dist: d, node }) = heap.pop() {
        if d > dist[node] {
            continue;
        }
        if node == dest {
            break;
        }
        for &(next, edge) in g.neighbors(node) {
            let nd = d + g.edge(edge).length;
            if nd < dist[next] {
                dist[next] = nd;
                pred[next] = node;
                heap.push(QueueEntry { dist: nd, node: next });
            }
        }
    }
    if dist[dest].is_infinite() {
        return Ok(None);
    }
    let mut nodes = vec![dest];
    let mut cur = dest;
    while cur != source {
        cur = pred[cur];
        nodes.push(cur);
    }
    nodes.reverse();
    Ok(Some(StaticPath { nodes, length: dist[dest] }))
}
