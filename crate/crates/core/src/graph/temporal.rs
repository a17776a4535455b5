use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::partition::PartitionMap;
use crate::error::{Error, Result};

pub type NodeId = u64;
pub type Edge = (NodeId, NodeId);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    Benign,
    Malicious,
}

impl Label {
    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(Label::Benign),
            1 => Some(Label::Malicious),
            _ => None,
        }
    }

    pub fn as_u8(self) -> u8 {
        match self {
            Label::Benign => 0,
            Label::Malicious => 1,
        }
    }
}

/// One authentication / flow record: a directed interaction at a point in time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LogEvent {
    pub src: NodeId,
    pub dst: NodeId,
    pub timestamp: u64,
    pub label: Label,
}

impl LogEvent {
    pub fn new(src: NodeId, dst: NodeId, timestamp: u64, label: Label) -> Self {
        Self {
            src,
            dst,
            timestamp,
            label,
        }
    }

    pub fn is_self_loop(&self) -> bool {
        self.src == self.dst
    }
}

/// How node feature vectors are derived when a graph is built.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum FeatureMode {
    /// `[1, ln(1 + degree)]` where degree counts distinct undirected neighbours.
    #[default]
    Degree,
    /// One-hot over the position of the node in the sorted node set.
    NodeIndex,
    /// One-hot over coarse node roles. Nodes without a role get the default vector.
    Role {
        roles: BTreeMap<NodeId, usize>,
        count: usize,
    },
}

impl FeatureMode {
    fn default_vector(&self, dim: usize) -> Vec<f64> {
        match self {
            FeatureMode::Degree => vec![1.0, 0.0],
            FeatureMode::NodeIndex | FeatureMode::Role { .. } => vec![0.0; dim],
        }
    }
}

/// Node and event store covering everything one party (client or simulator) sees.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalGraph {
    pub nodes: BTreeSet<NodeId>,
    /// Sorted by timestamp; ties keep ingestion order.
    pub events: Vec<LogEvent>,
    pub node_features: BTreeMap<NodeId, Vec<f64>>,
    pub default_feature: Vec<f64>,
    /// Endpoints owned by another client (set by [`augment_one_hop`]).
    pub foreign: BTreeSet<NodeId>,
    /// Warning flag: at least one event has `src == dst`.
    pub has_self_loops: bool,
}

impl TemporalGraph {
    pub fn feature_dim(&self) -> usize {
        self.default_feature.len()
    }

    pub fn feature(&self, node: NodeId) -> &[f64] {
        self.node_features
            .get(&node)
            .map(Vec::as_slice)
            .unwrap_or(&self.default_feature)
    }

    /// Undirected neighbour sets of the time-flattened graph, self-loops dropped.
    pub fn undirected_adjacency(&self) -> BTreeMap<NodeId, BTreeSet<NodeId>> {
        let mut adj: BTreeMap<NodeId, BTreeSet<NodeId>> =
            self.nodes.iter().map(|&n| (n, BTreeSet::new())).collect();
        for e in &self.events {
            if e.is_self_loop() {
                continue;
            }
            adj.entry(e.src).or_default().insert(e.dst);
            adj.entry(e.dst).or_default().insert(e.src);
        }
        adj
    }

    /// Undirected weighted edges (event counts) of the flattened graph.
    pub fn weighted_edges(&self) -> BTreeMap<Edge, f64> {
        let mut w = BTreeMap::new();
        for e in &self.events {
            if e.is_self_loop() {
                continue;
            }
            let key = (e.src.min(e.dst), e.src.max(e.dst));
            *w.entry(key).or_insert(0.0) += 1.0;
        }
        w
    }

    pub fn time_span(&self) -> Option<(u64, u64)> {
        Some((self.events.first()?.timestamp, self.events.last()?.timestamp))
    }

    fn with_events(&self, events: Vec<LogEvent>) -> TemporalGraph {
        let nodes: BTreeSet<NodeId> = events.iter().flat_map(|e| [e.src, e.dst]).collect();
        let node_features = nodes
            .iter()
            .map(|&n| (n, self.feature(n).to_vec()))
            .collect();
        TemporalGraph {
            has_self_loops: events.iter().any(LogEvent::is_self_loop),
            foreign: self.foreign.intersection(&nodes).copied().collect(),
            nodes,
            events,
            node_features,
            default_feature: self.default_feature.clone(),
        }
    }
}

pub fn build_graph(events: &[LogEvent], mode: &FeatureMode) -> Result<TemporalGraph> {
    if events.is_empty() {
        return Err(Error::EmptyEvents);
    }
    let mut sorted = events.to_vec();
    sorted.sort_by_key(|e| e.timestamp);
    let nodes: BTreeSet<NodeId> = sorted.iter().flat_map(|e| [e.src, e.dst]).collect();

    let dim = match mode {
        FeatureMode::Degree => 2,
        FeatureMode::NodeIndex => nodes.len(),
        FeatureMode::Role { count, .. } => *count,
    };
    let mut graph = TemporalGraph {
        has_self_loops: sorted.iter().any(LogEvent::is_self_loop),
        nodes,
        events: sorted,
        node_features: BTreeMap::new(),
        default_feature: mode.default_vector(dim),
        foreign: BTreeSet::new(),
    };

    graph.node_features = match mode {
        FeatureMode::Degree => graph
            .undirected_adjacency()
            .into_iter()
            .map(|(n, nb)| (n, vec![1.0, (1.0 + nb.len() as f64).ln()]))
            .collect(),
        FeatureMode::NodeIndex => graph
            .nodes
            .iter()
            .enumerate()
            .map(|(i, &n)| {
                let mut v = vec![0.0; dim];
                v[i] = 1.0;
                (n, v)
            })
            .collect(),
        FeatureMode::Role { roles, count } => {
            let mut out = BTreeMap::new();
            for &n in &graph.nodes {
                let mut v = vec![0.0; *count];
                match roles.get(&n) {
                    Some(&r) if r < *count => v[r] = 1.0,
                    Some(&r) => {
                        return Err(Error::InvalidArgument(format!(
                            "role {r} of node {n} out of range 0..{count}"
                        )))
                    }
                    None => {}
                }
                out.insert(n, v);
            }
            out
        }
    };
    Ok(graph)
}

/// Events of one fixed-duration window merged into weighted edges.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    /// 1-based position in the sequence.
    pub index: usize,
    /// Endpoints of the events inside the window.
    pub nodes: BTreeSet<NodeId>,
    /// Directed `(src, dst)` to event count.
    pub edges: BTreeMap<Edge, f64>,
    /// Edges carrying at least one malicious event.
    pub malicious: BTreeSet<Edge>,
    /// `[start, end)` in seconds.
    pub window: (u64, u64),
}

impl Snapshot {
    pub fn empty(index: usize, window: (u64, u64)) -> Self {
        Self {
            index,
            nodes: BTreeSet::new(),
            edges: BTreeMap::new(),
            malicious: BTreeSet::new(),
            window,
        }
    }

    pub fn add_event(&mut self, src: NodeId, dst: NodeId, malicious: bool) {
        self.nodes.insert(src);
        self.nodes.insert(dst);
        *self.edges.entry((src, dst)).or_insert(0.0) += 1.0;
        if malicious {
            self.malicious.insert((src, dst));
        }
    }

    /// True when the pair is an edge in either direction.
    pub fn connects(&self, a: NodeId, b: NodeId) -> bool {
        self.edges.contains_key(&(a, b)) || self.edges.contains_key(&(b, a))
    }

    pub fn total_weight(&self) -> f64 {
        self.edges.values().sum()
    }
}

/// Number of windows needed to cover `[first, last]` when window 1 opens at `first`.
pub fn snapshot_count(first: u64, last: u64, window: u64) -> usize {
    ((last - first) / window) as usize + 1
}

/// Cut the graph into consecutive windows starting at its first event.
pub fn snapshot_split(graph: &TemporalGraph, window_seconds: u64) -> Result<Vec<Snapshot>> {
    if window_seconds == 0 {
        return Err(Error::InvalidArgument("window_seconds must be > 0".into()));
    }
    let Some((first, last)) = graph.time_span() else {
        return Ok(Vec::new());
    };
    Ok(snapshot_range(
        graph,
        window_seconds,
        first,
        snapshot_count(first, last, window_seconds),
    ))
}

/// Cut the graph into `count` windows opening at `origin`; events outside are ignored.
///
/// Used so every client shares the simulator's time indexing.
pub fn snapshot_range(
    graph: &TemporalGraph,
    window_seconds: u64,
    origin: u64,
    count: usize,
) -> Vec<Snapshot> {
    assert!(window_seconds > 0);
    let mut snaps: Vec<Snapshot> = (0..count)
        .map(|i| {
            let start = origin + i as u64 * window_seconds;
            Snapshot::empty(i + 1, (start, start + window_seconds))
        })
        .collect();
    for e in &graph.events {
        if e.timestamp < origin {
            continue;
        }
        let slot = ((e.timestamp - origin) / window_seconds) as usize;
        if let Some(s) = snaps.get_mut(slot) {
            s.add_event(e.src, e.dst, e.label == Label::Malicious);
        }
    }
    snaps
}

/// The firewall view of client `k`: every event with at least one endpoint it owns.
pub fn extract_client_graph(graph: &TemporalGraph, pm: &PartitionMap, k: usize) -> TemporalGraph {
    let owned = |n: &NodeId| pm.client_of(*n) == Some(k);
    let events = graph
        .events
        .iter()
        .filter(|e| owned(&e.src) || owned(&e.dst))
        .copied()
        .collect();
    let mut g = graph.with_events(events);
    g.foreign.clear();
    g
}

/// Flag endpoints owned by other clients and reset their features to the default vector.
pub fn augment_one_hop(client_graph: &TemporalGraph, pm: &PartitionMap, k: usize) -> TemporalGraph {
    let mut g = client_graph.clone();
    for &n in &client_graph.nodes {
        if pm.client_of(n) != Some(k) {
            g.foreign.insert(n);
            g.node_features.insert(n, g.default_feature.clone());
        }
    }
    g
}

/// Client view without cross-client edges (augmentation ablation).
pub fn internal_only(client_graph: &TemporalGraph, pm: &PartitionMap, k: usize) -> TemporalGraph {
    let events = client_graph
        .events
        .iter()
        .filter(|e| pm.client_of(e.src) == Some(k) && pm.client_of(e.dst) == Some(k))
        .copied()
        .collect();
    let mut g = client_graph.with_events(events);
    g.foreign.clear();
    g
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(src: NodeId, dst: NodeId, t: u64) -> LogEvent {
        LogEvent::new(src, dst, t, Label::Benign)
    }

    #[test]
    fn build_collects_nodes_and_sorts() {
        let g = build_graph(&[ev(2, 3, 20), ev(1, 2, 10)], &FeatureMode::Degree).unwrap();
        assert_eq!(g.nodes, BTreeSet::from([1, 2, 3]));
        assert_eq!(g.events.len(), 2);
        assert_eq!(g.events[0].timestamp, 10);
        assert!(!g.has_self_loops);
        assert_eq!(g.feature(2), &[1.0, 3f64.ln()]);
        assert_eq!(g.feature(1), &[1.0, 2f64.ln()]);
    }

    #[test]
    fn self_loop_is_kept_and_flagged() {
        let g = build_graph(&[ev(1, 1, 5)], &FeatureMode::Degree).unwrap();
        assert!(g.has_self_loops);
        assert_eq!(g.events.len(), 1);
        assert_eq!(g.nodes, BTreeSet::from([1]));
    }

    #[test]
    fn empty_stream_is_rejected() {
        let err = build_graph(&[], &FeatureMode::Degree).unwrap_err();
        assert_eq!(err.to_string(), "empty event stream");
    }

    #[test]
    fn node_index_and_role_features() {
        let g = build_graph(&[ev(5, 9, 0)], &FeatureMode::NodeIndex).unwrap();
        assert_eq!(g.feature(5), &[1.0, 0.0]);
        assert_eq!(g.feature(9), &[0.0, 1.0]);

        let mode = FeatureMode::Role {
            roles: BTreeMap::from([(5, 2)]),
            count: 3,
        };
        let g = build_graph(&[ev(5, 9, 0)], &mode).unwrap();
        assert_eq!(g.feature(5), &[0.0, 0.0, 1.0]);
        assert_eq!(g.feature(9), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn thirty_minute_windows() {
        let g = build_graph(&[ev(1, 2, 0), ev(2, 3, 100), ev(3, 4, 2000)], &FeatureMode::Degree)
            .unwrap();
        let snaps = snapshot_split(&g, 1800).unwrap();
        assert_eq!(snaps.len(), 2);
        assert_eq!(snaps[0].edges.len(), 2);
        assert_eq!(snaps[1].edges.len(), 1);
        assert_eq!(snaps[1].window, (1800, 3600));
        assert_eq!(snaps[1].index, 2);
    }

    #[test]
    fn single_event_and_merge() {
        let g = build_graph(&[ev(1, 2, 7)], &FeatureMode::Degree).unwrap();
        let snaps = snapshot_split(&g, 60).unwrap();
        assert_eq!(snaps.len(), 1);
        assert_eq!(snaps[0].edges[&(1, 2)], 1.0);

        let g = build_graph(&[ev(1, 2, 1), ev(1, 2, 2), ev(1, 2, 3)], &FeatureMode::Degree)
            .unwrap();
        let snaps = snapshot_split(&g, 60).unwrap();
        assert_eq!(snaps[0].edges[&(1, 2)], 3.0);
    }

    #[test]
    fn empty_windows_are_kept() {
        let g = build_graph(&[ev(1, 2, 0), ev(1, 2, 250)], &FeatureMode::Degree).unwrap();
        let snaps = snapshot_split(&g, 100).unwrap();
        assert_eq!(snaps.len(), 3);
        assert!(snaps[1].edges.is_empty());
        assert!(snaps[1].nodes.is_empty());
    }

    #[test]
    fn zero_window_is_rejected() {
        let g = build_graph(&[ev(1, 2, 0)], &FeatureMode::Degree).unwrap();
        assert!(snapshot_split(&g, 0).is_err());
    }

    fn two_clients() -> (TemporalGraph, PartitionMap) {
        // 1,2,3 -> client 1; 4,5 -> client 2
        let g = build_graph(
            &[ev(1, 2, 0), ev(2, 3, 1), ev(3, 4, 2), ev(5, 1, 3), ev(4, 5, 4)],
            &FeatureMode::Degree,
        )
        .unwrap();
        let pm = PartitionMap::new(BTreeMap::from([(1, 1), (2, 1), (3, 1), (4, 2), (5, 2)]), 2)
            .unwrap();
        (g, pm)
    }

    #[test]
    fn client_view_keeps_cross_events() {
        let (g, pm) = two_clients();
        let c1 = extract_client_graph(&g, &pm, 1);
        assert_eq!(c1.events.len(), 4);
        assert_eq!(c1.nodes, BTreeSet::from([1, 2, 3, 4, 5]));
        let c2 = extract_client_graph(&g, &pm, 2);
        assert_eq!(c2.events.len(), 3);
        assert_eq!(c2.nodes, BTreeSet::from([1, 3, 4, 5]));
    }

    #[test]
    fn augmentation_flags_foreign_nodes() {
        let (g, pm) = two_clients();
        let c1 = augment_one_hop(&extract_client_graph(&g, &pm, 1), &pm, 1);
        assert_eq!(c1.nodes.len(), 5);
        assert_eq!(c1.foreign, BTreeSet::from([4, 5]));
        assert_eq!(c1.feature(4), c1.default_feature.as_slice());
        assert_eq!(augment_one_hop(&c1, &pm, 1), c1);
    }

    #[test]
    fn augmentation_without_cross_events_is_identity() {
        let g = build_graph(&[ev(1, 2, 0), ev(3, 4, 1)], &FeatureMode::Degree).unwrap();
        let pm = PartitionMap::new(BTreeMap::from([(1, 1), (2, 1), (3, 2), (4, 2)]), 2).unwrap();
        let c1 = extract_client_graph(&g, &pm, 1);
        assert_eq!(augment_one_hop(&c1, &pm, 1), c1);
    }

    #[test]
    fn single_owner_view_is_whole_graph() {
        let g = build_graph(&[ev(1, 2, 0), ev(2, 3, 1)], &FeatureMode::Degree).unwrap();
        let pm = PartitionMap::new(BTreeMap::from([(1, 1), (2, 1), (3, 1), (9, 2)]), 2).unwrap();
        assert_eq!(extract_client_graph(&g, &pm, 1), g);
    }

    #[test]
    fn internal_only_drops_cross_events() {
        let (g, pm) = two_clients();
        let c1 = internal_only(&extract_client_graph(&g, &pm, 1), &pm, 1);
        assert_eq!(c1.events.len(), 2);
        assert_eq!(c1.nodes, BTreeSet::from([1, 2, 3]));
    }
}
