use std::collections::{BTreeMap, BTreeSet};

use ndarray::Array2;
use rand::Rng;

use super::model::normalize_adjacency;
use crate::error::{Error, Result};
use crate::graph::{Edge, NodeId, Snapshot};
use crate::scalar::Scalar;
use crate::seed;

/// Rejection sampling gives up after this many attempts per requested pair.
const ATTEMPTS_PER_SAMPLE: usize = 100;

/// Dense inputs of one snapshot, rows indexed by the client's global node order.
#[derive(Debug, Clone)]
pub struct SnapshotTensors<T> {
    /// Renormalised adjacency `Â`.
    pub adj: Array2<T>,
    /// `Â · X`, constant during training.
    pub propagated: Array2<T>,
    /// Rows of nodes active in the window.
    pub present: Vec<usize>,
    /// Observed edges as row pairs (decoder targets with label 1).
    pub positives: Vec<(usize, usize)>,
}

impl<T: Scalar> SnapshotTensors<T> {
    /// `features` returns the feature row of a node; absent nodes get zero rows.
    pub fn build<'a>(
        snap: &Snapshot,
        node_order: &[NodeId],
        feature_dim: usize,
        features: impl Fn(NodeId) -> &'a [f64],
    ) -> Result<Self> {
        let index: BTreeMap<NodeId, usize> =
            node_order.iter().enumerate().map(|(i, &n)| (n, i)).collect();
        let adj = normalize_adjacency::<T>(snap, node_order)?;
        let mut x = Array2::<T>::zeros((node_order.len(), feature_dim));
        let mut present = Vec::with_capacity(snap.nodes.len());
        for n in &snap.nodes {
            let row = index[n];
            present.push(row);
            let f = features(*n);
            if f.len() != feature_dim {
                return Err(Error::Shape(format!(
                    "node {n} has {} features, expected {feature_dim}",
                    f.len()
                )));
            }
            for (j, &v) in f.iter().enumerate() {
                x[[row, j]] = T::of(v);
            }
        }
        let positives = snap
            .edges
            .keys()
            .map(|(a, b)| (index[a], index[b]))
            .collect();
        Ok(Self {
            propagated: adj.dot(&x),
            adj,
            present,
            positives,
        })
    }

    pub fn nodes(&self) -> usize {
        self.adj.nrows()
    }
}

/// Snapshot sequence plus pre-drawn negatives; targets of snapshot `t + offset` are
/// scored from the embeddings at `t`.
#[derive(Debug, Clone)]
pub struct TrainBatch<T> {
    pub snapshots: Vec<SnapshotTensors<T>>,
    pub negatives: Vec<Vec<(usize, usize)>>,
    pub offset: usize,
}

impl<T: Scalar> TrainBatch<T> {
    pub fn new(snapshots: Vec<SnapshotTensors<T>>, offset: usize) -> Result<Self> {
        if offset > 1 {
            return Err(Error::InvalidArgument(format!(
                "prediction offset must be 0 or 1, got {offset}"
            )));
        }
        let negatives = vec![Vec::new(); snapshots.len()];
        Ok(Self {
            snapshots,
            negatives,
            offset,
        })
    }

    pub fn with_negatives(mut self, ratio: f64, seed: u64) -> Result<Self> {
        self.negatives = self.draw_negatives(ratio, seed)?;
        Ok(self)
    }

    /// One negative list per snapshot, `round(ratio * positives)` pairs each.
    pub fn draw_negatives(&self, ratio: f64, seed: u64) -> Result<Vec<Vec<(usize, usize)>>> {
        self.snapshots
            .iter()
            .enumerate()
            .map(|(t, s)| {
                let count = negative_count(ratio, s.positives.len());
                if count == 0 {
                    return Ok(Vec::new());
                }
                let connected: BTreeSet<(usize, usize)> = s
                    .positives
                    .iter()
                    .map(|&(a, b)| (a.min(b), a.max(b)))
                    .collect();
                let mut rng = seed::rng(seed::derive(seed, "negatives", t as u64));
                sample_non_edges(&s.present, &connected, count, &mut rng)
            })
            .collect()
    }

    pub fn nodes(&self) -> usize {
        self.snapshots.first().map_or(0, SnapshotTensors::nodes)
    }
}

pub fn negative_count(ratio: f64, positives: usize) -> usize {
    (ratio * positives as f64).round().max(0.0) as usize
}

/// Uniform ordered pairs `(u, v)`, `u != v`, drawn from `nodes`, whose unordered form is
/// not in `connected`. Sampling is with replacement.
pub fn sample_non_edges<N: Copy + Ord>(
    nodes: &[N],
    connected: &BTreeSet<(N, N)>,
    count: usize,
    rng: &mut impl Rng,
) -> Result<Vec<(N, N)>> {
    if count == 0 {
        return Ok(Vec::new());
    }
    let n = nodes.len();
    let pairs = n * n.saturating_sub(1) / 2;
    let linked = connected
        .iter()
        .filter(|(a, b)| a != b && nodes.contains(a) && nodes.contains(b))
        .count();
    if pairs <= linked {
        return Err(Error::TooDense { requested: count });
    }
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0;
    while out.len() < count {
        attempts += 1;
        if attempts > ATTEMPTS_PER_SAMPLE * count {
            return Err(Error::TooDense { requested: count });
        }
        let u = nodes[rng.random_range(0..n)];
        let v = nodes[rng.random_range(0..n)];
        if u == v || connected.contains(&(u.min(v), u.max(v))) {
            continue;
        }
        out.push((u, v));
    }
    Ok(out)
}

/// Node pairs absent from the snapshot (either direction), `round(ratio * |edges|)` of them.
pub fn negative_sample(snap: &Snapshot, ratio: f64, seed: u64) -> Result<Vec<Edge>> {
    sample_from_snapshot(snap, negative_count(ratio, snap.edges.len()), seed)
}

pub fn sample_from_snapshot(snap: &Snapshot, count: usize, seed: u64) -> Result<Vec<Edge>> {
    let nodes: Vec<NodeId> = snap.nodes.iter().copied().collect();
    let connected: BTreeSet<Edge> = snap
        .edges
        .keys()
        .map(|&(a, b)| (a.min(b), a.max(b)))
        .collect();
    let mut rng = seed::rng(seed);
    sample_non_edges(&nodes, &connected, count, &mut rng)
}
