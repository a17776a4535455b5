//! Weisfeiler–Lehman label histograms and their multiset Jaccard similarity.
//!
//! Iteration 0 labels each node with its degree. Each later iteration replaces every
//! label (synchronously) with the FNV-1a hash of `"own|n1,n2,..."`, neighbour labels
//! sorted ascending. With 64-bit labels the chance that two distinct neighbourhoods
//! share a label among `L` distinct ones is about `L^2 / 2^65`; a collision can only
//! merge histogram buckets, which raises similarity slightly.

use std::collections::BTreeMap;
use std::fmt::Write;

use super::ba::StaticGraph;
use super::temporal::TemporalGraph;
use crate::error::{Error, Result};
use crate::seed::fnv1a64;

pub const DEFAULT_WL_ITERS: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WlHistogram {
    /// `max_iters + 1` multisets of labels.
    pub per_iteration: Vec<BTreeMap<u64, usize>>,
}

impl WlHistogram {
    pub fn iterations(&self) -> usize {
        self.per_iteration.len().saturating_sub(1)
    }

    pub fn node_count(&self) -> usize {
        self.per_iteration
            .first()
            .map(|h| h.values().sum())
            .unwrap_or(0)
    }
}

pub fn wl_histogram_adjacency(adj: &[Vec<usize>], max_iters: usize) -> WlHistogram {
    let mut labels: Vec<u64> = adj.iter().map(|nb| nb.len() as u64).collect();
    let mut per_iteration = vec![histogram(&labels)];
    let mut canon = String::new();
    let mut neigh = Vec::new();
    for _ in 0..max_iters {
        let next: Vec<u64> = adj
            .iter()
            .enumerate()
            .map(|(v, nb)| {
                neigh.clear();
                neigh.extend(nb.iter().map(|&u| labels[u]));
                neigh.sort_unstable();
                canon.clear();
                write!(canon, "{}|", labels[v]).unwrap();
                for (i, l) in neigh.iter().enumerate() {
                    if i > 0 {
                        canon.push(',');
                    }
                    write!(canon, "{l}").unwrap();
                }
                fnv1a64(canon.as_bytes())
            })
            .collect();
        labels = next;
        per_iteration.push(histogram(&labels));
    }
    WlHistogram { per_iteration }
}

pub fn wl_histogram(graph: &StaticGraph, max_iters: usize) -> WlHistogram {
    wl_histogram_adjacency(&graph.adjacency(), max_iters)
}

/// Sketch of the time-flattened, undirected graph (self-loops ignored).
pub fn wl_histogram_temporal(graph: &TemporalGraph, max_iters: usize) -> WlHistogram {
    let adj = graph.undirected_adjacency();
    let index: BTreeMap<_, _> = adj.keys().enumerate().map(|(i, &n)| (n, i)).collect();
    let dense: Vec<Vec<usize>> = adj
        .values()
        .map(|nb| nb.iter().map(|n| index[n]).collect())
        .collect();
    wl_histogram_adjacency(&dense, max_iters)
}

fn histogram(labels: &[u64]) -> BTreeMap<u64, usize> {
    let mut h = BTreeMap::new();
    for &l in labels {
        *h.entry(l).or_insert(0) += 1;
    }
    h
}

/// `Σ min(c1, c2) / Σ max(c1, c2)` over every (iteration, label) bucket.
///
/// Two empty sketches are identical and score 1.
pub fn jaccard_similarity(a: &WlHistogram, b: &WlHistogram) -> Result<f64> {
    if a.per_iteration.len() != b.per_iteration.len() {
        return Err(Error::IterationMismatch(a.iterations(), b.iterations()));
    }
    let mut inter = 0usize;
    let mut union = 0usize;
    for (ha, hb) in a.per_iteration.iter().zip(&b.per_iteration) {
        for (label, &ca) in ha {
            let cb = hb.get(label).copied().unwrap_or(0);
            inter += ca.min(cb);
            union += ca.max(cb);
        }
        for (label, &cb) in hb {
            if !ha.contains_key(label) {
                union += cb;
            }
        }
    }
    if union == 0 {
        return Ok(1.0);
    }
    Ok(inter as f64 / union as f64)
}
