//! Barabási–Albert reference graphs.

use std::collections::{BTreeSet, VecDeque};

use rand::Rng;

use crate::error::{Error, Result};
use crate::seed;

/// Undirected simple graph on nodes `0..n`; edges stored as `(u, v)` with `u < v`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StaticGraph {
    pub n: usize,
    pub edges: BTreeSet<(usize, usize)>,
}

impl StaticGraph {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            edges: BTreeSet::new(),
        }
    }

    /// Insert an undirected edge; returns false for self-loops and duplicates.
    pub fn add_edge(&mut self, a: usize, b: usize) -> bool {
        assert!(a < self.n && b < self.n, "node out of range");
        if a == b {
            return false;
        }
        self.edges.insert((a.min(b), a.max(b)))
    }

    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(u, v) in &self.edges {
            adj[u].push(v);
            adj[v].push(u);
        }
        adj
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.adjacency().iter().map(Vec::len).collect()
    }

    pub fn is_connected(&self) -> bool {
        if self.n == 0 {
            return true;
        }
        let adj = self.adjacency();
        let mut seen = vec![false; self.n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    queue.push_back(v);
                }
            }
        }
        count == self.n
    }

    /// Relabel node `i` as `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> StaticGraph {
        let mut g = StaticGraph::new(self.n);
        for &(u, v) in &self.edges {
            g.add_edge(perm[u], perm[v]);
        }
        g
    }
}

/// Preferential-attachment graph: a complete graph on the first `m` nodes, then each
/// new node links to `m` distinct existing nodes drawn with probability proportional
/// to their current degree.
///
/// Edge count is always `m(m-1)/2 + (n-m)m`.
pub fn ba_generate(n: usize, m: usize, seed: u64) -> Result<StaticGraph> {
    if m == 0 || n <= m {
        return Err(Error::InvalidArgument(format!(
            "BA model needs n > m >= 1 (n={n}, m={m})"
        )));
    }
    let mut rng = seed::rng(seed);
    let mut g = StaticGraph::new(n);
    // Every edge endpoint appears once, so a uniform draw is degree-proportional.
    let mut endpoints: Vec<usize> = Vec::with_capacity(2 * (m * m + n * m));
    for u in 0..m {
        for v in (u + 1)..m {
            g.add_edge(u, v);
            endpoints.extend([u, v]);
        }
    }
    for new in m..n {
        let mut targets = BTreeSet::new();
        while targets.len() < m {
            let pick = if endpoints.is_empty() {
                // m == 1 at the first step: the single seed node has degree 0.
                rng.random_range(0..new)
            } else {
                endpoints[rng.random_range(0..endpoints.len())]
            };
            targets.insert(pick);
        }
        for t in targets {
            g.add_edge(new, t);
            endpoints.extend([new, t]);
        }
    }
    Ok(g)
}
