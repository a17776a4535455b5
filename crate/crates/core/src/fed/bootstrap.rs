use super::config::FederationConfig;
use crate::error::Result;
use crate::graph::{ba_generate, jaccard_similarity, wl_histogram, WlHistogram};
use crate::seed;

/// Sketch similarity of every client to the server's reference graph.
///
/// The reference graph has `total_nodes` nodes and is built once per run.
pub fn bootstrap(cfg: &FederationConfig, total_nodes: usize, sketches: &[WlHistogram]) -> Result<Vec<f64>> {
    let reference = ba_generate(total_nodes, cfg.m_ba, seed::derive(cfg.seed, "reference", 0))?;
    let reference = wl_histogram(&reference, cfg.wl_iters);
    sketches
        .iter()
        .map(|s| jaccard_similarity(s, &reference))
        .collect()
}
