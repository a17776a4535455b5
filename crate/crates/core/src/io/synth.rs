//! Stochastic-block temporal graphs with planted cross-block attack edges.

use std::collections::BTreeSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::edges::IdMap;
use crate::error::{Error, Result};
use crate::graph::{Label, LogEvent, NodeId};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSpec {
    pub nodes: usize,
    pub blocks: usize,
    /// Number of windows `T`.
    pub snapshots: usize,
    /// Window length in seconds.
    pub window: u64,
    /// Per-window probability of one event between two nodes of the same block.
    pub p_in: f64,
    /// Same, for nodes of different blocks.
    pub p_out: f64,
    pub anomalies: usize,
    /// Half-open window range `[start, end)` (0-based) holding the anomalies;
    /// defaults to the last 15% of windows.
    pub anomaly_window: Option<[usize; 2]>,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            nodes: 200,
            blocks: 4,
            snapshots: 20,
            window: 3600,
            p_in: 0.03,
            p_out: 0.0005,
            anomalies: 40,
            anomaly_window: None,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn anomaly_range(&self) -> [usize; 2] {
        self.anomaly_window.unwrap_or_else(|| {
            let test = ((self.snapshots as f64) * 0.15).round().max(1.0) as usize;
            [self.snapshots.saturating_sub(test), self.snapshots]
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.blocks == 0 || self.nodes < 2 * self.blocks {
            return bad(format!("{} nodes cannot fill {} blocks", self.nodes, self.blocks));
        }
        if self.snapshots == 0 || self.window == 0 {
            return bad("snapshots and window must be >= 1".into());
        }
        for (name, p) in [("p_in", self.p_in), ("p_out", self.p_out)] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} = {p} outside [0, 1]"));
            }
        }
        let [a, b] = self.anomaly_range();
        if self.anomalies > 0 && !(a < b && b <= self.snapshots) {
            return bad(format!("anomaly window [{a}, {b}) outside 0..{}", self.snapshots));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset {
    /// Sorted by timestamp.
    pub events: Vec<LogEvent>,
    /// Block of every node, indexed by node id.
    pub blocks: Vec<usize>,
    pub ids: IdMap,
}

/// Names are `h000`, `h001`, ...; node `i` gets dense id `i`.
pub fn synth_dataset(spec: &SynthSpec) -> Result<SynthDataset> {
    spec.validate()?;
    let mut rng = seed::rng(seed::derive(spec.seed, "synth", 0));
    let n = spec.nodes;
    let width = (n - 1).to_string().len().max(3);
    let mut ids = IdMap::default();
    for i in 0..n {
        ids.intern(&format!("h{i:0width$}"));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut blocks = vec![0; n];
    for (pos, &node) in order.iter().enumerate() {
        blocks[node] = pos % spec.blocks;
    }

    let w = spec.window;
    let mut events = Vec::new();
    let mut talked: BTreeSet<(usize, usize)> = BTreeSet::new();
    for t in 0..spec.snapshots {
        for a in 0..n {
            for b in a + 1..n {
                let p = if blocks[a] == blocks[b] { spec.p_in } else { spec.p_out };
                if rng.random::<f64>() < p {
                    let (src, dst) = if rng.random::<bool>() { (a, b) } else { (b, a) };
                    let ts = t as u64 * w + rng.random_range(0..w);
                    events.push(LogEvent::new(src as NodeId, dst as NodeId, ts, Label::Benign));
                    talked.insert((a, b));
                }
            }
        }
    }
    if events.is_empty() {
        return Err(Error::Config("spec produced no benign events".into()));
    }
    // anchor the time origin at 0 so window boundaries match the generator's
    let first = events
        .iter_mut()
        .min_by_key(|e| e.timestamp)
        .expect("non-empty");
    first.timestamp = 0;

    let mut candidates: Vec<(usize, usize)> = (0..n)
        .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
        .filter(|&(a, b)| blocks[a] != blocks[b] && !talked.contains(&(a, b)))
        .collect();
    if candidates.len() < spec.anomalies {
        return Err(Error::TooDense {
            requested: spec.anomalies,
        });
    }
    candidates.shuffle(&mut rng);
    let [start, end] = spec.anomaly_range();
    for &(a, b) in &candidates[..spec.anomalies] {
        let (src, dst) = if rng.random::<bool>() { (a, b) } else { (b, a) };
        let t = rng.random_range(start..end) as u64;
        let ts = t * w + rng.random_range(0..w);
        events.push(LogEvent::new(src as NodeId, dst as NodeId, ts, Label::Malicious));
    }
    events.sort_by_key(|e| e.timestamp);
    Ok(SynthDataset { events, blocks, ids })
}

/// `node,block` ground truth for partitioner checks.
pub fn write_blocks_csv(path: &Path, data: &SynthDataset) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["node", "block"])?;
    for (i, b) in data.blocks.iter().enumerate() {
        w.write_record([data.ids.display(i as NodeId), b.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
