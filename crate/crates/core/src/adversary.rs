//! Replay-and-scale poisoning: a compromised client copies future attack edges into its
//! training snapshots and inflates the model it submits.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Edge, Snapshot};
use crate::nn::ModelParams;
use crate::scalar::Scalar;
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackConfig {
    /// 1-based client indices under attacker control.
    pub malicious_clients: BTreeSet<usize>,
    /// Per-snapshot replay probability.
    pub p: f64,
    /// Factor applied to the submitted parameters.
    pub gamma: f64,
}

impl AttackConfig {
    pub fn validate(&self, clients: usize) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::Config(format!("attack p must be in [0, 1], got {}", self.p)));
        }
        if !(self.gamma >= 1.0 && self.gamma.is_finite()) {
            return Err(Error::Config(format!("attack gamma must be >= 1, got {}", self.gamma)));
        }
        if let Some(&k) = self.malicious_clients.iter().find(|&&k| k == 0 || k > clients) {
            return Err(Error::Config(format!(
                "malicious client {k} outside 1..={clients}"
            )));
        }
        Ok(())
    }

    pub fn controls(&self, client: usize) -> bool {
        self.malicious_clients.contains(&client)
    }
}

/// Replay `em` into each snapshot with probability `p`.
///
/// One uniform draw per snapshot; on success every edge of `em` that is absent from the
/// snapshot and whose endpoints are both active is added once with a benign label.
/// Returns the poisoned copy and the injected-edges-per-malicious-edge ratio.
pub fn poison_client_data(snapshots: &[Snapshot], em: &[Edge], p: f64, seed: u64) -> (Vec<Snapshot>, f64) {
    let mut rng = seed::rng(seed);
    let mut injected = 0usize;
    let out = snapshots
        .iter()
        .map(|snap| {
            let draw: f64 = rng.random();
            let mut s = snap.clone();
            if draw < p {
                for &(a, b) in em {
                    if a != b
                        && snap.nodes.contains(&a)
                        && snap.nodes.contains(&b)
                        && !s.connects(a, b)
                    {
                        s.add_event(a, b, false);
                        injected += 1;
                    }
                }
            }
            s
        })
        .collect();
    let epm = if em.is_empty() {
        0.0
    } else {
        injected as f64 / em.len() as f64
    };
    (out, epm)
}

/// Every coordinate multiplied by `gamma`.
pub fn scale_update<T: Scalar>(w: &ModelParams<T>, gamma: f64) -> ModelParams<T> {
    let g = T::of(gamma);
    ModelParams {
        dims: w.dims,
        flat: w.flat.iter().map(|&x| x * g).collect(),
    }
}
