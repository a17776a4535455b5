use serde::{Deserialize, Serialize};

use super::pipeline::{History, RunStatus};
use crate::adversary::AttackConfig;
use crate::fed::Scheme;
use crate::metrics::MetricsReport;

/// Contents of `metrics.json`: one evaluated (or diverged) run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSummary {
    pub scheme: Scheme,
    pub seed: u64,
    pub status: RunStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnosis: Option<String>,
    pub iterations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attack: Option<AttackConfig>,
    /// `None` for diverged runs.
    pub metrics: Option<MetricsReport>,
}

impl RunSummary {
    /// Merge a training history with its evaluation; the history's EPM is copied in.
    pub fn new(history: &History, attack: Option<&AttackConfig>, report: Option<MetricsReport>) -> Self {
        let metrics = report.map(|mut r| {
            r.epm = r.epm.or(history.epm);
            r
        });
        Self {
            scheme: history.scheme,
            seed: history.seed,
            status: history.status,
            diagnosis: history.diagnosis.clone(),
            iterations: history.iterations,
            attack: attack.cloned(),
            metrics,
        }
    }
}
