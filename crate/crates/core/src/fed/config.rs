use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Server aggregation rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scheme {
    /// Uniform weights `1/K`.
    #[serde(rename = "fedavg")]
    FedAvg,
    /// Weights proportional to client node counts.
    #[serde(rename = "fedavg_n")]
    FedAvgN,
    /// Uniform weights plus a proximal term in local training.
    #[serde(rename = "fedprox")]
    FedProx,
    /// Contribution-scaled average of the submitted models, no bounding.
    #[serde(rename = "entente_ub")]
    EntenteUb,
    /// Contribution-scaled, norm-bounded deltas.
    #[serde(rename = "entente")]
    Entente,
    /// As `Entente`, plus Gaussian noise on the aggregate.
    #[serde(rename = "entente_dp")]
    EntenteDp,
}

impl Scheme {
    pub const ALL: [Scheme; 6] = [
        Scheme::FedAvg,
        Scheme::FedAvgN,
        Scheme::FedProx,
        Scheme::EntenteUb,
        Scheme::Entente,
        Scheme::EntenteDp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::FedAvg => "fedavg",
            Scheme::FedAvgN => "fedavg_n",
            Scheme::FedProx => "fedprox",
            Scheme::EntenteUb => "entente_ub",
            Scheme::Entente => "entente",
            Scheme::EntenteDp => "entente_dp",
        }
    }

    /// Schemes that weight clients by contribution scaling.
    pub fn uses_acs(self) -> bool {
        matches!(self, Scheme::EntenteUb | Scheme::Entente | Scheme::EntenteDp)
    }

    pub fn bounds_updates(self) -> bool {
        matches!(self, Scheme::Entente | Scheme::EntenteDp)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown scheme `{s}`")))
    }
}

/// Gaussian noise on the aggregate: std `m_qs * sigma` per coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DpConfig {
    /// Query sensitivity; defaults to the norm bound.
    #[serde(default)]
    pub m_qs: Option<f64>,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    /// Only used for the reported epsilon estimate.
    #[serde(default = "default_delta")]
    pub delta: f64,
}

fn default_sigma() -> f64 {
    1.0
}
fn default_delta() -> f64 {
    0.1
}

impl Default for DpConfig {
    fn default() -> Self {
        Self {
            m_qs: None,
            sigma: default_sigma(),
            delta: default_delta(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EarlyStopConfig {
    #[serde(default = "default_true")]
    pub enabled: bool,
    /// Threshold on `||w_{i+1} - w_i|| / ||w_i||`.
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_patience")]
    pub patience: usize,
}

fn default_true() -> bool {
    true
}
fn default_tol() -> f64 {
    1e-4
}
fn default_patience() -> usize {
    3
}

impl Default for EarlyStopConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            tol: default_tol(),
            patience: default_patience(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FederationConfig {
    /// Client count `K`.
    pub clients: usize,
    /// Maximum iterations `R`.
    pub rounds: usize,
    /// Local epochs `E`.
    pub epochs: usize,
    pub lr: f64,
    pub c1: f64,
    pub c2: f64,
    /// Distance cap inside contribution scaling.
    pub omega: f64,
    /// Norm bound `M` on client deltas.
    pub bound: f64,
    /// Attachment count of the reference graph.
    pub m_ba: usize,
    pub wl_iters: usize,
    pub scheme: Scheme,
    /// Proximal weight for `fedprox`.
    pub mu: f64,
    pub dp: Option<DpConfig>,
    pub early_stop: EarlyStopConfig,
    /// Negatives drawn per observed edge in local training.
    pub negative_ratio: f64,
    /// Worker threads for client training; 0 uses one per core.
    pub workers: usize,
    pub seed: u64,
}

impl Default for FederationConfig {
    fn default() -> Self {
        Self {
            clients: 4,
            rounds: 30,
            epochs: 1,
            lr: 0.005,
            c1: 0.8,
            c2: 0.2,
            omega: 5.0,
            bound: 5.0,
            m_ba: 5,
            wl_iters: crate::graph::DEFAULT_WL_ITERS,
            scheme: Scheme::Entente,
            mu: 0.05,
            dp: None,
            early_stop: EarlyStopConfig::default(),
            negative_ratio: 1.0,
            workers: 0,
            seed: 0,
        }
    }
}

impl FederationConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.clients == 0 {
            return bad("clients must be >= 1".into());
        }
        if self.rounds == 0 {
            return bad("rounds must be >= 1".into());
        }
        if self.epochs == 0 {
            return bad("epochs must be >= 1".into());
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("lr must be positive, got {}", self.lr));
        }
        if !(self.c1 >= 0.0 && self.c2 >= 0.0) {
            return bad(format!("c1, c2 must be >= 0, got {}, {}", self.c1, self.c2));
        }
        if !(self.omega > 0.0) {
            return bad(format!("omega must be > 0, got {}", self.omega));
        }
        if !(self.bound > 0.0) {
            return bad(format!("bound must be > 0, got {}", self.bound));
        }
        if self.m_ba == 0 {
            return bad("m_ba must be >= 1".into());
        }
        if !(self.mu >= 0.0) {
            return bad(format!("mu must be >= 0, got {}", self.mu));
        }
        if !(self.negative_ratio > 0.0) {
            return bad(format!("negative_ratio must be > 0, got {}", self.negative_ratio));
        }
        if self.early_stop.patience == 0 || !(self.early_stop.tol >= 0.0) {
            return bad("early_stop needs patience >= 1 and tol >= 0".into());
        }
        if let Some(dp) = self.dp {
            if !(dp.sigma >= 0.0) || dp.m_qs.is_some_and(|m| !(m > 0.0)) {
                return bad("dp needs sigma >= 0 and m_qs > 0".into());
            }
            if !(dp.delta > 0.0 && dp.delta < 1.0) {
                return bad(format!("dp.delta = {} outside (0, 1)", dp.delta));
            }
        }
        Ok(())
    }

    /// Per-client ceiling on contribution weights, `c1 + c2 * omega`.
    pub fn weight_cap(&self) -> f64 {
        self.c1 + self.c2 * self.omega
    }

    /// Noise std of `entente_dp`; the default `DpConfig` when none is set.
    pub fn noise_std(&self) -> f64 {
        let dp = self.dp.unwrap_or_default();
        dp.m_qs.unwrap_or(self.bound) * dp.sigma
    }

    /// Order-of-magnitude privacy loss `K * M_qs / sigma * sqrt(R ln(1/delta))` with the
    /// hidden constant taken as 1. Informational only; infinite when sigma is 0.
    pub fn epsilon_estimate(&self) -> f64 {
        let dp = self.dp.unwrap_or_default();
        let m = dp.m_qs.unwrap_or(self.bound);
        self.clients as f64 * m / dp.sigma * (self.rounds as f64 * (1.0 / dp.delta).ln()).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scheme_names_round_trip() {
        for s in Scheme::ALL {
            assert_eq!(s.name().parse::<Scheme>().unwrap(), s);
            let json = serde_json::to_string(&s).unwrap();
            assert_eq!(json, format!("\"{}\"", s.name()));
        }
        assert!("fedopt".parse::<Scheme>().is_err());
    }

    #[test]
    fn defaults_validate() {
        let cfg = FederationConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.weight_cap(), 0.8 + 0.2 * 5.0);
        assert_eq!(cfg.noise_std(), 5.0);
    }

    #[test]
    fn invalid_values_rejected() {
        let mut cfg = FederationConfig {
            omega: 0.0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        cfg.omega = 5.0;
        cfg.rounds = 0;
        assert!(cfg.validate().is_err());
        cfg.rounds = 1;
        cfg.c2 = -0.1;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn epsilon_estimate_scales_with_clients_and_noise() {
        let mut cfg = FederationConfig {
            dp: Some(DpConfig::default()),
            ..Default::default()
        };
        // 4 clients, M = 5, sigma = 1, R = 30, delta = 0.1
        let expect = 20.0 * (30.0 * 10f64.ln()).sqrt();
        assert!((cfg.epsilon_estimate() - expect).abs() < 1e-9);
        cfg.dp = Some(DpConfig {
            sigma: 0.2,
            ..DpConfig::default()
        });
        assert!((cfg.epsilon_estimate() - 5.0 * expect).abs() < 1e-9);
        cfg.dp = Some(DpConfig {
            delta: 1.0,
            ..DpConfig::default()
        });
        assert!(cfg.validate().is_err());
    }
}
