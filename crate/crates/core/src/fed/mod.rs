//! Federated training: bootstrap, contribution scaling, aggregation and the server loop.

pub mod acs;
pub mod aggregate;
pub mod bootstrap;
pub mod config;
pub mod run;

pub use acs::{acs, norm_bound, ClientWeights};
pub use aggregate::{aggregate, Aggregated, ClientMeta};
pub use bootstrap::bootstrap;
pub use config::{DpConfig, EarlyStopConfig, FederationConfig, Scheme};
pub use run::{
    early_stop, run_federation, ClientSetup, FederationOutcome, FederationState, IterationRecord,
    WeightRow,
};
