//! End-to-end runs: data preparation, federated training and evaluation.

pub mod config;
pub mod pipeline;
pub mod summary;

pub use config::{
    DataConfig, DataFormat, EvalConfig, ExperimentConfig, FeatureKind, ModelConfig, PartitionConfig,
    Precision, SeedOverrides, SplitConfig,
};
pub use pipeline::{
    build_global_graph, client_setups, evaluate, load_events, partition, prepare, strip_malicious, train,
    visible_attack_edges, ClientView, Evaluation, History, Prepared, RunStatus, Setups, Split,
    Trained,
};
pub use summary::RunSummary;
