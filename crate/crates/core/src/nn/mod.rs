//! The local detection model: GCN encoder, GRU temporal layer, inner-product decoder.

pub mod batch;
pub mod model;
pub mod params;
pub mod train;

pub use batch::{
    negative_count, negative_sample, sample_from_snapshot, sample_non_edges, SnapshotTensors,
    TrainBatch,
};
pub use model::{
    decode, embeddings, encode, loss_and_grad, normalize_adjacency, temporal, Prox, PROB_EPS,
};
pub use params::{glorot_bounds, init_params, Gate, Manifest, ModelDims, ModelParams, Segment};
pub use train::{local_train, Adam, LocalConfig, LocalOutcome};
