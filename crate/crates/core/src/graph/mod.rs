//! Graph construction, temporal snapshots, client partitioning and graph sketches.

pub mod ba;
pub mod partition;
pub mod temporal;
pub mod wl;

pub use ba::{ba_generate, StaticGraph};
pub use partition::{partition_nodes, PartitionMap, PartitionStrategy};
pub use temporal::{
    augment_one_hop, build_graph, extract_client_graph, internal_only, snapshot_count,
    snapshot_range, snapshot_split, Edge, FeatureMode, Label, LogEvent, NodeId, Snapshot,
    TemporalGraph,
};
pub use wl::{
    jaccard_similarity, wl_histogram, wl_histogram_adjacency, wl_histogram_temporal,
    WlHistogram, DEFAULT_WL_ITERS,
};
