//! Files in and out: edge lists, partitions, synthetic data and run artifacts.

pub mod artifacts;
pub mod edges;
pub mod lanl;
pub mod partition;
pub mod synth;

pub use artifacts::{
    read_json, read_model, read_pr_curve, read_weights_csv, write_json, write_model,
    write_pr_curve, write_weights_csv,
};
pub use edges::{load_edge_csv, read_edges, write_edge_csv, write_edges, EdgeList, IdMap};
pub use lanl::{load_lanl, read_lanl_auth, read_redteam, RedTeam};
pub use partition::{read_partition_csv, write_partition_csv};
pub use synth::{synth_dataset, write_blocks_csv, SynthDataset, SynthSpec};
