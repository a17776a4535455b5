//! Federated training of temporal graph autoencoders for edge-level intrusion
//! detection across organisational silos.
//!
//! The model ([`nn`]) and the server ([`fed`]) are generic over [`Scalar`]
//! (`f32` or `f64`); scoring and metrics always run in `f64`. The aliases below
//! name the two concrete instantiations.

// `!(x > 0.0)` is how config checks reject NaN along with non-positive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adversary;
pub mod error;
pub mod experiment;
pub mod fed;
pub mod graph;
pub mod io;
pub mod metrics;
pub mod nn;
pub mod scalar;
pub mod seed;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type ModelParamsF32 = nn::ModelParams<f32>;
pub type ModelParamsF64 = nn::ModelParams<f64>;
pub type TrainBatchF32 = nn::TrainBatch<f32>;
pub type TrainBatchF64 = nn::TrainBatch<f64>;
pub type ClientSetupF32 = fed::ClientSetup<f32>;
pub type ClientSetupF64 = fed::ClientSetup<f64>;
pub type FederationOutcomeF32 = fed::FederationOutcome<f32>;
pub type FederationOutcomeF64 = fed::FederationOutcome<f64>;
