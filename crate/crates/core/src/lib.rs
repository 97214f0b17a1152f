//! Patient-level EHR collaboration networks and survival prediction.
//!
//! The pipeline runs `synth` (or real data on disk) → `graph` → `models`
//! (built on `nn`) → `eval`, with `explain` for Shapley attribution and
//! `stats` for confounder correlations.

pub mod error;
pub mod eval;
pub mod explain;
pub mod graph;
pub mod models;
pub mod nn;
pub mod provenance;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
pub use provenance::RunMeta;
