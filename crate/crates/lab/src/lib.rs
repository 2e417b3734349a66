//! Experiment registry, sweep runner and artifact writer for phasor-graph
//! agents.

pub mod artifact;
pub mod config;
pub mod error;
pub mod exp;
pub mod experiment;
pub mod registry;
pub mod stats;

pub use config::Profile;
pub use error::{LabError, LabResult};
pub use experiment::{execute, CellKey, Experiment, Run};
