//! Compressed Monte Carlo and compressed particle filters.

pub mod cloud;
pub mod cmc;
pub mod error;
pub mod exec;
pub mod experiments;
pub mod filters;
pub mod io;
pub mod models;
pub mod partition;
pub mod resample;
pub mod rng;

pub use cloud::{EssKind, WeightedCloud};
pub use cmc::{Selection, SummaryCloud};
pub use error::{Error, Result};
pub use exec::Execution;
pub use filters::{Algorithm, FilterConfig, FilterTrace, StateSpaceModel};
pub use partition::{IndexSets, Partition, PartitionRule};
pub use resample::{ResampleMode, ResamplePlan};
pub use rng::RngStream;
