//! Drivers behind the `obdf-sqd` command: single points, geometry scans and
//! comparison reports.

pub mod config;
pub mod error;
pub mod point;
pub mod report;
pub mod scan;

pub use config::{GeometryLabel, InputSpec, RunConfig};
pub use error::{CliError, Result};
