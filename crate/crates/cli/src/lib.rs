//! Configuration, pipeline stages, exporters and the acceptance suite behind
//! the `twoscale` binary.

pub mod config;
pub mod error;
pub mod export;
pub mod pipeline;
pub mod validation;

pub use config::RunConfig;
pub use error::{CliError, CliResult};
