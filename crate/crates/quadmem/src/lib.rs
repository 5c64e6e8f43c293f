//! Configuration, file formats and command-line front end for
//! [`quadmem_core`].

pub mod cli;
pub mod config;
pub mod error;
pub mod output;
pub mod run;

pub use config::{parse_config, parse_config_str, Resolved, RunConfig};
pub use error::CliError;
pub use run::{dispatch, RunSummary};
