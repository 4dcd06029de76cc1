//! Configuration, caching and subcommands behind the `mfhs` binary.

pub mod cache;
pub mod commands;
pub mod config;

pub use cache::{CacheOutcome, CurveCache};
pub use commands::{CliError, Outcome, Run};
pub use config::{parse_config, serialize_config, ConfigError, GridSpec, RunConfig};
