//! Configuration-driven runner for the `magcurv` command-line tool.

pub mod commands;
pub mod config;
pub mod expr;
pub mod system;

pub use commands::{run, Artifact, Outcome};
pub use config::{load_config, parse_config, ConfigError, RunConfig};
pub use expr::{EvalError, Expression, ParseError};
