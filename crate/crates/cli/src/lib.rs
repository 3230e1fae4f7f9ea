//! Configuration, subcommands and file output for `bkp-pole-lab`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod output;

pub use commands::{run, run_config, Command, Outcome};
pub use config::{ConfigError, RawConfig, RunConfig};
