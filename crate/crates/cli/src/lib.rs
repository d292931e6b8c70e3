//! Configuration, scenario drivers and output for the `polykin` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod commands;
pub mod config;
pub mod output;

pub use config::{parse_config, parse_config_unchecked, ConfigError, ConfigErrors, RunConfig};
