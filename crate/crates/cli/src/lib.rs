//! Experiment runner for `infospec`: TOML configs in, long-format CSV out.

// `!(x < y)` is used on purpose so NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod run;
pub mod table;
pub mod verify;

pub use config::{ConfigError, ExperimentConfig, ExperimentKind};
pub use run::{has_failures, run, run_with_workers};
pub use table::{emit_csv, to_csv_string, ResultRow};
