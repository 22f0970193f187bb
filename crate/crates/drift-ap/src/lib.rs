//! Experiment harness for the drift-fluid AP scheme: run loop, metrics
//! against the exact drift-fluid limit, table reproduction, CSV/SVG output
//! and the `drift-ap` command line.

pub mod check;
pub mod cli;
pub mod config;
pub mod harness;
pub mod output;
pub mod tables;

pub use config::RunConfig;
pub use harness::{diff_from_limit, run, DiffMetrics, RunReport};
pub use tables::{reproduce_tables, Preset, Table, TableOptions};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Core(#[from] drift_ap_core::Error),
    #[error("invalid value for `{key}`: {value}")]
    Value { key: String, value: String },
    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("{0}")]
    Precondition(String),
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
