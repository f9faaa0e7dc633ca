//! Scenario configuration, the analysis runner and report persistence for the `mms` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod report;
pub mod runner;

pub use config::{ConfigError, ScenarioConfig};
pub use report::{AnalysisOutcome, Check, ExperimentReport};
pub use runner::{run, RunError};
