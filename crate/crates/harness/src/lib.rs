//! Config-driven Monte Carlo runner for topology-inference experiments,
//! with CSV, JSON and SVG output.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod experiment;
pub mod output;

pub use config::{preset, ExperimentConfig, GraphSource, ProfileKind, X0Mode};
pub use error::{HarnessError, Result};
pub use experiment::{run_experiment, sweep_alpha, Cell, ExperimentReport, OracleValue, SweepTable};
pub use output::{emit_outputs, Format};
