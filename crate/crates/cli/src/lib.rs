//! Command-line front end for `qca-core`: single runs, parallel grid scans,
//! mean-field diagrams, continuous-time comparisons, exponent analysis and SVG
//! plots. Every command writes a `manifest.json` next to its outputs.
//!
//! Exit codes: 1 invalid input, 2 capacity exceeded, 3 numerical or
//! estimation failure, 4 file I/O.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod svg;

pub use cli::{run, Cli};
pub use error::{CliError, CliResult};
