//! File formats, experiment runner and command-line front end around
//! [`old3s_core`].
//!
//! - [`config`]: JSON run configuration with defaults for every tunable.
//! - [`data`]: CSV datasets in and out.
//! - [`metrics`]: the per-round metrics CSV.
//! - [`runner`]: the `(variant × seed)` grid, summaries and checkpoints.
//! - [`report`]: aggregation of summaries into a table.
//! - [`checkpoint`]: versioned learner snapshots.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod data;
pub mod error;
pub mod metrics;
pub mod report;
pub mod runner;

pub use old3s_core as core;
