//! Config-driven experiment runner: each experiment resolves its defaults,
//! validates them, runs the solvers, and produces a versioned JSON report plus
//! CSV tables.

// Negated float comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod experiments;
pub mod report;

pub use config::ExperimentConfig;
pub use error::{CliError, CliResult};
pub use experiments::{list_experiments, run_experiment, CatalogEntry};
pub use report::{ExperimentReport, Table, Verdict, REPORT_SCHEMA_VERSION};

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "RECUTIL_THREADS";
