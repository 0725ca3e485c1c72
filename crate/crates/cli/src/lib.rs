//! Configuration parsing, mode dispatch and result encoding for the
//! `latgas` command-line tool.

pub mod config;
pub mod model;
pub mod report;
pub mod run;

pub use config::{parse_config, parse_config_with, ConfigErrors, Format, Mode, Overrides, RunConfig};
pub use report::{Cell, Report};
pub use run::{execute, Outcome, RunError};

/// Exit status for a successful run.
pub const EXIT_OK: i32 = 0;
/// Verification failed, or the run itself failed (I/O, drain budget).
pub const EXIT_FAILURE: i32 = 1;
/// The configuration or the model it describes is invalid.
pub const EXIT_INVALID: i32 = 2;

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "LATGAS_THREADS";
