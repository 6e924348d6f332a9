//! Experiment runner and verification suites on top of `nor-core`.
//!
//! * [`config`]: experiment grids and their `key = value` text form.
//! * [`runner`]: executes the grid on a bounded worker pool.
//! * [`record`]: the CSV row schema.
//! * [`verify`]: Monte-Carlo and deterministic checks of the library's
//!   guarantees, reported as pass counts and frequencies.

pub mod config;
mod error;
pub mod record;
pub mod runner;
pub mod verify;

pub use config::{DatasetSpec, ExperimentConfig};
pub use error::{BenchError, Result};
pub use record::ResultRecord;
pub use runner::run;
pub use verify::{verify, Suite, VerificationReport, VerifyOptions};
