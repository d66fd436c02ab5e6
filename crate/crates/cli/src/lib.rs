//! Batch front end: scenario configs in, trajectories and reports out.
//!
//! Exit codes: 0 success, 1 validation error, 2 solver or I/O failure,
//! 3 config parse error. Every failure prints one `area: reason` line to
//! stderr.

pub mod config;
pub mod error;
pub mod export;
mod run;

pub use config::ScenarioConfig;
pub use error::CliError;
pub use run::run;
