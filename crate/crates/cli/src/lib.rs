//! Scenario files, run orchestration, exports and plot scripts for the
//! `rendezvous` command.

pub mod app;
pub mod error;
pub mod export;
pub mod plots;
pub mod report;
pub mod scenario;

pub use error::{CliError, Result};
