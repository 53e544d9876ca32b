//! Command-line frontend for the few-shot classification library:
//! configuration, file IO, HTTP backends, sweep execution, and reports.

pub mod analyses;
pub mod config;
pub mod error;
pub mod http;
pub mod io;
pub mod report;
pub mod runner;
