//! Batch verification runner: configuration, parameter sweeps and
//! machine-readable records for the `locon-core` checks.

pub mod config;
pub mod record;
pub mod suites;
