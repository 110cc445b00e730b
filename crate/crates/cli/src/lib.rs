//! File formats, configuration and verification suites around
//! `rmotion-core`, plus the `rmotion` command-line driver.

pub mod commands;
pub mod config;
pub mod output;
pub mod suites;
