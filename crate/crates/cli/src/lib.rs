//! Library surface of the `biaslens` command-line tool, split out so the
//! commands can be driven directly from integration tests.

pub mod commands;
pub mod config;
