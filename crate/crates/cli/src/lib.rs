//! Command-line front end and local HTTP API for `kanjidist`.

pub mod app;
pub mod commands;
pub mod serve;
pub mod svg;
