//! Command-line front end: configuration, mode dispatch and artifact I/O.

pub mod config;
pub mod run;
