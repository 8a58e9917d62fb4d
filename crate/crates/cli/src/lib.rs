//! Command-line front end: file formats and commands behind the `gne` binary.

pub mod commands;
pub mod expr;
pub mod gamefile;
pub mod result;
pub mod scenario;
