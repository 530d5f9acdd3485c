//! File formats, the query language parser, and the command-line front
//! end.

pub mod cli;
pub mod database;
pub mod query;
pub mod registry;
