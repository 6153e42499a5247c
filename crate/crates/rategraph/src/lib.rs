//! Model files, exporters, ensembles and the command-line front end.

pub mod cli;
pub mod dsl;
pub mod ensemble;
pub mod error;
pub mod export;
pub mod system;
