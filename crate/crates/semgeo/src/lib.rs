//! File formats, configuration, reports and the command-line driver built
//! on `semgeo-core`.

pub mod commands;
pub mod config;
pub mod error;
pub mod format;
pub mod output;
pub mod table;

pub use commands::{run, Command, Report};
pub use config::Config;
pub use error::{Error, Result};
