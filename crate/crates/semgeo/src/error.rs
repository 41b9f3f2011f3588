use std::path::PathBuf;

use thiserror::Error;

use crate::format::FormatError;

#[derive(Debug, Error)]
pub enum Error {
    #[error("config: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Input { path: PathBuf, source: FormatError },
    #[error("layer {layer}: {source}")]
    Layer { layer: usize, source: Box<Error> },
    #[error("{context}: {source}")]
    Step { context: &'static str, source: semgeo_core::Error },
    #[error(transparent)]
    Core(#[from] semgeo_core::Error),
    #[error("writing {}: {source}", path.display())]
    Output { path: PathBuf, source: std::io::Error },
    #[error("writing {}: {source}", path.display())]
    Csv { path: PathBuf, source: csv::Error },
}

impl Error {
    /// Configuration problems are usage errors; the rest are run failures.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::Config(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
