use std::io;
use std::path::PathBuf;

use thiserror::Error;

use crate::catalog::CatalogError;
use crate::hardware::InventoryError;
use crate::loader::LoadError;
use crate::registry::RegistryError;

/// Any failure surfaced by the engine or the command-line driver.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error(transparent)]
    Inventory(#[from] InventoryError),
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error("{0}")]
    Trace(String),
    #[error("{0}")]
    Usage(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
}

impl Error {
    /// Stable machine-readable code used in `error: <code>: <detail>` lines.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Catalog(e) => e.code(),
            Error::Inventory(e) => e.code(),
            Error::Registry(e) => e.code(),
            Error::Load(e) => e.code(),
            Error::Trace(_) => "trace",
            Error::Usage(_) => "usage",
            Error::Io { .. } => "io",
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
