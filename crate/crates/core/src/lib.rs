//! Staged dynamic kernel-module registration and loading, simulated in user space.
//!
//! A [`catalog::ModuleCatalog`] describes modules and their dependencies. The
//! [`registry`] turns it into an index file (load bits or dependency levels),
//! and the [`loader`] attaches modules with one of four strategies, recording a
//! trace. [`metrics`] summarizes traces into timing and space figures.

pub mod catalog;
pub mod cli;
mod error;
pub mod fixture;
pub mod hardware;
pub mod loader;
pub mod metrics;
pub mod registry;

pub use error::{Error, Result};
