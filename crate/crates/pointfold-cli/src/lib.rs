//! IO, file formats, checkpoints and the command implementations behind the
//! `pointfold` binary.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod dataset;
pub mod error;
pub mod formats;
pub mod manifest;

pub use error::{CliError, Result};
