//! Error type shared by every module in the crate.

use alloc::string::String;

/// Crate-wide result alias.
pub type Result<T> = core::result::Result<T, Error>;

/// Everything that can go wrong inside the engine.
///
/// IO errors never appear here; file handling lives in the companion CLI
/// crate and wraps these variants in its own error type.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Two matrices met an operation with incompatible shapes.
    #[error("{op}: shape mismatch, left is {lhs_rows}x{lhs_cols}, right is {rhs_rows}x{rhs_cols}")]
    ShapeMismatch {
        op: &'static str,
        lhs_rows: usize,
        lhs_cols: usize,
        rhs_rows: usize,
        rhs_cols: usize,
    },

    /// A constructor received data whose length does not match rows*cols.
    #[error("matrix data length {got} does not match {rows}x{cols}")]
    DataLength { rows: usize, cols: usize, got: usize },

    /// An operation that needs at least one row/point got an empty input.
    #[error("{op}: input is empty")]
    Empty { op: &'static str },

    /// An index-like argument fell outside its valid range.
    #[error("{what} = {got} out of range (limit {limit})")]
    OutOfRange {
        what: &'static str,
        got: usize,
        limit: usize,
    },

    /// A configuration value failed validation.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// A mesh had no triangle with positive area to sample from.
    #[error("mesh has no triangle with positive area")]
    DegenerateMesh,

    /// An event callback asked the surrounding loop to stop.
    #[error("callback failed: {0}")]
    Callback(String),
}
