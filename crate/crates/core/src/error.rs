// SPDX-License-Identifier: MIT OR Apache-2.0

use std::io;

use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported format_version {found} (supported: {supported})")]
    VersionedFormat { found: u32, supported: u32 },

    #[error("parse error: {0}")]
    Parse(String),

    /// The detector produced no change points, so distance metrics are undefined.
    #[error("no change points were detected; detection metrics are undefined")]
    NoDetections,

    #[error("degenerate segmentation: {0}")]
    DegenerateSegmentation(String),

    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
