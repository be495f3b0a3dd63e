//! Error type shared by the library and the CLI.

use thiserror::Error;

/// Errors surfaced by library operations.
///
/// Domain errors describe inputs outside an operation's mathematical domain
/// (zero classes, stability values off the upper half-plane, contour
/// endpoints on a singularity). Numerical errors describe runs where a
/// computation finished but failed its own accuracy safeguards.
#[derive(Debug, Error)]
pub enum Error {
    /// Input outside the operation's domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// A numerical safeguard failed (tolerance exceeded, no convergence).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A configured size cap would be exceeded.
    #[error("resource limit: {0}")]
    Resource(String),

    /// Malformed textual/JSON input.
    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
    pub fn parse(msg: impl Into<String>) -> Self {
        Error::Parse(msg.into())
    }
    pub fn resource(msg: impl Into<String>) -> Self {
        Error::Resource(msg.into())
    }
}
