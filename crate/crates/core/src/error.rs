use std::fmt;

/// Errors surfaced by the library.
///
/// `Infeasible` and `OutOfRegime` indicate parameter choices outside the
/// range the protocol's guarantees cover; the CLI maps them to exit code 2.
#[derive(Debug)]
pub enum Error {
    /// An argument violated a structural precondition (index out of range,
    /// dimension mismatch, malformed message).
    Domain(String),
    /// No valid protocol configuration exists for the requested parameters,
    /// e.g. the flip-probability quadratic has no root below 1/2.
    Infeasible(String),
    /// Parameters are outside the range an analytical guarantee covers
    /// (delta too large, not enough users for amplification).
    OutOfRegime(String),
    /// The request exceeds a configured resource cap (enumeration size,
    /// message-memory budget).
    Resource(String),
    /// Malformed input text (corpus files, message dumps, CLI grids).
    Parse(String),
    Io(std::io::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain(msg) => write!(f, "domain error: {msg}"),
            Error::Infeasible(msg) => write!(f, "infeasible parameters: {msg}"),
            Error::OutOfRegime(msg) => write!(f, "out of regime: {msg}"),
            Error::Resource(msg) => write!(f, "resource limit: {msg}"),
            Error::Parse(msg) => write!(f, "parse error: {msg}"),
            Error::Io(err) => write!(f, "i/o error: {err}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(err) => Some(err),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err)
    }
}

pub type Result<T> = std::result::Result<T, Error>;
