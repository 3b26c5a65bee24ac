use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value is out of range or inconsistent.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Input that makes an operation meaningless, e.g. a zero-power frame.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("shape mismatch in {what}: expected {expected}, got {actual}")]
    Shape {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("training diverged at epoch {epoch}, batch {batch}: loss = {loss}")]
    Divergence { epoch: usize, batch: usize, loss: f64 },

    #[error("non-finite input gradient at attack iteration {iteration}")]
    NonFiniteGradient { iteration: usize },

    /// A file that does not follow its binary or text layout.
    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },

    #[error("unsupported {what} version {found} (expected {expected})")]
    Version {
        what: &'static str,
        found: u32,
        expected: u32,
    },

    /// Artifacts that cannot be used together.
    #[error("incompatible artifacts: {0}")]
    Incompatible(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn format(what: &'static str, detail: impl Into<String>) -> Self {
        Error::Format {
            what,
            detail: detail.into(),
        }
    }
}
