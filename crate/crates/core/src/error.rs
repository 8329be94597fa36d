//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument fell outside the mathematical domain of an operation.
    #[error("domain error in {op}: {msg}")]
    Domain { op: &'static str, msg: String },

    /// A numeric procedure failed to produce a usable result.
    #[error("numeric error in {op}: {msg}")]
    Numeric { op: &'static str, msg: String },

    /// Vector/matrix dimensions do not line up.
    #[error("dimension mismatch in {op}: expected {expected}, got {got}")]
    Dimension {
        op: &'static str,
        expected: usize,
        got: usize,
    },

    /// Malformed input data (CSV parse failures, bad series, bad prices).
    #[error("data error{}: {msg}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Data { line: Option<usize>, msg: String },

    /// Invalid configuration value.
    #[error("config error: field `{field}`: {msg}")]
    Config { field: &'static str, msg: String },

    /// A streaming step failed; carries the step index for context.
    #[error("stream error at step {index}: {source}")]
    Stream {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    /// A metric is undefined for the given inputs (e.g. zero return variance).
    #[error("undefined metric {metric}: {msg}")]
    UndefinedMetric { metric: &'static str, msg: String },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn domain(op: &'static str, msg: impl Into<String>) -> Self {
        Error::Domain {
            op,
            msg: msg.into(),
        }
    }

    pub fn numeric(op: &'static str, msg: impl Into<String>) -> Self {
        Error::Numeric {
            op,
            msg: msg.into(),
        }
    }

    pub fn data(line: Option<usize>, msg: impl Into<String>) -> Self {
        Error::Data {
            line,
            msg: msg.into(),
        }
    }

    pub fn config(field: &'static str, msg: impl Into<String>) -> Self {
        Error::Config {
            field,
            msg: msg.into(),
        }
    }

    /// Wrap an error with the index of the stream step that produced it.
    pub fn at_step(self, index: usize) -> Self {
        Error::Stream {
            index,
            source: Box::new(self),
        }
    }

    /// True for errors caused by bad input data rather than bad configuration.
    pub fn is_data_error(&self) -> bool {
        !matches!(self, Error::Config { .. })
    }
}
