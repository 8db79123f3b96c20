use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    /// A malformed record. `offset` is a byte offset for binary input and a
    /// 1-based line number for text input.
    #[error("parse error at {unit} {offset}: {message}")]
    Parse {
        unit: &'static str,
        offset: u64,
        message: String,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("out of range: {0}")]
    Range(String),

    #[error("timestamp order violation: {0}")]
    Order(String),

    #[error("model error: {0}")]
    Model(String),

    #[error("model version {found} is not supported (expected {expected})")]
    ModelVersion { found: u64, expected: u64 },

    #[error("model build error: {0}")]
    Build(String),

    #[error("degenerate tracker: {0}")]
    DegenerateTracker(String),

    #[error("scene spec error: {0}")]
    Spec(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("evaluation error: {0}")]
    Eval(String),

    #[error("render error: {0}")]
    Render(String),

    #[error("event #{index}: {source}")]
    AtEvent {
        index: u64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn parse_line(line: u64, message: impl Into<String>) -> Self {
        Error::Parse {
            unit: "line",
            offset: line,
            message: message.into(),
        }
    }

    pub(crate) fn parse_byte(offset: u64, message: impl Into<String>) -> Self {
        Error::Parse {
            unit: "byte",
            offset,
            message: message.into(),
        }
    }

    pub(crate) fn at_event(self, index: u64) -> Self {
        Error::AtEvent {
            index,
            source: Box::new(self),
        }
    }

    /// Strip event-index context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtEvent { source, .. } => source.root(),
            other => other,
        }
    }
}
