use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure class, used by the command line driver to pick an exit code.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Checkpoint,
    Numerics,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Config => 2,
            ErrorKind::Data => 3,
            ErrorKind::Checkpoint => 4,
            ErrorKind::Numerics => 1,
        }
    }

    pub fn code(self) -> &'static str {
        match self {
            ErrorKind::Config => "E_CONFIG",
            ErrorKind::Data => "E_DATA",
            ErrorKind::Checkpoint => "E_CHECKPOINT",
            ErrorKind::Numerics => "E_NUMERICS",
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: malformed record: {message}")]
    MalformedLine { line: usize, message: String },

    #[error("line {line}: record {id:?} has an empty {field} array")]
    EmptyRecord {
        line: usize,
        id: String,
        field: &'static str,
    },

    #[error("cannot tokenize blank text")]
    BlankText,

    #[error("{0}")]
    Data(String),

    #[error("{0}")]
    Config(String),

    #[error("{0}")]
    Checkpoint(String),

    #[error("vocabulary hash mismatch: checkpoint expects {expected}, found {found}")]
    VocabMismatch { expected: String, found: String },

    #[error("{op}: shape mismatch between {lhs:?} and {rhs:?}")]
    Shape {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("{0}")]
    Numerics(String),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Io { .. }
            | Error::MalformedLine { .. }
            | Error::EmptyRecord { .. }
            | Error::BlankText
            | Error::Data(_) => ErrorKind::Data,
            Error::Config(_) => ErrorKind::Config,
            Error::Checkpoint(_) | Error::VocabMismatch { .. } => ErrorKind::Checkpoint,
            Error::Shape { .. } | Error::NonFinite(_) | Error::Numerics(_) => ErrorKind::Numerics,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn shape(op: &'static str, lhs: &[usize], rhs: &[usize]) -> Self {
        Error::Shape {
            op,
            lhs: lhs.to_vec(),
            rhs: rhs.to_vec(),
        }
    }
}
