use std::io;
use std::path::PathBuf;

use thiserror::Error;

/// Coarse failure class, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Runtime,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("line {line}: {message}")]
    Jsonl { line: usize, message: String },

    #[error("duplicate sample id {id:?} (line {line})")]
    DuplicateId { id: String, line: usize },

    #[error("dataset too small: need at least {needed} samples, have {have}")]
    TooSmall { needed: usize, have: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{0}")]
    Lex(#[from] crate::cparse::LexError),

    #[error("{0}")]
    Parse(#[from] crate::cparse::ParseError),

    #[error("single-class training data ({context})")]
    SingleClass { context: String },

    #[error("empty training data ({context})")]
    EmptyData { context: String },

    #[error("rule {rule} is not applicable at site {site}")]
    RuleNotApplicable { rule: String, site: String },

    #[error("external model: {0}")]
    Bridge(String),

    #[error("operation not supported by this classifier: {0}")]
    Unsupported(String),

    #[error("malformed manifest: {0}")]
    Manifest(String),

    #[error("{0}")]
    Eval(#[from] crate::minieval::EvalError),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) | Error::TooSmall { .. } => ErrorClass::Config,
            Error::Io { .. }
            | Error::Jsonl { .. }
            | Error::DuplicateId { .. }
            | Error::Lex(_)
            | Error::Parse(_)
            | Error::SingleClass { .. }
            | Error::EmptyData { .. }
            | Error::Manifest(_) => ErrorClass::Data,
            Error::RuleNotApplicable { .. }
            | Error::Bridge(_)
            | Error::Unsupported(_)
            | Error::Eval(_) => ErrorClass::Runtime,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
