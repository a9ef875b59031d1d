use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}", path = path.display())]
    Read { path: PathBuf, source: io::Error },

    #[error("cannot write {path}: {source}", path = path.display())]
    Write { path: PathBuf, source: io::Error },

    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    #[error("malformed JSONL record {index}: {message}")]
    MalformedRecord { index: usize, message: String },

    #[error("{what}, line {line}: {message}")]
    Format {
        what: String,
        line: usize,
        message: String,
    },

    #[error("zero documents")]
    EmptyCorpus,

    #[error("duplicate document id `{0}`")]
    DuplicateId(String),

    #[error("invalid parameter `{name}`: {message}")]
    InvalidParameter { name: &'static str, message: String },

    #[error("unknown term `{0}`")]
    UnknownTerm(String),

    #[error("topic {topic} out of range 1..={k}")]
    TopicOutOfRange { topic: usize, k: usize },

    #[error("all topics excluded")]
    AllTopicsExcluded,

    #[error("idf undefined: all idf terms zero (reference has a single document)")]
    IdfUndefined,

    #[error("dictionary empty")]
    EmptyDictionary,

    #[error("co-occurrence term lists differ")]
    TermListMismatch,

    #[error("expected a {expected} co-occurrence matrix, found {found}")]
    Provenance {
        expected: &'static str,
        found: &'static str,
    },

    #[error("{0} corpus cannot provide co-occurrence data")]
    CoocRole(&'static str),

    #[error("co-occurrence matrix required for {0} scoring")]
    MissingMatrix(&'static str),

    #[error("biased system subset is empty")]
    EmptyBiasedSubset,

    #[error("unknown system `{0}`")]
    UnknownSystem(String),

    #[error("duplicate system `{0}`")]
    DuplicateSystem(String),

    #[error("empty pseudorel set")]
    EmptyPseudorels,

    #[error("missing judgments for {} document(s): {}", .0.len(), .0.join(", "))]
    MissingJudgments(Vec<String>),

    #[error("{0}")]
    Config(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, message: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            message: message.into(),
        }
    }

    pub(crate) fn format(what: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Format {
            what: what.into(),
            line,
            message: message.into(),
        }
    }
}
