use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("{source_name}:{line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },

    #[error("{0}: file contains no data")]
    EmptyInput(String),

    #[error("{source_name}:{line}: duplicate id `{id}`")]
    DuplicateId {
        source_name: String,
        line: usize,
        id: String,
    },

    #[error("item `{0}` has a zero-norm vector")]
    ZeroNorm(String),

    #[error("unknown item `{0}`")]
    UnknownItem(String),

    #[error("token `{token}` in sentence `{sentence}` is out of vocabulary")]
    OutOfVocabulary { sentence: String, token: String },

    #[error("sentence `{0}` has no in-vocabulary tokens")]
    EmptySentence(String),

    #[error("question `{0}` has no candidates left after exclusion")]
    EmptyCandidates(String),

    #[error("invalid template: {0}")]
    Template(String),

    #[error("invalid word pair: {0}")]
    WordPair(String),

    #[error("invalid annotation: {0}")]
    Annotation(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("prediction for question `{0}` does not match any question")]
    UnmatchedPrediction(String),

    #[error("duplicate prediction for question `{qid}` ({column})")]
    DuplicatePrediction { qid: String, column: String },

    #[error("vector dimension {actual} does not match expected {expected}")]
    Dimension { expected: usize, actual: usize },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(source_name: &str, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            source_name: source_name.to_owned(),
            line,
            message: message.into(),
        }
    }
}
