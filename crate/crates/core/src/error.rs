use std::path::PathBuf;

use crate::corpus::MoodLabel;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    // corpus
    #[error("segmentation lexicon is empty")]
    LexiconEmpty,
    #[error("no token reaches the minimum count")]
    EmptyVocabulary,
    #[error("class {0} has fewer than 2 documents")]
    ClassTooSmall(MoodLabel),
    #[error("document {0} has no label")]
    Unlabeled(String),
    #[error("document {0} has no tokens")]
    EmptyDocument(String),
    #[error("unknown mood label {label:?} in document {id}")]
    UnknownLabel { id: String, label: String },
    #[error("synthetic corpus config infeasible: {0}")]
    ConfigInfeasible(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    // features
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("duplicate lexicon entry ({word}, {category}) at line {line}")]
    DuplicateEntry {
        word: String,
        category: String,
        line: usize,
    },

    // embeddings
    #[error("CBOW context is empty")]
    EmptyContext,
    #[error("cosine similarity of a zero vector")]
    ZeroVector,
    #[error("word {0:?} is not in the vocabulary")]
    UnknownWord(String),

    // svm / nn
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("SVM training data contains a single class")]
    SingleClassInput,
    #[error("input of length {len} is shorter than kernel width {width}")]
    InputTooShort { len: usize, width: usize },
    #[error("batch normalization needs at least 2 values per channel, got {0}")]
    DegenerateBatch(usize),
    #[error("backward cache does not match the model: {0}")]
    StaleCache(String),
    #[error("training dataset is empty")]
    EmptyDataset,
    #[error("loss is not finite")]
    NonFiniteLoss,

    // eval
    #[error("label sequences differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("confusion matrix is empty")]
    EmptyMatrix,
    #[error("no documents of class {0}")]
    UnknownClass(MoodLabel),

    // io
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("model file: {0}")]
    ModelFormat(String),
    #[error("json at line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}
