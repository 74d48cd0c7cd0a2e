use std::path::PathBuf;

/// Errors produced by the pipeline stages.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("user has no stays")]
    NoStays,

    #[error("degenerate vocabulary: fewer than 2 distinct tags")]
    DegenerateVocabulary,

    #[error("tag {0:?} missing from embedding table")]
    MissingTag(String),

    #[error("k = {k} exceeds number of rows {rows}")]
    TooManyClusters { k: usize, rows: usize },

    #[error("label vectors have different lengths ({0} vs {1})")]
    LabelLengthMismatch(usize, usize),

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("no complete users to assemble feature views from")]
    NoCompleteUsers,

    #[error("invalid cohort spec: {0}")]
    InvalidSpec(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("missing upstream artifact: {0}")]
    MissingArtifact(PathBuf),

    #[error("malformed artifact {path}: {message}")]
    MalformedArtifact { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
