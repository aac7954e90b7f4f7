use thiserror::Error;

#[derive(Debug, Error)]
pub enum TopicError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("line {line}: {what} id {value} outside 1..={max}")]
    Range {
        line: usize,
        what: &'static str,
        value: usize,
        max: usize,
    },

    #[error("line {line}: duplicate entry for doc {doc}, word {word}")]
    DuplicateEntry { line: usize, doc: usize, word: usize },

    #[error("line {line}: count must be at least 1, got {value}")]
    Value { line: usize, value: i64 },

    #[error("corpus has no documents")]
    EmptyCorpus,

    #[error("corpus has no tokens; perplexity is undefined")]
    UndefinedMetric,

    #[error("cannot split {docs} documents into {folds} folds")]
    InsufficientDocuments { docs: usize, folds: usize },

    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparams(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("entry {0} does not belong to this corpus")]
    UnknownEntry(usize),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("internal consistency error: {0}")]
    Consistency(String),

    #[error("non-finite perplexity at iteration {iteration}")]
    NumericalFailure { iteration: usize },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("unknown engine {0:?} (expected sbp, rbp, gs or vb)")]
    UnknownEngine(String),

    #[error("unknown schedule mode {0:?} (expected word, doc or entry)")]
    UnknownSchedule(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = TopicError> = std::result::Result<T, E>;
