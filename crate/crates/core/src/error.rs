use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("document is empty after cleaning")]
    EmptyDocument,

    #[error("node index {index} out of range for tree of {len} nodes")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("id {id} out of range for table of {len} rows")]
    IdOutOfRange { id: usize, len: usize },

    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimMismatch {
        what: String,
        expected: usize,
        found: usize,
    },

    #[error("no external embedding for page {0:?}")]
    MissingPage(String),

    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: (usize, usize),
        rhs: (usize, usize),
    },

    #[error("batch normalization in train mode needs at least 2 rows, got {size}")]
    BatchTooSmall { size: usize },

    #[error("class {class} out of range for {classes} classes")]
    ClassOutOfRange { class: usize, classes: usize },

    #[error("non-finite gradient in parameter {param}")]
    NonFiniteGradient { param: String },

    #[error("xpath has {len} units but the embedding holds at most {max}")]
    UnitOverflow { len: usize, max: usize },

    #[error("graph {graph} has no nodes")]
    EmptyGraph { graph: usize },

    #[error("confusion matrix is empty")]
    EmptyMatrix,

    #[error("class {class:?} has {count} records, too few to seed every split")]
    ClassTooSmall { class: String, count: usize },

    #[error("corrupt checkpoint: {field}: {reason}")]
    CorruptCheckpoint { field: String, reason: String },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("invalid dataset: {0}")]
    Dataset(String),

    #[error("epoch {epoch}, batch {batch}: {source}")]
    Training {
        epoch: usize,
        batch: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn dim(what: impl Into<String>, expected: usize, found: usize) -> Self {
        Error::DimMismatch {
            what: what.into(),
            expected,
            found,
        }
    }

    pub(crate) fn corrupt(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::CorruptCheckpoint {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// True for failures caused by numerical blow-up rather than bad input.
    pub fn is_numeric(&self) -> bool {
        match self {
            Error::NonFiniteGradient { .. } => true,
            Error::Training { source, .. } => source.is_numeric(),
            _ => false,
        }
    }
}
