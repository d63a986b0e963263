use thiserror::Error;

pub type Result<T> = std::result::Result<T, WorkrError>;

#[derive(Debug, Error)]
pub enum WorkrError {
    #[error("unknown occupation `{0}`")]
    UnknownOccupation(String),

    #[error("non-finite value in field `{field}`")]
    NonFiniteValue { field: &'static str },

    #[error("missing or mistyped field `{field}`")]
    MissingField { field: String },

    #[error("negative timestamp {0}")]
    NegativeTimestamp(i64),

    #[error("line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },

    #[error("overlapping annotations for user `{user}`: [{first_start},{first_end}) and [{second_start},{second_end})")]
    OverlappingAnnotation {
        user: String,
        first_start: i64,
        first_end: i64,
        second_start: i64,
        second_end: i64,
    },

    #[error("invalid window configuration: slot_len={slot_len}, stride={stride}")]
    InvalidWindowConfig { slot_len: i64, stride: i64 },

    #[error("statistics requested for an empty series")]
    EmptySeries,

    #[error("training set is empty")]
    EmptyTrainingSet,

    #[error("unknown app category `{0}`")]
    UnknownAppCategory(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("feature layout mismatch: {0}")]
    LayoutMismatch(String),

    #[error("user `{user}` has {rows} rows, fewer than the minimum {min}")]
    UserTooSmall {
        user: String,
        rows: usize,
        min: usize,
    },

    #[error("no predictions to evaluate")]
    EmptyEvaluation,

    #[error("invalid group mask `{0}`")]
    InvalidMask(String),

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl WorkrError {
    /// True for errors caused by bad user input or configuration rather than
    /// a failure inside the pipeline.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            WorkrError::InvalidConfig(_)
                | WorkrError::InvalidMask(_)
                | WorkrError::InvalidWindowConfig { .. }
                | WorkrError::UnknownOccupation(_)
                | WorkrError::UserTooSmall { .. }
                | WorkrError::MalformedLine { .. }
                | WorkrError::OverlappingAnnotation { .. }
                | WorkrError::UnknownAppCategory(_)
                | WorkrError::ModelFormat(_)
        )
    }
}
