use thiserror::Error;

/// Error type shared by every stage of the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument `{field}`: {reason}")]
    InvalidArgument { field: String, reason: String },

    #[error("degenerate shape: {0}")]
    DegenerateShape(String),

    #[error("curve extends outside the grid: {0}")]
    OutOfBounds(String),

    #[error("solid region touches the {0} boundary")]
    SolidTouchesBoundary(&'static str),

    #[error("simulation diverged at step {step}: {reason}")]
    Divergence { step: usize, reason: String },

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("singular fit: {0}")]
    SingularFit(String),

    #[error("training diverged: {0}")]
    TrainingDiverged(String),

    #[error("every step-size candidate diverged; reinitialize and retry")]
    ScheduleExhausted,

    #[error("no viable training run")]
    NoViableRun,

    #[error("infeasible constraint: {0}")]
    InfeasibleConstraint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
