use thiserror::Error;

use crate::dsl::SourceSpan;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{span}: parse error: {message}")]
    Parse { span: SourceSpan, message: String },

    #[error("{span}: validation error: {message}")]
    Validation { span: SourceSpan, message: String },

    #[error("{span}: unknown task `{name}`")]
    UnknownTask { span: SourceSpan, name: String },

    /// Invariant violation in a programmatically built value.
    #[error("invalid {0}")]
    Invalid(String),

    #[error("unbound variable `{0}`")]
    UnboundVariable(String),

    #[error("belief probabilities sum to {sum}, expected 1")]
    InvalidDistribution { sum: f64 },

    #[error("invalid cost `{0}`")]
    InvalidCost(String),

    #[error("no pending belief state matches observation {0}")]
    NoMatchingBelief(String),

    #[error("observation {0} matches more than one pending belief state")]
    AmbiguousBelief(String),

    #[error("search depth exceeded the limit of {0}")]
    DepthExceeded(usize),

    #[error("oracle node budget of {0} exceeded")]
    BudgetExceeded(u64),

    #[error("plan has no branch for observation {observation}")]
    BranchMissing { observation: String },

    #[error("plan step {step} is not executable: {reason}")]
    NotExecutable { step: String, reason: String },

    #[error("invalid plan document: {0}")]
    PlanFormat(String),
}

impl Error {
    /// True for faults in user-supplied text or documents, as opposed to
    /// failures of the search itself.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::Validation { .. }
                | Error::UnknownTask { .. }
                | Error::Invalid(_)
                | Error::InvalidDistribution { .. }
                | Error::InvalidCost(_)
                | Error::PlanFormat(_)
        )
    }

    pub fn span(&self) -> Option<&SourceSpan> {
        match self {
            Error::Parse { span, .. }
            | Error::Validation { span, .. }
            | Error::UnknownTask { span, .. } => Some(span),
            _ => None,
        }
    }
}
