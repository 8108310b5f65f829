use thiserror::Error;

use crate::intervention::Intervention;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Expression text could not be parsed. `column` is 1-based.
    #[error("parse error at column {column}: {message}")]
    Parse { column: usize, message: String },

    #[error("undeclared identifier `{0}`")]
    UnresolvedReference(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("evaluation error: {0}")]
    Eval(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("model shape error: {0}")]
    Structural(String),

    #[error("fixed-point iteration did not converge after {iterations} iterations (last residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("draw {index}: {source}")]
    Draw {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("under {intervention}: {source}")]
    AtIntervention {
        intervention: Intervention,
        #[source]
        source: Box<Error>,
    },

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("singular system under {intervention}: {detail}")]
    Singular {
        intervention: Intervention,
        detail: String,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("certification failed: {0}")]
    Certification(String),
}

impl Error {
    pub(crate) fn at(self, intervention: &Intervention) -> Error {
        Error::AtIntervention {
            intervention: intervention.clone(),
            source: Box::new(self),
        }
    }

    /// Strips `Draw` / `AtIntervention` context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Draw { source, .. } | Error::AtIntervention { source, .. } => source.root(),
            other => other,
        }
    }
}
