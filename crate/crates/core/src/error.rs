use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("config parse error: {0}")]
    Parse(String),

    #[error("invalid `{field}`: {reason}")]
    Validation { field: String, reason: String },

    #[error("differential train is singular (J_z not invertible)")]
    SingularTrain,

    #[error("degenerate coupling: {0}")]
    DegenerateCoupling(String),

    #[error("stiffness matrix K_q is singular")]
    SingularStiffness,

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("expected {expected} joint states, got {got}")]
    Arity { expected: usize, got: usize },

    #[error("infeasible start: phalanx {phalanx} penetrates by {penetration:.3e} mm")]
    InfeasibleStart { phalanx: usize, penetration: f64 },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("sweep step {step}: {source}")]
    Sweep {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
