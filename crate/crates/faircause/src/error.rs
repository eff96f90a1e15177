use thiserror::Error;

/// Errors surfaced by model queries, dataset operations, and the removal
/// pipeline. Validation problems are not errors: `CausalModel::validate`
/// returns a report instead.
#[derive(Debug, Error)]
pub enum Error {
    /// An input referenced an unknown attribute or value, or two objects
    /// disagree on the attribute space.
    #[error("domain error: {0}")]
    Domain(String),

    /// A conditional quantity was requested but its conditioning event has
    /// zero probability or zero rows.
    #[error("undefined conditional: {0}")]
    UndefinedConditional(String),

    /// CPT estimation hit a parent combination with no observations and no
    /// smoothing to fall back on.
    #[error("undefined CPT row for {child} given {combination}: no observations and smoothing is 0")]
    UndefinedRow { child: String, combination: String },

    /// Exact enumeration would visit more joint states than the configured cap.
    #[error("state space of {required} joint states exceeds the enumeration cap of {cap}")]
    ResourceLimit { required: u128, cap: u64 },

    /// A requested bound or flip policy cannot be met by any parameter value.
    #[error("infeasible: {message}")]
    Infeasible {
        message: String,
        /// Best confidence attainable when a target confidence was unreachable.
        limiting_confidence: Option<f64>,
    },

    /// Phase 2 was invoked before Phase 1 finished (slack would be negative).
    #[error("phase order violated: {0}")]
    PhaseOrder(String),

    /// An underlying error annotated with where it happened.
    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn undefined(msg: impl Into<String>) -> Self {
        Error::UndefinedConditional(msg.into())
    }

    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context { context: context.into(), source: Box::new(self) }
    }

    /// Process exit code for the CLI: domain-type failures map to 1.
    pub fn exit_code(&self) -> i32 {
        1
    }
}
